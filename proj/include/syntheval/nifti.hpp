#pragma once

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "syntheval/error.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// NIfTI-1 subset reader/writer.
//
// Supported: 3-D volumes, little-endian, datatypes uint8 (2), int16 (4) and
// float32 (16), single-file "n+1\0" or two-file "ni1\0" (.hdr + .img)
// layout, optionally gzip-compressed. Everything else is an explicit error.
// qform/sform fields are read-ignored; only pixdim spacing is honored.
//
// Written files are always single-file float32 "n+1\0": a 348-byte header,
// 4 pad bytes (vox_offset 352), then little-endian float32 voxels in
// data[x + nx*(y + ny*z)] order. A float32 round trip is bit-exact.

namespace nifti_detail {

static_assert(std::endian::native == std::endian::little,
              "the NIfTI reader/writer assumes a little-endian host");

// Header field offsets (byte positions in the 348-byte header).
inline constexpr std::size_t kOffSizeofHdr = 0;
inline constexpr std::size_t kOffDim = 40;        // short dim[8]
inline constexpr std::size_t kOffDatatype = 70;   // short
inline constexpr std::size_t kOffBitpix = 72;     // short
inline constexpr std::size_t kOffPixdim = 76;     // float pixdim[8]
inline constexpr std::size_t kOffVoxOffset = 108; // float
inline constexpr std::size_t kOffSclSlope = 112;  // float
inline constexpr std::size_t kOffSclInter = 116;  // float
inline constexpr std::size_t kOffXyztUnits = 123; // char
inline constexpr std::size_t kOffMagic = 344;     // char[4]
inline constexpr std::size_t kHeaderSize = 348;

inline constexpr std::int16_t kDtUint8 = 2;
inline constexpr std::int16_t kDtInt16 = 4;
inline constexpr std::int16_t kDtFloat32 = 16;

template <typename T>
T load(const std::array<char, kHeaderSize>& h, std::size_t off) {
  T v;
  std::memcpy(&v, h.data() + off, sizeof v);
  return v;
}

template <typename T>
void store(std::array<char, kHeaderSize>& h, std::size_t off, T v) {
  std::memcpy(h.data() + off, &v, sizeof v);
}

// gzread handles both gzip and plain files transparently.
class GzReader {
 public:
  explicit GzReader(const std::string& path) : path_(path) {
    f_ = gzopen(path.c_str(), "rb");
    require(f_ != nullptr, errc::io_error, "cannot open " + path);
  }
  ~GzReader() {
    if (f_) gzclose(f_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read_exact(void* dst, std::size_t n, std::size_t at_offset_for_error) {
    int got = gzread(f_, dst, static_cast<unsigned>(n));
    require(got == static_cast<int>(n), errc::format_error,
            path_ + ": truncated at byte offset " + std::to_string(at_offset_for_error));
  }
  void skip_to(std::size_t offset, std::size_t already_read) {
    require(offset >= already_read, errc::format_error,
            path_ + ": data offset " + std::to_string(offset) + " inside header");
    std::vector<char> junk(offset - already_read);
    if (!junk.empty()) read_exact(junk.data(), junk.size(), already_read);
  }

 private:
  std::string path_;
  gzFile f_ = nullptr;
};

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// "vol.nii.gz" -> "vol", "vol.hdr" -> "vol"
inline std::string strip_nifti_extension(const std::string& path) {
  for (const char* ext : {".nii.gz", ".hdr.gz", ".img.gz", ".nii", ".hdr", ".img"})
    if (ends_with(path, ext)) return path.substr(0, path.size() - std::strlen(ext));
  return path;
}

}  // namespace nifti_detail

// Optional sidecar metadata: "<stem>.json" next to the volume, holding
// {"modality": "...", "subject_id": "..."}.
struct SidecarMeta {
  Modality modality = Modality::T1;
  std::string subject_id = "unknown";
  bool found = false;
};

inline SidecarMeta read_sidecar(const std::string& volume_path) {
  SidecarMeta meta;
  const std::string path = nifti_detail::strip_nifti_extension(volume_path) + ".json";
  std::ifstream in(path);
  if (!in) return meta;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::format_error, path + ": " + e.what());
  }
  if (j.contains("modality")) meta.modality = parse_modality(j.at("modality").get<std::string>());
  if (j.contains("subject_id")) meta.subject_id = j.at("subject_id").get<std::string>();
  meta.found = true;
  return meta;
}

inline void write_sidecar(const Volume3D& v, const std::string& volume_path) {
  const std::string path = nifti_detail::strip_nifti_extension(volume_path) + ".json";
  nlohmann::json j;
  j["modality"] = modality_name(v.modality);
  j["subject_id"] = v.subject_id;
  std::ofstream out(path);
  require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
  out << j.dump(2) << "\n";
}

inline Volume3D read_nifti(const std::string& path) {
  namespace nd = nifti_detail;
  nd::GzReader reader(path);

  std::array<char, nd::kHeaderSize> h{};
  reader.read_exact(h.data(), h.size(), 0);

  const auto sizeof_hdr = nd::load<std::int32_t>(h, nd::kOffSizeofHdr);
  if (sizeof_hdr != 348) {
    // 348 byte-swapped is 1543569408: a big-endian file, which is out of
    // the supported subset.
    if (sizeof_hdr == 1543569408)
      fail(errc::format_error, path + ": big-endian NIfTI not supported (byte offset 0)");
    fail(errc::format_error,
         path + ": bad sizeof_hdr " + std::to_string(sizeof_hdr) + " (byte offset 0)");
  }

  char magic[4];
  std::memcpy(magic, h.data() + nd::kOffMagic, 4);
  const bool single_file = std::memcmp(magic, "n+1\0", 4) == 0;
  const bool pair_file = std::memcmp(magic, "ni1\0", 4) == 0;
  require(single_file || pair_file, errc::format_error,
          path + ": bad magic (byte offset 344)");

  const auto datatype = nd::load<std::int16_t>(h, nd::kOffDatatype);
  if (datatype != nd::kDtUint8 && datatype != nd::kDtInt16 && datatype != nd::kDtFloat32)
    fail(errc::unsupported_datatype,
         path + ": datatype code " + std::to_string(datatype) +
             " outside supported {2 (uint8), 4 (int16), 16 (float32)}");

  const auto ndim = nd::load<std::int16_t>(h, nd::kOffDim);
  require(ndim == 3, errc::dimension_error,
          path + ": dim[0] = " + std::to_string(ndim) + ", only 3-D volumes supported");

  Volume3D v;
  for (int a = 0; a < 3; ++a) {
    const auto d = nd::load<std::int16_t>(h, nd::kOffDim + 2 * (a + 1));
    require(d > 0, errc::format_error,
            path + ": non-positive dim[" + std::to_string(a + 1) + "] (byte offset " +
                std::to_string(nd::kOffDim + 2 * (a + 1)) + ")");
    v.dims[a] = d;
  }
  for (int a = 0; a < 3; ++a) {
    const auto p = nd::load<float>(h, nd::kOffPixdim + 4 * (a + 1));
    require(p > 0.0f, errc::format_error,
            path + ": non-positive pixdim[" + std::to_string(a + 1) + "] (byte offset " +
                std::to_string(nd::kOffPixdim + 4 * (a + 1)) + ")");
    v.spacing[a] = p;
  }

  const auto vox_offset = static_cast<std::size_t>(nd::load<float>(h, nd::kOffVoxOffset));
  const auto scl_slope = nd::load<float>(h, nd::kOffSclSlope);
  const auto scl_inter = nd::load<float>(h, nd::kOffSclInter);

  const std::size_t n = v.voxel_count();
  v.data.resize(n);

  // Voxel payload: either after the header in the same file or in the
  // sibling .img for the two-file layout.
  const std::size_t bytes_per =
      datatype == nd::kDtUint8 ? 1 : (datatype == nd::kDtInt16 ? 2 : 4);
  std::vector<char> raw(n * bytes_per);
  if (single_file) {
    reader.skip_to(vox_offset, nd::kHeaderSize);
    reader.read_exact(raw.data(), raw.size(), vox_offset);
  } else {
    std::string img = nd::strip_nifti_extension(path) + ".img";
    if (!std::filesystem::exists(img) && std::filesystem::exists(img + ".gz")) img += ".gz";
    nd::GzReader data_reader(img);
    data_reader.skip_to(vox_offset, 0);
    data_reader.read_exact(raw.data(), raw.size(), vox_offset);
  }

  const bool apply_scaling = (datatype != nd::kDtFloat32) && scl_slope != 0.0f;
  for (std::size_t i = 0; i < n; ++i) {
    double x;
    if (datatype == nd::kDtUint8) {
      x = static_cast<unsigned char>(raw[i]);
    } else if (datatype == nd::kDtInt16) {
      std::int16_t s;
      std::memcpy(&s, raw.data() + 2 * i, 2);
      x = s;
    } else {
      float f;
      std::memcpy(&f, raw.data() + 4 * i, 4);
      x = f;
    }
    if (apply_scaling) x = x * static_cast<double>(scl_slope) + static_cast<double>(scl_inter);
    v.data[i] = x;
  }

  double lo = v.data[0], hi = v.data[0];
  for (double x : v.data) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  v.intensity_range = {lo, hi};

  const SidecarMeta meta = read_sidecar(path);
  v.modality = meta.modality;
  v.subject_id = meta.subject_id;
  return v;
}

inline void write_nifti(const Volume3D& v, const std::string& path) {
  namespace nd = nifti_detail;
  v.validate();

  std::array<char, nd::kHeaderSize> h{};
  nd::store<std::int32_t>(h, nd::kOffSizeofHdr, 348);
  h[38] = 'r';  // regular
  nd::store<std::int16_t>(h, nd::kOffDim, 3);
  for (int a = 0; a < 3; ++a)
    nd::store<std::int16_t>(h, nd::kOffDim + 2 * (a + 1), static_cast<std::int16_t>(v.dims[a]));
  for (int a = 4; a <= 7; ++a) nd::store<std::int16_t>(h, nd::kOffDim + 2 * a, 1);
  nd::store<std::int16_t>(h, nd::kOffDatatype, nd::kDtFloat32);
  nd::store<std::int16_t>(h, nd::kOffBitpix, 32);
  nd::store<float>(h, nd::kOffPixdim, 1.0f);  // qfac
  for (int a = 0; a < 3; ++a)
    nd::store<float>(h, nd::kOffPixdim + 4 * (a + 1), static_cast<float>(v.spacing[a]));
  nd::store<float>(h, nd::kOffVoxOffset, 352.0f);
  nd::store<float>(h, nd::kOffSclSlope, 0.0f);  // 0 means "no scaling"
  nd::store<float>(h, nd::kOffSclInter, 0.0f);
  h[nd::kOffXyztUnits] = 2;  // millimeters
  std::memcpy(h.data() + nd::kOffMagic, "n+1\0", 4);

  const char pad[4] = {0, 0, 0, 0};
  std::vector<float> voxels(v.data.size());
  for (std::size_t i = 0; i < v.data.size(); ++i) voxels[i] = static_cast<float>(v.data[i]);

  if (nd::ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    require(f != nullptr, errc::io_error, "cannot write " + path);
    bool ok = gzwrite(f, h.data(), h.size()) == static_cast<int>(h.size()) &&
              gzwrite(f, pad, 4) == 4 &&
              gzwrite(f, voxels.data(), static_cast<unsigned>(voxels.size() * 4)) ==
                  static_cast<int>(voxels.size() * 4);
    gzclose(f);
    require(ok, errc::io_error, "short write to " + path);
  } else {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
    out.write(h.data(), h.size());
    out.write(pad, 4);
    out.write(reinterpret_cast<const char*>(voxels.data()),
              static_cast<std::streamsize>(voxels.size() * 4));
    require(static_cast<bool>(out), errc::io_error, "short write to " + path);
  }
}

}  // namespace syntheval
