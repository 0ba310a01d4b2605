#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "syntheval/error.hpp"

namespace syntheval {

// ---------------------------------------------------------------------------
// Modality
// ---------------------------------------------------------------------------

enum class Modality { T1, T1c, T2, FLAIR, PD, MRA };

inline constexpr std::array<Modality, 6> kAllModalities = {
    Modality::T1, Modality::T1c, Modality::T2, Modality::FLAIR, Modality::PD, Modality::MRA};

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::T1: return "T1";
    case Modality::T1c: return "T1c";
    case Modality::T2: return "T2";
    case Modality::FLAIR: return "FLAIR";
    case Modality::PD: return "PD";
    case Modality::MRA: return "MRA";
  }
  return "?";
}

inline Modality parse_modality(const std::string& s) {
  for (Modality m : kAllModalities)
    if (s == modality_name(m)) return m;
  fail(errc::format_error, "unknown modality '" + s + "'");
}

// Clinical description used as the text prompt for each modality.
inline const char* modality_prompt(Modality m) {
  switch (m) {
    case Modality::T1:
      return "T1-weighted (T1) images provide high-resolution anatomical detail, with fat "
             "appearing bright and water appearing dark, useful for visualizing normal tissue "
             "structure.";
    case Modality::T1c:
      return "T1 contrast-enhanced (T1c) images involve the administration of a contrast agent, "
             "enhancing vascular structures and providing better visualization of tumors and "
             "lesions.";
    case Modality::T2:
      return "T2-weighted (T2) images emphasize fluid-rich tissues, with water appearing bright "
             "and fat darker, making it ideal for detecting abnormalities like edema or "
             "inflammation.";
    case Modality::FLAIR:
      return "T2 Fluid-Attenuated Inversion Recovery MRI (FLAIR) suppresses cerebrospinal fluid "
             "(CSF) signals to better visualize pathological tissues with high water content, "
             "such as edema, tumors, or white matter lesions.";
    case Modality::PD:
      return "Proton density (PD) weighted MRI image highlights tissues with high hydrogen atom "
             "concentration, appearing brightest in areas like fat and fluid, while minimizing "
             "T1/T2 relaxation effects for enhanced tissue contrast.";
    case Modality::MRA:
      return "Magnetic Resonance Angiography (MRA) non-invasively images blood vessels by "
             "detecting flowing blood signals, aiding in diagnosing vascular abnormalities like "
             "stenosis, aneurysms, or malformations.";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

// 3-D scalar image. Voxels are stored row-major with x fastest:
// data[x + nx * (y + ny * z)].
struct Volume3D {
  std::array<int, 3> dims{0, 0, 0};              // nx, ny, nz
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm
  std::vector<double> data;
  Modality modality = Modality::T1;
  std::string subject_id = "unknown";
  std::array<double, 2> intensity_range{0.0, 1.0};

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z);
  }
  double at(int x, int y, int z) const { return data[index(x, y, z)]; }
  double& at(int x, int y, int z) { return data[index(x, y, z)]; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  void validate() const {
    require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, errc::dimension_error,
            "volume dims must be positive");
    require(spacing[0] > 0 && spacing[1] > 0 && spacing[2] > 0, errc::param_error,
            "volume spacing must be positive");
    require(data.size() == voxel_count(), errc::dim_mismatch,
            "volume data length does not match dims");
  }
};

// 2-D float image, h rows by w columns, data[row * w + col].
struct Slice2D {
  int height = 0;
  int width = 0;
  std::vector<double> data;
  int slice_index = 0;
  Modality modality = Modality::T1;
  std::string subject_id = "unknown";

  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
  double at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }

  void validate() const {
    require(height > 0 && width > 0, errc::dimension_error, "slice dims must be positive");
    require(data.size() == size(), errc::dim_mismatch, "slice data length does not match dims");
  }
};

// Binary mask, same layout as Slice2D; every element is 0 or 1.
struct Mask2D {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;
  std::string label_name;

  std::size_t size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto v : data) c += v;
    return c;
  }
  void validate() const {
    require(height > 0 && width > 0, errc::dimension_error, "mask dims must be positive");
    require(data.size() == size(), errc::dim_mismatch, "mask data length does not match dims");
    for (auto v : data)
      require(v == 0 || v == 1, errc::format_error, "mask values must be 0 or 1");
  }
};

inline void insert_slice(Volume3D& v, const Slice2D& s, int k) {
  require(k >= 0 && k < v.dims[2], errc::param_error, "slice index out of range");
  require(s.height == v.dims[1] && s.width == v.dims[0], errc::dim_mismatch,
          "slice dims do not match volume");
  for (int y = 0; y < v.dims[1]; ++y)
    for (int x = 0; x < v.dims[0]; ++x) v.at(x, y, k) = s.at(y, x);
}

// Axial slice k of a volume: row = y, col = x.
inline Slice2D extract_slice(const Volume3D& v, int k) {
  require(k >= 0 && k < v.dims[2], errc::param_error, "slice index out of range");
  Slice2D s;
  s.height = v.dims[1];
  s.width = v.dims[0];
  s.slice_index = k;
  s.modality = v.modality;
  s.subject_id = v.subject_id;
  s.data.resize(s.size());
  for (int y = 0; y < v.dims[1]; ++y)
    for (int x = 0; x < v.dims[0]; ++x) s.at(y, x) = v.at(x, y, k);
  return s;
}

// ---------------------------------------------------------------------------
// Embeddings and feature maps
// ---------------------------------------------------------------------------

struct EmbeddingItem {
  std::vector<double> vector;
  Modality modality = Modality::T1;
  std::string subject_id;
  int slice_index = 0;
};

struct EmbeddingBatch {
  int dim = 0;
  std::vector<EmbeddingItem> items;

  void validate() const {
    require(dim > 0, errc::param_error, "embedding dim must be positive");
    for (std::size_t i = 0; i < items.size(); ++i)
      require(static_cast<int>(items[i].vector.size()) == dim, errc::format_error,
              "embedding item " + std::to_string(i) + " has wrong vector length");
  }
};

// One resolution level of an intermediate feature stack, (c, h, w) row-major
// with w fastest.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

// Intermediate feature maps ordered coarse-to-fine.
struct FeatureMapSet {
  std::vector<FeatureMap> levels;
};

}  // namespace syntheval
