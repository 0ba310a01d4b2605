#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "syntheval/error.hpp"
#include "syntheval/preprocess.hpp"
#include "syntheval/rng.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// Synthetic multi-modal volumes with known ground truth: axis-aligned
// ellipsoidal tissues on a soft background, shared geometry across
// modalities, modality-specific intensities, a shared low-frequency shading
// field, and an optional small high-contrast lesion with per-slice masks.
// Everything is a pure function of the spec.

struct PhantomSpec {
  std::array<int, 3> dims{96, 96, 24};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::uint64_t seed = 42;
  int n_structures = 6;
  bool lesion = true;

  void validate() const {
    require(dims[0] >= 16 && dims[1] >= 16 && dims[2] >= 4, errc::param_error,
            "phantom dims must be at least 16x16x4");
    require(n_structures >= 1 && n_structures <= 16, errc::param_error,
            "n_structures must be in [1, 16]");
  }
};

// Mean intensity per modality for one tissue class, before shading and
// normalization.
struct TissueProfile {
  double t1 = 0.0;
  double t1c = 0.0;
  double t2 = 0.0;

  double for_modality(Modality m) const {
    switch (m) {
      case Modality::T1: return t1;
      case Modality::T1c: return t1c;
      default: return t2;
    }
  }
};

struct TissueTable {
  std::vector<std::string> classes;        // per structure
  std::vector<TissueProfile> structures;   // per structure, jittered
  TissueProfile background;
  int lesion_index = -1;                   // index into structures, -1 if none
};

struct Phantom {
  std::map<Modality, Volume3D> volumes;  // T1, T1c, T2
  std::vector<Mask2D> lesion_masks;      // one per axial slice
  TissueTable tissues;
};

namespace phantom_detail {

struct Ellipsoid {
  std::array<double, 3> center;     // fractional coordinates
  std::array<double, 3> semi_axes;  // fractional
  bool contains(double fx, double fy, double fz) const {
    double acc = 0.0;
    const double d0 = (fx - center[0]) / semi_axes[0];
    const double d1 = (fy - center[1]) / semi_axes[1];
    const double d2 = (fz - center[2]) / semi_axes[2];
    acc = d0 * d0 + d1 * d1 + d2 * d2;
    return acc <= 1.0;
  }
};

// Base intensities per class. Contrast orderings anchored to how the
// modalities render tissue: fluid bright on T2, fat bright on T1, lesion
// enhanced on T1c. Jitter stays well below the smallest ordered gap. The
// extreme-intensity classes (fluid, fat, lesion) are kept small so that
// after min-max normalization most voxels sit well inside [0, 1].
inline TissueProfile class_profile(const std::string& cls) {
  if (cls == "fluid") return {0.10, 0.14, 0.88};
  if (cls == "fat") return {0.85, 0.80, 0.22};
  if (cls == "soft") return {0.52, 0.56, 0.50};
  if (cls == "muscle") return {0.42, 0.46, 0.40};
  if (cls == "lesion") return {0.50, 0.92, 0.68};
  return {0.38, 0.38, 0.42};  // background
}

}  // namespace phantom_detail

inline Phantom generate_phantom(const PhantomSpec& spec) {
  using phantom_detail::Ellipsoid;
  spec.validate();
  CounterRng rng(mix_seed(spec.seed, "phantom"));

  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];

  Phantom out;
  out.tissues.background = phantom_detail::class_profile("background");

  // Structure 0 is one large "head" ellipsoid so most of the field of view
  // is tissue; the rest are interior structures cycling through classes.
  std::vector<Ellipsoid> shapes;
  const char* cycle[4] = {"fluid", "fat", "muscle", "soft"};
  for (int i = 0; i < spec.n_structures; ++i) {
    Ellipsoid e;
    if (i == 0) {
      e.center = {0.5, 0.5, 0.5};
      e.semi_axes = {rng.next_uniform(0.40, 0.46), rng.next_uniform(0.40, 0.46),
                     rng.next_uniform(0.42, 0.48)};
      out.tissues.classes.push_back("soft");
    } else {
      e.center = {rng.next_uniform(0.28, 0.72), rng.next_uniform(0.28, 0.72),
                  rng.next_uniform(0.30, 0.70)};
      e.semi_axes = {rng.next_uniform(0.06, 0.14), rng.next_uniform(0.06, 0.14),
                     rng.next_uniform(0.08, 0.16)};
      out.tissues.classes.push_back(cycle[(i - 1) % 4]);
    }
    shapes.push_back(e);
    TissueProfile p = phantom_detail::class_profile(out.tissues.classes.back());
    p.t1 += rng.next_uniform(-0.03, 0.03);
    p.t1c += rng.next_uniform(-0.03, 0.03);
    p.t2 += rng.next_uniform(-0.03, 0.03);
    out.tissues.structures.push_back(p);
  }

  if (spec.lesion) {
    Ellipsoid e;
    e.center = {rng.next_uniform(0.38, 0.62), rng.next_uniform(0.38, 0.62),
                rng.next_uniform(0.40, 0.60)};
    e.semi_axes = {rng.next_uniform(0.05, 0.09), rng.next_uniform(0.05, 0.09),
                   rng.next_uniform(0.06, 0.11)};
    shapes.push_back(e);
    out.tissues.classes.push_back("lesion");
    TissueProfile p = phantom_detail::class_profile("lesion");
    p.t1 += rng.next_uniform(-0.03, 0.03);
    p.t1c += rng.next_uniform(-0.03, 0.03);
    p.t2 += rng.next_uniform(-0.03, 0.03);
    out.tissues.structures.push_back(p);
    out.tissues.lesion_index = static_cast<int>(out.tissues.structures.size()) - 1;
  }

  // Shared multiplicative shading field, one low-frequency cycle per axis.
  const double phase_xy = rng.next_uniform(0.0, 6.283185307179586);
  const double phase_z = rng.next_uniform(0.0, 6.283185307179586);
  auto shade = [&](double fx, double fy, double fz) {
    constexpr double kTau = 6.283185307179586;
    return 1.0 + 0.10 * std::sin(kTau * fx + phase_xy) * std::sin(kTau * fy + phase_xy) +
           0.05 * std::sin(kTau * fz + phase_z);
  };

  auto label_at = [&shapes](double fx, double fy, double fz) {
    int lab = -1;
    for (std::size_t s = 0; s < shapes.size(); ++s)
      if (shapes[s].contains(fx, fy, fz)) lab = static_cast<int>(s);
    return lab;
  };

  const std::string subject = "phantom-" + std::to_string(spec.seed);
  std::map<Modality, Volume3D> raw;
  for (Modality m : {Modality::T1, Modality::T1c, Modality::T2}) {
    Volume3D v;
    v.dims = spec.dims;
    v.spacing = spec.spacing;
    v.modality = m;
    v.subject_id = subject;
    v.data.resize(v.voxel_count());
    raw.emplace(m, std::move(v));
  }
  out.lesion_masks.resize(nz);
  for (int z = 0; z < nz; ++z) {
    Mask2D& mask = out.lesion_masks[z];
    mask.height = ny;
    mask.width = nx;
    mask.label_name = "lesion";
    mask.data.assign(mask.size(), 0);
  }

  // Intensities are painted with 2x2x2 subvoxel coverage so tissue
  // boundaries get a partial-volume blend rather than a hard step. The
  // lesion mask uses the voxel-center label.
  constexpr int kSub = 2;
  constexpr double kSubWeight = 1.0 / (kSub * kSub * kSub);
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        double acc_t1 = 0.0, acc_t1c = 0.0, acc_t2 = 0.0;
        for (int sz = 0; sz < kSub; ++sz)
          for (int sy = 0; sy < kSub; ++sy)
            for (int sx = 0; sx < kSub; ++sx) {
              const double fx = (x + (sx + 0.5) / kSub) / nx;
              const double fy = (y + (sy + 0.5) / kSub) / ny;
              const double fz = (z + (sz + 0.5) / kSub) / nz;
              const int lab = label_at(fx, fy, fz);
              const TissueProfile& p =
                  lab < 0 ? out.tissues.background : out.tissues.structures[lab];
              acc_t1 += p.t1;
              acc_t1c += p.t1c;
              acc_t2 += p.t2;
            }
        const double fx = (x + 0.5) / nx;
        const double fy = (y + 0.5) / ny;
        const double fz = (z + 0.5) / nz;
        const double s = shade(fx, fy, fz) * kSubWeight;
        raw.at(Modality::T1).at(x, y, z) = acc_t1 * s;
        raw.at(Modality::T1c).at(x, y, z) = acc_t1c * s;
        raw.at(Modality::T2).at(x, y, z) = acc_t2 * s;
        if (out.tissues.lesion_index >= 0 &&
            label_at(fx, fy, fz) == out.tissues.lesion_index)
          out.lesion_masks[z].data[static_cast<std::size_t>(y) * nx + x] = 1;
      }
    }
  }

  for (auto& [m, v] : raw) out.volumes.emplace(m, normalize(std::move(v)));
  return out;
}

// Labeled embeddings over the phantom's slices and modalities:
//   vector = slice_signal(slice) * slice_signal_scale
//          + modality_offset(modality) * modality_offset_scale
//          + gaussian noise * noise_scale.
// Slice signals and modality offsets are seeded unit vectors, so the two
// scale knobs directly control whether the batch clusters by slice or by
// modality.
inline EmbeddingBatch generate_embeddings(const PhantomSpec& spec, int dim,
                                          double slice_signal_scale,
                                          double modality_offset_scale,
                                          double noise_scale = 0.01) {
  spec.validate();
  require(dim >= 2, errc::param_error, "embedding dim must be at least 2");

  auto unit_vector = [dim](std::uint64_t seed) {
    CounterRng r(seed);
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
      x = r.next_gaussian();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  };

  const std::array<Modality, 3> mods{Modality::T1, Modality::T1c, Modality::T2};
  std::map<Modality, std::vector<double>> offsets;
  for (Modality m : mods)
    offsets[m] = unit_vector(mix_seed(spec.seed, "modality-offset",
                                      static_cast<std::uint64_t>(m)));

  CounterRng noise_rng(mix_seed(spec.seed, "embedding-noise"));
  const std::string subject = "phantom-" + std::to_string(spec.seed);

  EmbeddingBatch batch;
  batch.dim = dim;
  for (int k = 0; k < spec.dims[2]; ++k) {
    auto signal = unit_vector(mix_seed(spec.seed, "slice-signal", static_cast<std::uint64_t>(k)));
    for (Modality m : mods) {
      EmbeddingItem item;
      item.subject_id = subject;
      item.slice_index = k;
      item.modality = m;
      item.vector.resize(dim);
      for (int d = 0; d < dim; ++d)
        item.vector[d] = signal[d] * slice_signal_scale +
                         offsets[m][d] * modality_offset_scale +
                         noise_rng.next_gaussian() * noise_scale;
      batch.items.push_back(std::move(item));
    }
  }
  return batch;
}

}  // namespace syntheval
