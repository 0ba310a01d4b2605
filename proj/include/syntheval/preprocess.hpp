#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "syntheval/error.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

struct ResampleSpec {
  std::array<double, 3> target_spacing{1.0, 1.0, 1.0};  // mm
  enum class Interp { Trilinear };
  Interp interpolation = Interp::Trilinear;
};

struct ResizeSpec {
  int height = 224;
  int width = 224;
  enum class Interp { Bilinear };
  Interp interpolation = Interp::Bilinear;
};

namespace detail {

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

// Edge-clamped bilinear sample at continuous (row, col) index coordinates.
inline double sample_bilinear(const Slice2D& s, double row, double col) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;
  const int r0c = clamp_index(r0, s.height), r1c = clamp_index(r0 + 1, s.height);
  const int c0c = clamp_index(c0, s.width), c1c = clamp_index(c0 + 1, s.width);
  const double v00 = s.at(r0c, c0c), v01 = s.at(r0c, c1c);
  const double v10 = s.at(r1c, c0c), v11 = s.at(r1c, c1c);
  return (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) + fr * ((1.0 - fc) * v10 + fc * v11);
}

// Edge-clamped trilinear sample at continuous (x, y, z) index coordinates.
inline double sample_trilinear(const Volume3D& v, double x, double y, double z) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int z0 = static_cast<int>(std::floor(z));
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  const int xs[2] = {clamp_index(x0, v.dims[0]), clamp_index(x0 + 1, v.dims[0])};
  const int ys[2] = {clamp_index(y0, v.dims[1]), clamp_index(y0 + 1, v.dims[1])};
  const int zs[2] = {clamp_index(z0, v.dims[2]), clamp_index(z0 + 1, v.dims[2])};
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? fz : 1.0 - fz;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? fy : 1.0 - fy;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? fx : 1.0 - fx;
        acc += wx * wy * wz * v.at(xs[dx], ys[dy], zs[dz]);
      }
    }
  }
  return acc;
}

}  // namespace detail

// Resample to the target spacing with trilinear interpolation. Output size
// per axis is round(in_dim * in_spacing / target_spacing), half-up, minimum
// 1. Sampling uses the align-corners-false convention: output voxel center i
// maps to input index (i + 0.5) * (target / source) - 0.5, edge-clamped.
inline Volume3D resample(const Volume3D& v, const ResampleSpec& spec = {}) {
  v.validate();
  for (double t : spec.target_spacing)
    require(t > 0.0, errc::param_error, "target spacing must be positive");

  Volume3D out;
  out.modality = v.modality;
  out.subject_id = v.subject_id;
  out.intensity_range = v.intensity_range;
  out.spacing = spec.target_spacing;
  std::array<double, 3> scale{};
  for (int a = 0; a < 3; ++a) {
    out.dims[a] =
        std::max(1, detail::round_half_up(v.dims[a] * v.spacing[a] / spec.target_spacing[a]));
    scale[a] = spec.target_spacing[a] / v.spacing[a];
  }
  out.data.resize(out.voxel_count());
  for (int z = 0; z < out.dims[2]; ++z) {
    const double sz = (z + 0.5) * scale[2] - 0.5;
    for (int y = 0; y < out.dims[1]; ++y) {
      const double sy = (y + 0.5) * scale[1] - 0.5;
      for (int x = 0; x < out.dims[0]; ++x) {
        const double sx = (x + 0.5) * scale[0] - 0.5;
        out.at(x, y, z) = detail::sample_trilinear(v, sx, sy, sz);
      }
    }
  }
  return out;
}

// Bilinear resize with the align-corners-false convention, edge-clamped.
// Aspect ratio is not preserved; the slice is stretched to the target dims.
inline Slice2D resize_slice(const Slice2D& s, const ResizeSpec& spec = {}) {
  s.validate();
  require(spec.height > 0 && spec.width > 0, errc::param_error, "target dims must be positive");

  Slice2D out;
  out.height = spec.height;
  out.width = spec.width;
  out.slice_index = s.slice_index;
  out.modality = s.modality;
  out.subject_id = s.subject_id;
  out.data.resize(out.size());
  const double scale_r = static_cast<double>(s.height) / spec.height;
  const double scale_c = static_cast<double>(s.width) / spec.width;
  for (int r = 0; r < spec.height; ++r) {
    const double sr = (r + 0.5) * scale_r - 0.5;
    for (int c = 0; c < spec.width; ++c) {
      const double sc = (c + 0.5) * scale_c - 0.5;
      out.at(r, c) = detail::sample_bilinear(s, sr, sc);
    }
  }
  return out;
}

// Affine min-max mapping to [0, 1]. Constant input has no defined mapping.
inline Slice2D normalize(Slice2D s) {
  s.validate();
  const auto [lo_it, hi_it] = std::minmax_element(s.data.begin(), s.data.end());
  const double lo = *lo_it, hi = *hi_it;
  require(hi > lo, errc::degenerate_intensity, "cannot normalize constant slice");
  const double inv = 1.0 / (hi - lo);
  for (double& v : s.data) v = (v - lo) * inv;
  return s;
}

inline Volume3D normalize(Volume3D v) {
  v.validate();
  const auto [lo_it, hi_it] = std::minmax_element(v.data.begin(), v.data.end());
  const double lo = *lo_it, hi = *hi_it;
  require(hi > lo, errc::degenerate_intensity, "cannot normalize constant volume");
  const double inv = 1.0 / (hi - lo);
  for (double& x : v.data) x = (x - lo) * inv;
  v.intensity_range = {0.0, 1.0};
  return v;
}

}  // namespace syntheval
