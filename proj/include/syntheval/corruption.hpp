#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include "syntheval/error.hpp"
#include "syntheval/preprocess.hpp"
#include "syntheval/rng.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// The four corruption families of the robustness protocol, each
// deterministic given its seed, each clamping its output to [0, 1].

enum class CorruptionFamily { MotionArtifact, DownSampling, GaussianNoise, RicianNoise };
enum class Severity { Minor, Moderate, Severe };

inline const char* family_name(CorruptionFamily f) {
  switch (f) {
    case CorruptionFamily::MotionArtifact: return "motion";
    case CorruptionFamily::DownSampling: return "downsample";
    case CorruptionFamily::GaussianNoise: return "gaussian";
    case CorruptionFamily::RicianNoise: return "rician";
  }
  return "?";
}

inline const char* severity_name(Severity s) {
  switch (s) {
    case Severity::Minor: return "minor";
    case Severity::Moderate: return "moderate";
    case Severity::Severe: return "severe";
  }
  return "?";
}

inline CorruptionFamily parse_family(const std::string& s) {
  for (auto f : {CorruptionFamily::MotionArtifact, CorruptionFamily::DownSampling,
                 CorruptionFamily::GaussianNoise, CorruptionFamily::RicianNoise})
    if (s == family_name(f)) return f;
  fail(errc::param_error, "unknown corruption family '" + s + "'");
}

inline Severity parse_severity(const std::string& s) {
  for (auto v : {Severity::Minor, Severity::Moderate, Severity::Severe})
    if (s == severity_name(v)) return v;
  fail(errc::param_error, "unknown severity '" + s + "'");
}

// Resolved per-family parameters. Only the fields of the active family are
// meaningful.
struct CorruptionParams {
  double sigma = 0.0;          // gaussian / rician
  int factor = 0;              // downsample
  double line_fraction = 0.0;  // motion
  double max_shift_px = 0.0;   // motion
};

// Severity defaults, calibrated so corrupted-input PSNR magnitudes on the
// standard phantom land in the expected regime for each level (e.g. severe
// gaussian: sigma = 10^(-14.5/20) ~ 0.19 puts PSNR near 14.5 dB).
inline CorruptionParams severity_default(CorruptionFamily family, Severity severity) {
  const int s = static_cast<int>(severity);
  CorruptionParams p;
  switch (family) {
    case CorruptionFamily::GaussianNoise: {
      constexpr double sigmas[3] = {0.035, 0.10, 0.19};
      p.sigma = sigmas[s];
      break;
    }
    case CorruptionFamily::RicianNoise: {
      constexpr double sigmas[3] = {0.03, 0.10, 0.22};
      p.sigma = sigmas[s];
      break;
    }
    case CorruptionFamily::DownSampling: {
      constexpr int factors[3] = {2, 4, 8};
      p.factor = factors[s];
      break;
    }
    case CorruptionFamily::MotionArtifact: {
      constexpr double fracs[3] = {0.05, 0.15, 0.30};
      constexpr double shifts[3] = {1.0, 3.0, 6.0};
      p.line_fraction = fracs[s];
      p.max_shift_px = shifts[s];
      break;
    }
  }
  return p;
}

// A fully specified corruption: family, severity, optional parameter
// override, seed.
struct CorruptionSpec {
  CorruptionFamily family = CorruptionFamily::GaussianNoise;
  Severity severity = Severity::Moderate;
  bool has_override = false;
  CorruptionParams override_params;
  std::uint64_t seed = 0;

  CorruptionParams resolved() const {
    return has_override ? override_params : severity_default(family, severity);
  }
};

namespace corruption_detail {

inline Slice2D clamped(Slice2D s) {
  for (double& v : s.data) v = std::clamp(v, 0.0, 1.0);
  return s;
}

// FFTW plan creation is not thread-safe; executing distinct plans is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

inline void fft2d(std::vector<std::complex<double>>& buf, int h, int w, bool inverse) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(buf.data()),
                            reinterpret_cast<fftw_complex*>(buf.data()),
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  require(plan != nullptr, errc::internal_error, "fftw plan creation failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  if (inverse) {
    const double scale = 1.0 / (static_cast<double>(h) * w);
    for (auto& v : buf) v *= scale;
  }
}

}  // namespace corruption_detail

// Additive white Gaussian noise, clamped to [0, 1]. sigma = 0 is the exact
// identity limit.
inline Slice2D corrupt_gaussian(const Slice2D& s, double sigma, std::uint64_t seed) {
  s.validate();
  require(sigma >= 0.0, errc::param_error, "sigma must be non-negative");
  if (sigma == 0.0) return s;
  Slice2D out = s;
  CounterRng rng(seed);
  for (double& v : out.data) v += sigma * rng.next_gaussian();
  return corruption_detail::clamped(std::move(out));
}

// Magnitude of the signal plus complex Gaussian noise:
// |s + n_re + i*n_im| with n_re, n_im ~ N(0, sigma^2) per channel. Biased
// upward in dark regions (Rayleigh mean sigma*sqrt(pi/2) at zero signal).
inline Slice2D corrupt_rician(const Slice2D& s, double sigma, std::uint64_t seed) {
  s.validate();
  require(sigma >= 0.0, errc::param_error, "sigma must be non-negative");
  if (sigma == 0.0) return s;
  Slice2D out = s;
  CounterRng rng(seed);
  for (double& v : out.data) {
    const double re = v + sigma * rng.next_gaussian();
    const double im = sigma * rng.next_gaussian();
    v = std::hypot(re, im);
  }
  return corruption_detail::clamped(std::move(out));
}

// Bilinear decimation to (h/factor, w/factor), then bilinear upsampling back
// to the original dims.
inline Slice2D corrupt_downsample(const Slice2D& s, int factor) {
  s.validate();
  require(factor >= 1, errc::param_error, "factor must be >= 1");
  require(factor <= std::min(s.height, s.width) / 4, errc::param_error,
          "factor " + std::to_string(factor) + " too large for " + std::to_string(s.height) +
              "x" + std::to_string(s.width) + " slice");
  if (factor == 1) return s;
  ResizeSpec down;
  down.height = std::max(1, s.height / factor);
  down.width = std::max(1, s.width / factor);
  ResizeSpec up;
  up.height = s.height;
  up.width = s.width;
  return resize_slice(resize_slice(s, down), up);
}

// k-space line-replacement motion model. A seeded subset of
// floor(line_fraction * h) phase-encode rows (never the DC row) is replaced
// by the same rows of the k-space of a translated copy of the slice; the
// translation is drawn uniformly in [-max_shift, max_shift]^2 per corrupted
// row and applied as a linear phase ramp. Inverse FFT, real part, clamp.
inline Slice2D corrupt_motion(const Slice2D& s, double line_fraction, double max_shift_px,
                              std::uint64_t seed) {
  s.validate();
  require(line_fraction >= 0.0 && line_fraction < 1.0, errc::param_error,
          "line_fraction must be in [0, 1)");
  require(max_shift_px >= 0.0, errc::param_error, "max_shift must be non-negative");

  const int h = s.height, w = s.width;
  const int n_corrupt = static_cast<int>(std::floor(line_fraction * h));
  if (n_corrupt == 0) return s;

  CounterRng rng(seed);

  // Sample n_corrupt distinct rows from {1, ..., h-1} by partial
  // Fisher-Yates, then corrupt them in ascending order.
  std::vector<int> rows(h - 1);
  std::iota(rows.begin(), rows.end(), 1);
  for (int i = 0; i < n_corrupt && i < h - 1; ++i) {
    const int j = i + static_cast<int>(rng.next_unit() * (rows.size() - i));
    std::swap(rows[i], rows[j]);
  }
  rows.resize(std::min<std::size_t>(n_corrupt, rows.size()));
  std::sort(rows.begin(), rows.end());

  std::vector<std::complex<double>> k(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < s.data.size(); ++i) k[i] = s.data[i];
  corruption_detail::fft2d(k, h, w, false);

  constexpr double kTau = 6.283185307179586476925286766559;
  for (int r : rows) {
    const double dx = rng.next_uniform(-max_shift_px, max_shift_px);
    const double dy = rng.next_uniform(-max_shift_px, max_shift_px);
    const int ky = r <= h / 2 ? r : r - h;  // signed frequency of this row
    for (int c = 0; c < w; ++c) {
      const int kx = c <= w / 2 ? c : c - w;
      const double phase = -kTau * (kx * dx / w + ky * dy / h);
      k[static_cast<std::size_t>(r) * w + c] *= std::complex<double>(std::cos(phase),
                                                                     std::sin(phase));
    }
  }

  corruption_detail::fft2d(k, h, w, true);
  Slice2D out = s;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = k[i].real();
  return corruption_detail::clamped(std::move(out));
}

// Dispatch on the spec. The effective seed is spec.seed XOR the slice index
// (the documented per-slice split rule), so corrupting a stack with one
// spec gives every slice independent noise while staying reproducible.
inline Slice2D apply(const CorruptionSpec& spec, const Slice2D& s) {
  const CorruptionParams p = spec.resolved();
  const std::uint64_t seed = spec.seed ^ static_cast<std::uint64_t>(s.slice_index);
  switch (spec.family) {
    case CorruptionFamily::GaussianNoise: return corrupt_gaussian(s, p.sigma, seed);
    case CorruptionFamily::RicianNoise: return corrupt_rician(s, p.sigma, seed);
    case CorruptionFamily::DownSampling: return corrupt_downsample(s, p.factor);
    case CorruptionFamily::MotionArtifact:
      return corrupt_motion(s, p.line_fraction, p.max_shift_px, seed);
  }
  fail(errc::internal_error, "unreachable corruption family");
}

}  // namespace syntheval
