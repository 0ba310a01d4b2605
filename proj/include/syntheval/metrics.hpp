#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "syntheval/error.hpp"
#include "syntheval/types.hpp"

namespace syntheval {

// Stabilization constants and SSIM evaluation mode. Global mode evaluates
// the SSIM formula once with whole-image statistics (unbiased N-1
// variance/covariance); Windowed mode averages it over Gaussian-weighted
// local windows, the convention most reported SSIM numbers use.
struct MetricContext {
  double L = 1.0;  // max possible intensity after normalization
  double k1 = 0.01;
  double k2 = 0.03;
  enum class SsimMode { Global, Windowed };
  SsimMode ssim_mode = SsimMode::Global;
  int window = 11;
  double gaussian_sigma = 1.5;

  double c1() const { return (k1 * L) * (k1 * L); }
  double c2() const { return (k2 * L) * (k2 * L); }
};

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

namespace detail {
inline void require_same_dims(const Slice2D& a, const Slice2D& b) {
  require(a.height == b.height && a.width == b.width, errc::dim_mismatch,
          "slice dimensions differ: " + std::to_string(a.height) + "x" +
              std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
              std::to_string(b.width));
}
}  // namespace detail

inline double mse(const Slice2D& ref, const Slice2D& syn) {
  detail::require_same_dims(ref, syn);
  double acc = 0.0;
  const std::size_t n = ref.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = ref.data[i] - syn.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

// 10*log10(L^2 / MSE); identical inputs yield the +infinity sentinel
// (serialized as "inf" in reports).
inline double psnr(const Slice2D& ref, const Slice2D& syn, const MetricContext& ctx = {}) {
  const double m = mse(ref, syn);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ctx.L * ctx.L / m);
}

namespace detail {

inline double ssim_term(double mu_a, double mu_b, double var_a, double var_b, double cov,
                        double c1, double c2) {
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

inline double ssim_global(const Slice2D& ref, const Slice2D& syn, const MetricContext& ctx) {
  const std::size_t n = ref.size();
  require(n >= 2, errc::param_error, "global SSIM needs at least 2 pixels");
  const double mu_a =
      std::accumulate(ref.data.begin(), ref.data.end(), 0.0) / static_cast<double>(n);
  const double mu_b =
      std::accumulate(syn.data.begin(), syn.data.end(), 0.0) / static_cast<double>(n);
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ref.data[i] - mu_a;
    const double db = syn.data[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  const double denom = static_cast<double>(n - 1);
  return ssim_term(mu_a, mu_b, var_a / denom, var_b / denom, cov / denom, ctx.c1(), ctx.c2());
}

inline double ssim_windowed(const Slice2D& ref, const Slice2D& syn, const MetricContext& ctx) {
  const int win = ctx.window;
  require(ref.height >= win && ref.width >= win, errc::param_error,
          "window larger than image");
  // Normalized Gaussian window.
  std::vector<double> weights(static_cast<std::size_t>(win) * win);
  const int half = win / 2;
  double wsum = 0.0;
  for (int r = 0; r < win; ++r)
    for (int c = 0; c < win; ++c) {
      const double dr = r - half, dc = c - half;
      const double w =
          std::exp(-(dr * dr + dc * dc) / (2.0 * ctx.gaussian_sigma * ctx.gaussian_sigma));
      weights[static_cast<std::size_t>(r) * win + c] = w;
      wsum += w;
    }
  for (double& w : weights) w /= wsum;

  // Weighted local moments over fully interior windows.
  double acc = 0.0;
  std::size_t count = 0;
  for (int r0 = 0; r0 + win <= ref.height; ++r0) {
    for (int c0 = 0; c0 + win <= ref.width; ++c0) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int r = 0; r < win; ++r)
        for (int c = 0; c < win; ++c) {
          const double w = weights[static_cast<std::size_t>(r) * win + c];
          mu_a += w * ref.at(r0 + r, c0 + c);
          mu_b += w * syn.at(r0 + r, c0 + c);
        }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int r = 0; r < win; ++r)
        for (int c = 0; c < win; ++c) {
          const double w = weights[static_cast<std::size_t>(r) * win + c];
          const double da = ref.at(r0 + r, c0 + c) - mu_a;
          const double db = syn.at(r0 + r, c0 + c) - mu_b;
          var_a += w * da * da;
          var_b += w * db * db;
          cov += w * da * db;
        }
      acc += ssim_term(mu_a, mu_b, var_a, var_b, cov, ctx.c1(), ctx.c2());
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace detail

inline double ssim(const Slice2D& ref, const Slice2D& syn, const MetricContext& ctx = {}) {
  detail::require_same_dims(ref, syn);
  if (ref.data == syn.data) return 1.0;  // exact by definition for identical inputs
  return ctx.ssim_mode == MetricContext::SsimMode::Global ? detail::ssim_global(ref, syn, ctx)
                                                          : detail::ssim_windowed(ref, syn, ctx);
}

// 2|P AND G| / (|P| + |G|). Both masks empty is undefined and reported as
// null upstream, never as 0 or 1.
inline double dice(const Mask2D& p, const Mask2D& g) {
  require(p.height == g.height && p.width == g.width, errc::dim_mismatch,
          "mask dimensions differ");
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    if (p.data[i] && g.data[i]) ++inter;
    np += p.data[i];
    ng += g.data[i];
  }
  require(np + ng > 0, errc::undefined_dice, "dice undefined for two empty masks");
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

inline double accuracy(const ConfusionCounts& c) {
  require(c.total() > 0, errc::undefined_accuracy, "accuracy undefined for zero total");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), errc::dim_mismatch, "vector lengths differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, errc::degenerate_vector,
          "cosine similarity undefined for zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace syntheval
