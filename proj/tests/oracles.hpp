// Independent reference implementations used only by tests. Everything here
// is written as plain scalar loops, deliberately separate from the library's
// code paths, so agreement between the two is a meaningful check.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "syntheval/types.hpp"

namespace oracle {

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double psnr(const std::vector<double>& a, const std::vector<double>& b, double L) {
  double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(L * L / m);
}

// Whole-image SSIM with unbiased (N-1) variance/covariance.
inline double ssim_global(const std::vector<double>& a, const std::vector<double>& b,
                          double L, double k1 = 0.01, double k2 = 0.03) {
  const std::size_t n = a.size();
  double mu_a = 0.0, mu_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) mu_a += a[i];
  for (std::size_t i = 0; i < n; ++i) mu_b += b[i];
  mu_a /= static_cast<double>(n);
  mu_b /= static_cast<double>(n);
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var_a += (a[i] - mu_a) * (a[i] - mu_a);
    var_b += (b[i] - mu_b) * (b[i] - mu_b);
    cov += (a[i] - mu_a) * (b[i] - mu_b);
  }
  var_a /= static_cast<double>(n - 1);
  var_b /= static_cast<double>(n - 1);
  cov /= static_cast<double>(n - 1);
  const double c1 = (k1 * L) * (k1 * L);
  const double c2 = (k2 * L) * (k2 * L);
  return ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
         ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

inline double dice(const std::vector<std::uint8_t>& p, const std::vector<std::uint8_t>& g) {
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && g[i]) ++inter;
    if (p[i]) ++np;
    if (g[i]) ++ng;
  }
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

inline double accuracy(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  return static_cast<double>(tp + tn) / static_cast<double>(tp + tn + fp + fn);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Naive double-loop InfoNCE over a labeled batch: for every anchor, every
// positive contributes -log(exp(s_ip/tau) / sum_{a != i} exp(s_ia/tau)),
// averaged over that anchor's positives and summed over anchors. No
// vectorization, no max-subtraction.
inline double infonce(const syntheval::EmbeddingBatch& batch, double tau, bool normalize) {
  const std::size_t n = batch.items.size();
  std::vector<std::vector<double>> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = batch.items[i].vector;
    if (normalize) {
      double norm = 0.0;
      for (double v : z[i]) norm += v * v;
      norm = std::sqrt(norm);
      for (double& v : z[i]) v /= norm;
    }
  }
  auto sim = [&](std::size_t i, std::size_t j) {
    double d = 0.0;
    for (std::size_t k = 0; k < z[i].size(); ++k) d += z[i][k] * z[j][k];
    return d;
  };
  auto is_positive = [&](std::size_t i, std::size_t j) {
    const auto& a = batch.items[i];
    const auto& b = batch.items[j];
    return a.subject_id == b.subject_id && a.slice_index == b.slice_index &&
           a.modality != b.modality;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> positives;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && is_positive(i, j)) positives.push_back(j);
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) denom += std::exp(sim(i, a) / tau);
    double anchor = 0.0;
    for (std::size_t p : positives) anchor += std::log(std::exp(sim(i, p) / tau) / denom);
    total += -anchor / static_cast<double>(positives.size());
  }
  return total;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// eigenvalues in descending order with matching eigenvectors as rows.
struct EighResult {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};

inline EighResult jacobi_eigh(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

  EighResult r;
  r.values.resize(n);
  r.vectors.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    r.values[i] = a[order[i]][order[i]];
    for (std::size_t k = 0; k < n; ++k) r.vectors[i][k] = v[k][order[i]];
  }
  return r;
}

// --- test-data helpers (std::mt19937_64, independent of the library RNG) ---

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                         double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline syntheval::Slice2D random_slice(std::mt19937_64& rng, int h, int w) {
  syntheval::Slice2D s;
  s.height = h;
  s.width = w;
  s.data = random_values(rng, static_cast<std::size_t>(h) * w);
  return s;
}

inline syntheval::Mask2D random_mask(std::mt19937_64& rng, int h, int w, double p_on = 0.4) {
  syntheval::Mask2D m;
  m.height = h;
  m.width = w;
  m.label_name = "test";
  m.data.resize(static_cast<std::size_t>(h) * w);
  std::bernoulli_distribution dist(p_on);
  for (auto& v : m.data) v = dist(rng) ? 1 : 0;
  return m;
}

}  // namespace oracle
