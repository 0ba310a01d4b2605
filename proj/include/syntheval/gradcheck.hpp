#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace syntheval {

// Central finite differences (f(x+h) - f(x-h)) / 2h on a scalar function of
// a flat parameter vector, float64 throughout.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::vector<double> x,
    double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + h;
    const double fp = f(x);
    x[k] = orig - h;
    const double fm = f(x);
    x[k] = orig;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Max relative error between analytic and numeric gradients:
// max_k |a_k - n_k| / max(floor, max_j |n_j|).
struct GradCheckResult {
  double max_rel_error = 0.0;
  bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
};

inline GradCheckResult compare_gradients(std::span<const double> analytic,
                                         std::span<const double> numeric,
                                         double floor = 1e-6) {
  double scale = floor;
  for (double v : numeric) scale = std::max(scale, std::fabs(v));
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k)
    worst = std::max(worst, std::fabs(analytic[k] - numeric[k]) / scale);
  return {worst};
}

}  // namespace syntheval
