// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ncdyn/rng.hpp"
#include "ncdyn/tensor.hpp"

namespace ncdyn::testing {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite differences of a scalar-valued function of a flat parameter
// vector. The oracle path for every gradient check.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> theta,
    double step = 1e-5) {
  std::vector<double> grad(theta.size(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double keep = theta[i];
    theta[i] = keep + step;
    double hi = f(theta);
    theta[i] = keep - step;
    double lo = f(theta);
    theta[i] = keep;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// Max relative error between analytic and reference gradients, with an
// absolute floor so near-zero entries compare sanely.
inline double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& reference,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double scale = std::max({std::abs(analytic[i]), std::abs(reference[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - reference[i]) / scale);
  }
  return worst;
}

// Random 3x3 rotation (det +1) via Gram-Schmidt on Gaussian columns.
inline std::vector<double> random_rotation(Rng& rng) {
  auto dot = [](const double* a, const double* b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
  double c[3][3];
  for (;;) {
    for (auto& row : c)
      for (double& x : row) x = rng.normal();
    // Orthonormalize columns.
    double u0[3] = {c[0][0], c[1][0], c[2][0]};
    double n0 = std::sqrt(dot(u0, u0));
    if (n0 < 1e-6) continue;
    for (double& x : u0) x /= n0;
    double v1[3] = {c[0][1], c[1][1], c[2][1]};
    double p = dot(v1, u0);
    double u1[3] = {v1[0] - p * u0[0], v1[1] - p * u0[1], v1[2] - p * u0[2]};
    double n1 = std::sqrt(dot(u1, u1));
    if (n1 < 1e-6) continue;
    for (double& x : u1) x /= n1;
    // u2 = u0 x u1 gives det +1.
    double u2[3] = {u0[1] * u1[2] - u0[2] * u1[1], u0[2] * u1[0] - u0[0] * u1[2],
                    u0[0] * u1[1] - u0[1] * u1[0]};
    return {u0[0], u1[0], u2[0], u0[1], u1[1], u2[1], u0[2], u1[2], u2[2]};
  }
}

// y = R x for row-major R.
inline void rotate3(const std::vector<double>& r, const double* x, double* y) {
  for (int i = 0; i < 3; ++i) y[i] = r[3 * i] * x[0] + r[3 * i + 1] * x[1] + r[3 * i + 2] * x[2];
}

}  // namespace ncdyn::testing
