// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "ncdyn/rational.hpp"

namespace ncdyn {

// Closed Newton-Cotes coefficients {w^0..w^K} for K+1 equally spaced nodes
// t^k = k*T/K on [0, T]. The rule is (T/K) * sum_k w^k v(t^k); by
// construction it integrates polynomials of degree <= K exactly. K = 0 is
// the left-endpoint rule T * v(0).
//
// K is capped at 8: equispaced interpolation beyond that hits Runge's
// phenomenon (and K = 8 already has negative weights).
struct NcWeights {
  int order = 0;                  // K
  std::vector<Rational> exact;    // K+1 entries; {1} for K = 0
  std::vector<double> as_double;  // float renderings of `exact`

  int node_count() const { return order + 1; }
};

inline constexpr int kMaxNcOrder = 8;

// Derives the weights by exactly integrating each Lagrange basis polynomial
// in rational arithmetic. Throws std::invalid_argument for order > 8.
NcWeights nc_weights(int order);

// (T/K) * sum_k w^k values[k]  (T * values[0] for K = 0). `values` must have
// exactly order+1 entries.
double nc_integrate(const NcWeights& w, std::span<const double> values, double t_span);

struct ConvergenceFit {
  double slope = 0.0;                 // least-squares slope of log|err| vs log T
  std::array<double, 4> spans{};      // {T0, T0/2, T0/4, T0/8}
  std::array<double, 4> errors{};     // |estimate - exact| per span
};

// Measures the single-interval convergence order of the rule of order K on
// `curve` against its antiderivative. The window is [0, T] with T shrinking
// dyadically from t0.
ConvergenceFit empirical_order(const std::function<double(double)>& curve,
                               const std::function<double(double)>& antiderivative, int order,
                               double t0);

}  // namespace ncdyn
