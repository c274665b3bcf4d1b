// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ncdyn {

namespace {

// Polynomial with rational coefficients, index = power.
using RPoly = std::vector<Rational>;

RPoly poly_mul(const RPoly& a, const RPoly& b) {
  RPoly out(a.size() + b.size() - 1, Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Integral of p over [0, upper], exact.
Rational poly_integral(const RPoly& p, std::int64_t upper) {
  Rational total(0);
  Rational u_pow(upper);  // upper^(k+1), built incrementally
  for (std::size_t k = 0; k < p.size(); ++k) {
    total += p[k] * u_pow / Rational(static_cast<std::int64_t>(k) + 1);
    u_pow *= Rational(upper);
  }
  return total;
}

}  // namespace

NcWeights nc_weights(int order) {
  if (order < 0) throw std::invalid_argument("nc_weights: negative order");
  if (order > kMaxNcOrder) {
    throw std::invalid_argument("nc_weights: order " + std::to_string(order) +
                                " exceeds cap " + std::to_string(kMaxNcOrder) +
                                " (equispaced rules degrade past this point)");
  }
  NcWeights w;
  w.order = order;
  if (order == 0) {
    w.exact = {Rational(1)};
    w.as_double = {1.0};
    return w;
  }
  // In node units s = t*K/T the k-th Lagrange basis is
  // l_k(s) = prod_{j != k} (s - j)/(k - j) and w^k = integral_0^K l_k(s) ds.
  for (int k = 0; k <= order; ++k) {
    RPoly numer{Rational(1)};
    Rational denom(1);
    for (int j = 0; j <= order; ++j) {
      if (j == k) continue;
      numer = poly_mul(numer, RPoly{Rational(-j), Rational(1)});
      denom *= Rational(k - j);
    }
    Rational wk = poly_integral(numer, order) / denom;
    w.exact.push_back(wk);
    w.as_double.push_back(wk.to_double());
  }
  return w;
}

double nc_integrate(const NcWeights& w, std::span<const double> values, double t_span) {
  if (static_cast<int>(values.size()) != w.node_count()) {
    throw std::invalid_argument("nc_integrate: expected " + std::to_string(w.node_count()) +
                                " values for order " + std::to_string(w.order) + ", got " +
                                std::to_string(values.size()));
  }
  if (!(t_span > 0.0)) throw std::invalid_argument("nc_integrate: non-positive span");
  if (w.order == 0) return t_span * values[0];
  double acc = 0.0;
  for (int k = 0; k <= w.order; ++k) acc += w.as_double[static_cast<std::size_t>(k)] * values[static_cast<std::size_t>(k)];
  return acc * t_span / static_cast<double>(w.order);
}

ConvergenceFit empirical_order(const std::function<double(double)>& curve,
                               const std::function<double(double)>& antiderivative, int order,
                               double t0) {
  NcWeights w = nc_weights(order);
  ConvergenceFit fit;
  for (int i = 0; i < 4; ++i) {
    double span = t0 / static_cast<double>(1 << i);
    std::vector<double> samples;
    for (int k = 0; k <= order; ++k) {
      double t = order == 0 ? 0.0 : span * k / order;
      samples.push_back(curve(t));
    }
    double est = nc_integrate(w, samples, span);
    double exact = antiderivative(span) - antiderivative(0.0);
    fit.spans[static_cast<std::size_t>(i)] = span;
    fit.errors[static_cast<std::size_t>(i)] = std::abs(est - exact);
  }
  // Least-squares slope of log(err) on log(span).
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < 4; ++i) {
    mx += std::log(fit.spans[static_cast<std::size_t>(i)]);
    my += std::log(fit.errors[static_cast<std::size_t>(i)]);
  }
  mx /= 4.0;
  my /= 4.0;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 4; ++i) {
    double dx = std::log(fit.spans[static_cast<std::size_t>(i)]) - mx;
    sxy += dx * (std::log(fit.errors[static_cast<std::size_t>(i)]) - my);
    sxx += dx * dx;
  }
  fit.slope = sxy / sxx;
  return fit;
}

}  // namespace ncdyn
