// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ncdyn/quadrature.hpp"
#include "ncdyn/rng.hpp"
#include "test_helpers.hpp"

using namespace ncdyn;

namespace {

// Independent oracle: the weights are the unique solution of the moment
// system sum_k w_k k^m = K^{m+1} / (m+1), m = 0..K (exactness on monomials).
// Solved by rational Gaussian elimination -- a different route than the
// Lagrange-basis integration used by nc_weights.
std::vector<Rational> moment_system_weights(int order) {
  const int n = order + 1;
  std::vector<std::vector<Rational>> a(static_cast<std::size_t>(n),
                                       std::vector<Rational>(static_cast<std::size_t>(n + 1)));
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < n; ++k) {
      Rational pow(1);
      for (int p = 0; p < m; ++p) pow *= Rational(k);
      a[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = pow;
    }
    Rational rhs(1);
    for (int p = 0; p <= m; ++p) rhs *= Rational(order);
    a[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] = rhs / Rational(m + 1);
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    while (pivot < n && a[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(col)] == Rational(0)) ++pivot;
    REQUIRE(pivot < n);
    std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(pivot)]);
    for (int row = 0; row < n; ++row) {
      if (row == col) continue;
      Rational f = a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] /
                   a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
      for (int c2 = col; c2 <= n; ++c2) {
        a[static_cast<std::size_t>(row)][static_cast<std::size_t>(c2)] -=
            f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(c2)];
      }
    }
  }
  std::vector<Rational> w;
  for (int k = 0; k < n; ++k) {
    w.push_back(a[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] /
                a[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)]);
  }
  return w;
}

// Exact integral of a coefficient polynomial over [0, t].
double poly_integral(const std::vector<double>& coeffs, double t) {
  double acc = 0.0, tp = t;
  for (std::size_t p = 0; p < coeffs.size(); ++p) {
    acc += coeffs[p] * tp / static_cast<double>(p + 1);
    tp *= t;
  }
  return acc;
}

double poly_eval(const std::vector<double>& coeffs, double t) {
  double acc = 0.0, tp = 1.0;
  for (double c : coeffs) {
    acc += c * tp;
    tp *= t;
  }
  return acc;
}

}  // namespace

TEST_CASE("weights match frozen low-order rules") {
  SUBCASE("order 0 is the single unit weight") {
    NcWeights w = nc_weights(0);
    REQUIRE(w.exact.size() == 1);
    CHECK(w.exact[0] == Rational(1));
  }
  SUBCASE("order 1 is the trapezoid") {
    NcWeights w = nc_weights(1);
    CHECK(w.exact[0] == Rational(1, 2));
    CHECK(w.exact[1] == Rational(1, 2));
  }
  SUBCASE("order 2 is Simpson") {
    NcWeights w = nc_weights(2);
    CHECK(w.exact[0] == Rational(1, 3));
    CHECK(w.exact[1] == Rational(4, 3));
    CHECK(w.exact[2] == Rational(1, 3));
  }
  SUBCASE("order 4 is Boole") {
    NcWeights w = nc_weights(4);
    CHECK(w.exact[0] == Rational(14, 45));
    CHECK(w.exact[1] == Rational(64, 45));
    CHECK(w.exact[2] == Rational(24, 45));
    CHECK(w.exact[3] == Rational(64, 45));
    CHECK(w.exact[4] == Rational(14, 45));
  }
}

TEST_CASE("weights agree exactly with the moment-system oracle for K in [1,8]") {
  for (int order = 1; order <= 8; ++order) {
    NcWeights w = nc_weights(order);
    std::vector<Rational> oracle = moment_system_weights(order);
    REQUIRE(w.exact.size() == oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k) {
      INFO("order " << order << " node " << k);
      CHECK(w.exact[k] == oracle[k]);
    }
  }
}

TEST_CASE("weight symmetry and sum identities hold exactly") {
  for (int order = 1; order <= 8; ++order) {
    NcWeights w = nc_weights(order);
    Rational sum(0);
    for (int k = 0; k <= order; ++k) {
      sum += w.exact[static_cast<std::size_t>(k)];
      CHECK(w.exact[static_cast<std::size_t>(k)] == w.exact[static_cast<std::size_t>(order - k)]);
    }
    CHECK(sum == Rational(order));
  }
}

TEST_CASE("order cap") {
  CHECK_THROWS_AS(nc_weights(9), std::invalid_argument);
  CHECK_THROWS_AS(nc_weights(-1), std::invalid_argument);
}

TEST_CASE("nc_integrate basics") {
  SUBCASE("constant is exact for every order") {
    for (int order = 0; order <= 8; ++order) {
      NcWeights w = nc_weights(order);
      std::vector<double> values(static_cast<std::size_t>(order) + 1, 3.25);
      CHECK(nc_integrate(w, values, 2.0) == doctest::Approx(6.5).epsilon(1e-15));
    }
  }
  SUBCASE("linear with the trapezoid") {
    NcWeights w = nc_weights(1);
    std::vector<double> values{0.0, 1.0};  // v(t) = t on [0,1]
    CHECK(nc_integrate(w, values, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("quadratic with Simpson is exact") {
    NcWeights w = nc_weights(2);
    std::vector<double> values{0.0, 0.25, 1.0};  // v(t) = t^2 at {0, 1/2, 1}
    CHECK(nc_integrate(w, values, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("length mismatch") {
    NcWeights w = nc_weights(2);
    std::vector<double> values{1.0, 2.0};
    CHECK_THROWS_AS(nc_integrate(w, values, 1.0), std::invalid_argument);
  }
}

TEST_CASE("exact on random polynomials of degree <= K") {
  Rng rng(99);
  for (int order = 1; order <= 6; ++order) {
    NcWeights w = nc_weights(order);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> coeffs;
      for (int p = 0; p <= order; ++p) coeffs.push_back(rng.uniform(-1.0, 1.0));
      double t_span = rng.uniform(0.5, 2.0);
      std::vector<double> values;
      for (int k = 0; k <= order; ++k) values.push_back(poly_eval(coeffs, t_span * k / order));
      double est = nc_integrate(w, values, t_span);
      double exact = poly_integral(coeffs, t_span);
      CHECK(std::abs(est - exact) < 1e-12);
    }
  }
}

TEST_CASE("empirical convergence orders on a generic sine window") {
  // Window [a, a+T] with a = 0.7 keeps the low-order derivatives of sin away
  // from zero, so the generic single-interval orders are measurable.
  const double a = 0.7;
  auto curve = [a](double t) { return std::sin(a + t); };
  auto anti = [a](double t) { return -std::cos(a + t); };
  ConvergenceFit k0 = empirical_order(curve, anti, 0, 0.5);
  ConvergenceFit k1 = empirical_order(curve, anti, 1, 0.5);
  ConvergenceFit k2 = empirical_order(curve, anti, 2, 0.5);
  CHECK(std::abs(k0.slope - 2.0) < 0.3);
  CHECK(std::abs(k1.slope - 3.0) < 0.3);
  CHECK(k2.slope >= 4.5);
}

TEST_CASE("linear curves are integrated exactly for K >= 1") {
  auto curve = [](double t) { return 2.0 * t + 0.5; };
  auto anti = [](double t) { return t * t + 0.5 * t; };
  for (int order = 1; order <= 4; ++order) {
    ConvergenceFit fit = empirical_order(curve, anti, order, 1.0);
    for (double err : fit.errors) CHECK(err < 1e-14);
  }
}

TEST_CASE("error decreases with order on smooth curves at T = 1") {
  struct Curve {
    const char* name;
    double (*f)(double);
    double (*anti)(double);
  };
  const Curve curves[] = {
      {"sin", [](double t) { return std::sin(t); }, [](double t) { return -std::cos(t); }},
      {"exp", [](double t) { return std::exp(t); }, [](double t) { return std::exp(t); }},
      {"1/(1+t)", [](double t) { return 1.0 / (1.0 + t); }, [](double t) { return std::log(1.0 + t); }},
  };
  for (const Curve& c : curves) {
    double prev = 0.0;
    for (int order = 0; order <= 6; ++order) {
      NcWeights w = nc_weights(order);
      std::vector<double> values;
      for (int k = 0; k <= order; ++k) values.push_back(c.f(order == 0 ? 0.0 : static_cast<double>(k) / order));
      double err = std::abs(nc_integrate(w, values, 1.0) - (c.anti(1.0) - c.anti(0.0)));
      if (order > 0) {
        INFO(c.name << " order " << order);
        CHECK(err < prev);
      }
      prev = err;
    }
  }
}
