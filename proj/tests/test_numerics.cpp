#include <cmath>
#include <random>

#include "doctest.h"
#include "stlfmp/numerics.hpp"

using namespace stlfmp;

namespace {

// independent chi-square CDF: Simpson integration of the density after the
// substitution t = u^2, which removes the dof = 1 endpoint singularity
double chi2_cdf_oracle(int dof, double x) {
  if (x <= 0.0) return 0.0;
  const double k2 = dof / 2.0;
  const double log_norm = -k2 * std::log(2.0) - std::lgamma(k2);
  auto g = [&](double u) {
    if (u <= 0.0) return dof == 1 ? 2.0 * std::exp(log_norm) : 0.0;
    return 2.0 *
           std::exp(log_norm + (dof - 1.0) * std::log(u) - 0.5 * u * u);
  };
  const int n = 20000;
  const double b = std::sqrt(x), h = b / n;
  double s = g(0.0) + g(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * h);
  return s * h / 3.0;
}

Mat random_spd(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return Mat(A * A.transpose() + 0.1 * Mat::Identity(n, n));
}

} // namespace

TEST_CASE("chi2 quantile: dof 2 closed form") {
  for (double q : {0.5, 0.9, 0.99, 0.999, 0.9999})
    CHECK(chi2_quantile(2, q) ==
          doctest::Approx(-2.0 * std::log(1.0 - q)).epsilon(1e-10));
}

TEST_CASE("chi2 quantile: independent CDF oracle") {
  for (int dof : {1, 2, 4, 8}) {
    for (double q : {0.5, 0.9, 0.99, 0.999}) {
      const double x = chi2_quantile(dof, q);
      CHECK(chi2_cdf_oracle(dof, x) == doctest::Approx(q).epsilon(1e-8));
    }
  }
}

TEST_CASE("gamma_p: error-function identity for dof 1") {
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0})
    CHECK(gamma_p(0.5, x) ==
          doctest::Approx(std::erf(std::sqrt(x))).epsilon(1e-12));
}

TEST_CASE("quadrature: smooth integrals") {
  CHECK(quadrature([](double t) { return std::sin(t); }, 0.0, M_PI, 2000) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(quadrature([](double t) { return std::exp(-t); }, 0.0, 3.0, 2000) ==
        doctest::Approx(1.0 - std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("spd helpers: sqrt, inverse, inv_sqrt") {
  const Mat M = random_spd(5, 7);
  const Mat R = spd_sqrt(M);
  CHECK((R * R - M).norm() <= 1e-10 * M.norm());
  CHECK((spd_inverse(M) * M - Mat::Identity(5, 5)).norm() <= 1e-10);
  const Mat Ri = spd_inv_sqrt(M);
  CHECK((Ri * M * Ri - Mat::Identity(5, 5)).norm() <= 1e-9);
}

TEST_CASE("sym_eig bounds") {
  const Mat M = random_spd(6, 11);
  const auto [vals, vecs] = sym_eig(M);
  CHECK(sym_eig_max(M) == doctest::Approx(vals.maxCoeff()));
  CHECK(sym_eig_min(M) == doctest::Approx(vals.minCoeff()));
  CHECK((vecs * vals.asDiagonal() * vecs.transpose() - M).norm() <=
        1e-10 * M.norm());
}
