#include <cmath>
#include <random>

#include "doctest.h"
#include "stlfmp/baselines.hpp"

using namespace stlfmp;

namespace {

// Ito-integral oracle: Qd = int_0^dt e^{A s} G G' e^{A' s} ds by fine
// Simpson quadrature with the exact matrix exponential of the DI drift
Mat qd_oracle(double dt) {
  Mat G = 0.02 * Mat::Identity(4, 4);
  auto expA = [](double s) {
    Mat E = Mat::Identity(4, 4);
    E(0, 2) = s;
    E(1, 3) = s;
    return E;
  };
  const int n = 4000;
  const double h = dt / n;
  Mat acc = Mat::Zero(4, 4);
  auto f = [&](double s) {
    const Mat E = expA(s);
    return Mat(E * G * G.transpose() * E.transpose());
  };
  for (int i = 0; i < n; ++i) {
    const double s0 = i * h;
    acc += (h / 6.0) * (f(s0) + 4.0 * f(s0 + 0.5 * h) + f(s0 + h));
  }
  return acc;
}

} // namespace

TEST_CASE("discretize_di: printed blocks and the Ito oracle") {
  const DiscreteLinearModel m = discretize_di(0.1);
  CHECK(m.A(0, 2) == doctest::Approx(0.1));
  CHECK(m.B(0, 0) == doctest::Approx(0.005));
  CHECK(m.Qd(0, 0) == doctest::Approx(4.01333333333e-5).epsilon(1e-8));
  CHECK((m.Qd - qd_oracle(0.1)).cwiseAbs().maxCoeff() <= 1e-10);
  // limits
  const DiscreteLinearModel tiny = discretize_di(1e-8);
  CHECK((tiny.A - Mat::Identity(4, 4)).norm() <= 1e-7);
  CHECK(tiny.Qd.norm() <= 1e-9);
}

TEST_CASE("stlcd: zero at k=0, monotone in N") {
  const double T = 8.0, delta = 1e-3;
  const auto p50 = stlcd_radii(discretize_di(T / 50), delta, 50);
  CHECK(p50.obstacle_radii.front() == doctest::Approx(0.0));
  CHECK(p50.goal_radii.front() == doctest::Approx(0.0));
  // two-path check of r_1 against a direct scalar computation
  const DiscreteLinearModel m = discretize_di(T / 50);
  const double lam = sym_eig_max(m.P * m.Qd * m.P.transpose());
  const double eta = delta / (2.0 * 51);
  CHECK(p50.obstacle_radii[1] ==
        doctest::Approx(std::sqrt(-2.0 * std::log(eta) * lam))
            .epsilon(1e-10));
  const auto p100 = stlcd_radii(discretize_di(T / 100), delta, 100);
  // at the shared final time the larger N is more conservative
  CHECK(p100.obstacle_radii.back() > p50.obstacle_radii.back());
}

TEST_CASE("dprt: closed form at k=1, plateau, Schur stability required") {
  const double T = 8.0, delta = 1e-3;
  const int N = 50;
  const DiscreteLinearModel m = discretize_di(T / N);
  const Mat K = dlqr_gain(m, Mat::Identity(4, 4), 0.1 * Mat::Identity(2, 2));
  const Mat Acl = m.A + m.B * K;
  CHECK(Acl.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
  const auto prof = dprt_radii(m, K, delta, N);
  CHECK(prof.obstacle_radii.front() == doctest::Approx(0.0));
  const double want =
      std::sqrt(chi2_quantile(4, 1.0 - delta / N)) *
      Eigen::JacobiSVD<Mat>(m.P * spd_sqrt(m.Qd)).singularValues()(0);
  CHECK(prof.obstacle_radii[1] == doctest::Approx(want).epsilon(1e-12));
  // geometric decay of the closed loop makes increments shrink
  const double inc_early = prof.obstacle_radii[5] - prof.obstacle_radii[4];
  const double inc_late =
      prof.obstacle_radii[N] - prof.obstacle_radii[N - 1];
  CHECK(inc_late < inc_early);
  CHECK_THROWS_AS(dprt_radii(m, Mat::Zero(2, 4), delta, N),
                  std::invalid_argument);
}

TEST_CASE("dprt: analytic radius dominates sampled boundary deviations") {
  // support-function property on a reduced sample budget (the acceptance
  // suite runs the full 1e5-sample version)
  const double delta = 1e-2;
  const int N = 20;
  const DiscreteLinearModel m = discretize_di(0.1);
  const Mat K = dlqr_gain(m, Mat::Identity(4, 4), 0.1 * Mat::Identity(2, 2));
  const auto prof = dprt_radii(m, K, delta, N);
  const Mat Acl = m.A + m.B * K;
  const Mat half = spd_sqrt(m.Qd);
  const double q = std::sqrt(chi2_quantile(4, 1.0 - delta / N));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int s = 0; s < 2000; ++s) {
    Vec e = Vec::Zero(4);
    for (int k = 0; k < N; ++k) {
      Vec d(4);
      for (int i = 0; i < 4; ++i) d[i] = g(rng);
      d *= q / d.norm(); // boundary of the confidence ball
      e = Acl * e + half * d;
    }
    worst = std::max(worst, (m.P * e).norm());
  }
  CHECK(worst <= prof.obstacle_radii[N] + 1e-12);
}

TEST_CASE("dlqr_gain: fixed point satisfies the discrete Riccati equation") {
  const DiscreteLinearModel m = discretize_di(0.1);
  const Mat Q = Mat::Identity(4, 4), R = 0.1 * Mat::Identity(2, 2);
  const Mat K = dlqr_gain(m, Q, R);
  // recover S from the gain: K = -(R + B'SB)^{-1} B'SA; verify via the
  // closed-loop Lyapunov form of the Riccati equation by re-iterating
  Mat S = Q;
  for (int it = 0; it < 5000; ++it) {
    const Mat Acl = m.A + m.B * K;
    const Mat Sn =
        symmetrize(Q + K.transpose() * R * K + Acl.transpose() * S * Acl);
    if ((Sn - S).norm() <= 1e-14) {
      S = Sn;
      break;
    }
    S = Sn;
  }
  const Mat K_back =
      -(R + m.B.transpose() * S * m.B).ldlt().solve(
          m.B.transpose() * S * m.A);
  CHECK((K_back - K).norm() <= 1e-8);
}
