#include <cmath>
#include <random>

#include "doctest.h"
#include "stlfmp/systems.hpp"

using namespace stlfmp;

namespace {

void check_jacobians(const SystemModel &sys, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.7, 0.7);
  for (int trial = 0; trial < 5; ++trial) {
    Vec x(sys.n), u(sys.p);
    for (int i = 0; i < sys.n; ++i) x[i] = uni(rng);
    for (int i = 0; i < sys.p; ++i)
      u[i] = 0.5 * (sys.u_lo[i] + sys.u_hi[i]) +
             0.25 * uni(rng) * (sys.u_hi[i] - sys.u_lo[i]);
    const double t = 0.3;
    const auto [A, B] = sys.jacobians(x, u, t);
    const double h = 1e-6;
    for (int j = 0; j < sys.n; ++j) {
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vec col =
          (sys.drift(xp, u, t) - sys.drift(xm, u, t)) / (2.0 * h);
      CHECK((col - A.col(j)).norm() <= 1e-6 * (1.0 + col.norm()));
    }
    for (int j = 0; j < sys.p; ++j) {
      Vec up = u, um = u;
      up[j] += h;
      um[j] -= h;
      const Vec col =
          (sys.drift(x, up, t) - sys.drift(x, um, t)) / (2.0 * h);
      CHECK((col - B.col(j)).norm() <= 1e-6 * (1.0 + col.norm()));
    }
  }
}

} // namespace

TEST_CASE("benchmark systems: analytic Jacobians match finite differences") {
  for (const char *name :
       {"double_integrator", "dubins", "pvtol", "quadrotor3d", "unicycle"}) {
    const SystemModel sys = make_system(name);
    CAPTURE(name);
    check_jacobians(sys, 42);
    CHECK(sys.sigma > 0.0);
    CHECK(sys.P.rows() >= 2);
    CHECK(sys.P.cols() == sys.n);
  }
}

TEST_CASE("make_system: control bound overrides") {
  const SystemModel sys =
      make_system("double_integrator", {{"u_lo_0", -1.0}, {"u_hi_0", 1.0}});
  CHECK(sys.u_lo[0] == doctest::Approx(-1.0));
  CHECK(sys.u_hi[0] == doctest::Approx(1.0));
  CHECK(sys.u_lo[1] == doctest::Approx(-3.0));
}

TEST_CASE("integrate_nominal: double integrator closed form") {
  const SystemModel sys = make_system("double_integrator");
  Vec x0 = Vec::Zero(4);
  Vec u(2);
  u << 1.0, -0.5;
  const int N = 100;
  const double dt = 0.01;
  const Trajectory traj =
      integrate_nominal(sys, x0, std::vector<Vec>(N, u), dt, N);
  const double T = N * dt;
  // constant acceleration: p = a T^2 / 2, v = a T (RK4 exact on polynomials)
  CHECK(traj.states.back()[0] == doctest::Approx(0.5 * T * T).epsilon(1e-10));
  CHECK(traj.states.back()[3] == doctest::Approx(-0.5 * T).epsilon(1e-10));
}

TEST_CASE("simulate_sde: seeded determinism and seed derivation") {
  const SystemModel sys = make_system("unicycle");
  const Vec x0 = Vec::Zero(3);
  Vec u(2);
  u << 0.5, 0.2;
  const Policy pol = [&](const Vec &, double) { return u; };
  const Trajectory a = simulate_sde(sys, x0, pol, 0.01, 100, 99);
  const Trajectory b = simulate_sde(sys, x0, pol, 0.01, 100, 99);
  const Trajectory c = simulate_sde(sys, x0, pol, 0.01, 100, 100);
  for (size_t k = 0; k < a.states.size(); ++k)
    CHECK((a.states[k] - b.states[k]).norm() == 0.0);
  CHECK((a.states.back() - c.states.back()).norm() > 0.0);
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("blow-up detection") {
  SystemModel sys = make_system("double_integrator");
  sys.drift = [](const Vec &x, const Vec &, double) {
    return Vec(100.0 * x + Vec::Ones(4));
  };
  CHECK_THROWS_AS(integrate_nominal(sys, Vec::Ones(4),
                                    std::vector<Vec>(200, Vec::Zero(2)), 0.1,
                                    200),
                  BlowUpError);
}

TEST_CASE("unicycle diffusion matches the calibrated covariance") {
  const SystemModel sys = make_system("unicycle");
  CHECK(sys.G(0, 0) == doctest::Approx(0.0091).epsilon(1e-9));
  CHECK(sys.G(1, 1) == doctest::Approx(0.0093).epsilon(1e-9));
  CHECK(sys.G(2, 2) == doctest::Approx(0.0214).epsilon(1e-9));
  CHECK(sys.G(0, 1) == doctest::Approx(0.0001).epsilon(1e-9));
  CHECK(sys.sigma * sys.sigma >= sym_eig_max(sys.G * sys.G.transpose()));
}
