#include "stlfmp/systems.hpp"

#include <cmath>
#include <random>

namespace stlfmp {

namespace {

constexpr double kBlowUpNorm = 1e7;

void check_finite(const Vec &x, int step, const char *what) {
  if (!x.allFinite() || x.norm() > kBlowUpNorm)
    throw BlowUpError(std::string(what) + ": state blew up at step " +
                      std::to_string(step));
}

Vec rk4_step(const SystemModel &sys, const Vec &x, const Vec &u, double t,
             double dt) {
  const Vec k1 = sys.drift(x, u, t);
  const Vec k2 = sys.drift(x + 0.5 * dt * k1, u, t + 0.5 * dt);
  const Vec k3 = sys.drift(x + 0.5 * dt * k2, u, t + 0.5 * dt);
  const Vec k4 = sys.drift(x + dt * k3, u, t + dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

Trajectory integrate_nominal(const SystemModel &sys, const Vec &x0,
                             const std::vector<Vec> &controls, double dt,
                             int N) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_nominal: dt <= 0");
  if (static_cast<int>(controls.size()) < N)
    throw std::invalid_argument("integrate_nominal: need N controls");
  Trajectory tr;
  tr.times.reserve(N + 1);
  tr.states.reserve(N + 1);
  tr.controls.assign(controls.begin(), controls.begin() + N);
  tr.times.push_back(0.0);
  tr.states.push_back(x0);
  Vec x = x0;
  for (int k = 0; k < N; ++k) {
    x = rk4_step(sys, x, controls[k], k * dt, dt);
    check_finite(x, k + 1, "integrate_nominal");
    tr.times.push_back((k + 1) * dt);
    tr.states.push_back(x);
  }
  return tr;
}

Trajectory simulate_sde(const SystemModel &sys, const Vec &x0,
                        const Policy &policy, double dt, int N,
                        std::uint64_t seed) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_sde: dt <= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int m = static_cast<int>(sys.G.cols());
  const double sq = std::sqrt(dt);
  Trajectory tr;
  tr.times.reserve(N + 1);
  tr.states.reserve(N + 1);
  tr.controls.reserve(N);
  tr.times.push_back(0.0);
  tr.states.push_back(x0);
  Vec x = x0;
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    const Vec u = policy(x, t);
    Vec xi(m);
    for (int j = 0; j < m; ++j) xi[j] = gauss(rng);
    x = x + dt * sys.drift(x, u, t) + sq * (sys.G * xi);
    check_finite(x, k + 1, "simulate_sde");
    tr.controls.push_back(u);
    tr.times.push_back((k + 1) * dt);
    tr.states.push_back(x);
  }
  return tr;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 over base + index
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace stlfmp
