#include "stlfmp/mc.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace stlfmp {

namespace {

// log of the upper binomial tail P(X >= k) for X ~ Bin(n, p), summed
// directly in linear space with log-space terms (the tail is short when k
// is near n; callers pick the short side).
double binom_upper_tail(int n, int k, double p) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  double lt = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
              std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq;
  double sum = std::exp(lt);
  for (int i = k + 1; i <= n; ++i) {
    lt += std::log(static_cast<double>(n - i + 1) / i) + lp - lq;
    sum += std::exp(lt);
    if (std::exp(lt) < 1e-18 * sum) break;
  }
  return std::min(1.0, sum);
}

double binom_lower_tail(int n, int k, double p) {
  return 1.0 - binom_upper_tail(n, k + 1, p);
}

} // namespace

std::pair<double, double> clopper_pearson(int k, int n, double confidence) {
  if (n < 1 || k < 0 || k > n)
    throw std::invalid_argument("clopper_pearson: bad k or n");
  const double alpha = 1.0 - confidence;
  double lo = 0.0, hi = 1.0;
  if (k > 0) {
    // largest p with P(X >= k; p) <= alpha/2 (monotone increasing in p)
    double a = 0.0, b = static_cast<double>(k) / n;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (binom_upper_tail(n, k, mid) <= 0.5 * alpha)
        a = mid;
      else
        b = mid;
    }
    lo = 0.5 * (a + b);
  }
  if (k < n) {
    // smallest p with P(X <= k; p) <= alpha/2 (monotone decreasing in p)
    double a = static_cast<double>(k) / n, b = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (binom_lower_tail(n, k, mid) <= 0.5 * alpha)
        b = mid;
      else
        a = mid;
    }
    hi = 0.5 * (a + b);
  }
  return {lo, hi};
}

McReport mc_validate(const PipelineOutput &out, const SystemModel &sys,
                     const FormulaPtr &formula, const Vec &x0, double T,
                     int n_rollouts, double sim_dt, std::uint64_t seed) {
  if (n_rollouts < 1)
    throw std::invalid_argument("mc_validate: n_rollouts < 1");
  const auto t_start = std::chrono::steady_clock::now();
  const FormulaPtr task = to_nnf(formula);
  const int steps = std::max(1, static_cast<int>(std::round(T / sim_dt)));
  const double dt = T / steps;

  // nominal interpolation for tube-exit checks
  const Trajectory &nom = out.plan.nominal;
  auto nominal_at = [&](double t) -> Vec {
    if (t <= nom.times.front()) return nom.states.front();
    if (t >= nom.times.back()) return nom.states.back();
    const auto it =
        std::upper_bound(nom.times.begin(), nom.times.end(), t);
    const size_t k = it - nom.times.begin();
    const double a =
        (t - nom.times[k - 1]) / (nom.times[k] - nom.times[k - 1]);
    return (1.0 - a) * nom.states[k - 1] + a * nom.states[k];
  };

  SaturationStats stats;
  const Policy pol = make_policy(out.schedule, nom, sys, &stats);

  std::vector<std::uint8_t> sat(n_rollouts, 0), exited(n_rollouts, 0);
  const unsigned n_threads =
      std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_rollouts) return;
      const Trajectory traj =
          simulate_sde(sys, x0, pol, dt, steps, derive_seed(seed, i));
      SampledSignal sig;
      sig.times = traj.times;
      sig.states = traj.states;
      sat[i] = eval_boolean_dense(task, sig) ? 1 : 0;
      for (size_t k = 0; k < traj.times.size(); ++k) {
        const double t = traj.times[k];
        const Vec e = traj.states[k] - nominal_at(t);
        const Mat M = out.tube.M_at(t);
        const double r = out.tube.radius_at(t);
        if (std::sqrt(std::max(0.0, e.dot(M * e))) > r + 1e-12) {
          exited[i] = 1;
          break;
        }
      }
    }
  };
  for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker);
  for (auto &th : pool) th.join();

  McReport rep;
  rep.n_rollouts = n_rollouts;
  for (int i = 0; i < n_rollouts; ++i) {
    rep.n_satisfied += sat[i];
    rep.n_tube_exit += exited[i];
  }
  rep.p_hat = static_cast<double>(rep.n_satisfied) / n_rollouts;
  std::tie(rep.ci_lo, rep.ci_hi) =
      clopper_pearson(rep.n_satisfied, n_rollouts);
  rep.saturation_rate = stats.fraction();
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    t_start)
          .count();
  return rep;
}

} // namespace stlfmp
