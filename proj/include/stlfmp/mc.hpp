#ifndef STLFMP_MC_HPP
#define STLFMP_MC_HPP

#include "stlfmp/pipeline.hpp"

namespace stlfmp {

struct McReport {
  int n_rollouts = 0;
  int n_satisfied = 0;
  int n_tube_exit = 0; // rollouts that left the tube at some step
  double p_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0; // Clopper-Pearson 95% on satisfaction
  double saturation_rate = 0.0;    // fraction of clamped policy evaluations
  double wall_time_s = 0.0;
};

/// Exact two-sided Clopper-Pearson interval for k successes out of n, by
/// bisection on the binomial tail probability.
std::pair<double, double> clopper_pearson(int k, int n,
                                          double confidence = 0.95);

/// Parallel seeded closed-loop rollouts of a synthesized pipeline output.
/// Each rollout is scored by Boolean evaluation of the original (uneroded)
/// formula on the rollout's own grid, and checked against the tube at
/// every step. Per-rollout seeds come from derive_seed(seed, index), so the
/// report is independent of thread scheduling.
McReport mc_validate(const PipelineOutput &out, const SystemModel &sys,
                     const FormulaPtr &formula, const Vec &x0, double T,
                     int n_rollouts, double sim_dt, std::uint64_t seed);

} // namespace stlfmp

#endif
