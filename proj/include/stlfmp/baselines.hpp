#ifndef STLFMP_BASELINES_HPP
#define STLFMP_BASELINES_HPP

#include "stlfmp/pipeline.hpp"

namespace stlfmp {

/// Exact zero-order-hold discretization of the planar double integrator,
/// including the integrated process-noise covariance Qd.
struct DiscreteLinearModel {
  Mat A, B, Qd;
  double dt = 0.0;
  Mat P; // position projection [I2 0]
};

DiscreteLinearModel discretize_di(double dt);

/// Infinite-horizon discrete LQR gain by fixed-point iteration on the
/// discrete Riccati equation. Returns K in u = K e convention (stabilizing,
/// minus sign folded in), so A + B K is Schur stable.
Mat dlqr_gain(const DiscreteLinearModel &m, const Mat &Q, const Mat &R);

/// Per-step constraint-tightening radii produced by a baseline scheme.
struct TighteningProfile {
  std::string scheme;
  double delta = 0.0;
  int N = 0;
  std::vector<double> times;
  std::vector<double> obstacle_radii; // tightening applied to obstacles
  std::vector<double> goal_radii;     // tightening applied to goal regions
};

/// Open-loop covariance propagation Sigma_{k+1} = A Sigma_k A' + Qd from
/// Sigma_0 = 0 with per-constraint risk allocation: eta = delta/(2(N+1))
/// for obstacles and delta/2 for goals, radius
/// r_k(eta) = sqrt(chi2_quantile(2, 1 - eta) * lambda_max(P Sigma_k P')).
TighteningProfile stlcd_radii(const DiscreteLinearModel &m, double delta,
                              int N);

/// Closed-loop discrete tube: with A_cl = A + B K and confidence level
/// 1 - delta/N per step,
/// r_k = sqrt(chi2_quantile(4, 1 - delta/N)) *
///       sum_{j=0}^{k-1} sigma_max(P A_cl^j Qd^{1/2}).
TighteningProfile dprt_radii(const DiscreteLinearModel &m, const Mat &K,
                             double delta, int N);

struct RolloutOutcome {
  Trajectory traj;
  bool satisfied = false;
  int replan_failures = 0;
};

/// Shrinking-horizon replanning without erosion: at each support step,
/// re-solve the deterministic problem from the observed state with the
/// already-executed prefix frozen, apply the first new input over the step
/// (holding the previous input when the replan fails), and advance the SDE
/// at resolution sim_dt. Scored against the original formula on the
/// rollout's own grid.
RolloutOutcome shmpc_rollout(const PipelineConfig &cfg, double sim_dt,
                             std::uint64_t seed);

/// Plan and track the original formula with zero erosion.
struct NonRobustPlan {
  PlanResult plan;
  GainSchedule schedule;
};

NonRobustPlan non_robust_plan(const PipelineConfig &cfg);

RolloutOutcome non_robust_rollout(const NonRobustPlan &np,
                                  const PipelineConfig &cfg, double sim_dt,
                                  std::uint64_t seed);

} // namespace stlfmp

#endif
