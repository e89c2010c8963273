#ifndef STLFMP_PLANNER_HPP
#define STLFMP_PLANNER_HPP

#include <string>

#include "stlfmp/stl.hpp"
#include "stlfmp/systems.hpp"

namespace stlfmp {

/// Deterministic surrogate STL trajectory optimization problem: minimize
/// the control energy subject to collocated dynamics, control bounds, and
/// smooth robustness of the (eroded, NNF) formula >= rho_min.
struct PlanProblem {
  SystemModel sys;
  FormulaPtr formula; // NNF, erosion already attached
  double T = 0.0;
  int N = 0; // support steps, grid spacing T/N
  Mat R_cost;
  Vec x0;
  double rho_min = 1e-3;
  std::vector<double> betas = {5.0, 20.0, 80.0}; // continuation schedule

  // Shrinking-horizon use: states x_0..x_m and controls u_0..u_{m-1} are
  // frozen to an observed history and only the suffix is optimized. Empty
  // means m = 0 and x0 alone pins the start.
  std::vector<Vec> prefix_states;
  std::vector<Vec> prefix_controls;

  bool dense_check = true; // 8x re-integration certification
  bool quick = false;      // reduced effort (replanning inner loops)

  void validate() const;
};

struct PlanResult {
  Trajectory nominal;
  double robustness_support = 0.0; // exact, on the support grid
  double robustness_dense = 0.0;   // exact, on the 8x re-integrated rollout
  double cost = 0.0;
  double defect_norm = 0.0; // max inf-norm over collocation defects
  double grad_norm = 0.0;   // projected gradient norm at termination
  int iterations = 0;
  bool feasible = false;
  bool dense_check_failed = false;
  std::string message;
};

/// Trapezoidal collocation defects d_k = x_{k+1} - x_k
/// - h/2 (f(x_k,u_k,t_k) + f(x_{k+1},u_k,t_{k+1})), one block per interval.
std::vector<Vec> collocation_defects(const PlanProblem &prob,
                                     const std::vector<Vec> &states,
                                     const std::vector<Vec> &controls);

/// Augmented-Lagrangian solve with projected L-BFGS inner iterations and
/// beta continuation, followed by exact robustness certification on the
/// support grid and on an 8x dense RK4 re-integration.
PlanResult solve_stlto(const PlanProblem &prob,
                       const Trajectory *guess = nullptr);

/// Max relative error between the analytic gradient of
/// cost + smooth robustness and central finite differences (h = 1e-6) at a
/// seeded random interior point.
double gradient_check(const PlanProblem &prob, std::uint64_t seed);

} // namespace stlfmp

#endif
