#include "stlfmp/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace stlfmp {

namespace {

PlanProblem base_problem(const PipelineConfig &cfg) {
  PlanProblem p;
  p.sys = cfg.sys;
  p.T = cfg.T;
  p.N = cfg.N;
  p.R_cost = cfg.R_cost.size() > 0
                 ? cfg.R_cost
                 : Mat(0.1 * Mat::Identity(cfg.sys.p, cfg.sys.p));
  p.x0 = cfg.x0;
  p.rho_min = cfg.rho_min;
  p.betas = cfg.betas;
  return p;
}

GainSchedule synthesize_along(const PipelineConfig &cfg,
                              const Trajectory &nominal) {
  if (cfg.controller == ControllerType::Tvlqr) {
    const int n = cfg.sys.n, pdim = cfg.sys.p;
    const Mat Q = cfg.Q.size() > 0 ? cfg.Q : Mat(Mat::Identity(n, n));
    const Mat R =
        cfg.R.size() > 0 ? cfg.R : Mat(0.1 * Mat::Identity(pdim, pdim));
    const Mat Qf =
        cfg.Qf.size() > 0 ? cfg.Qf : Mat(10.0 * Mat::Identity(n, n));
    return tvlqr_synthesize(cfg.sys, nominal, Q, R, Qf);
  }
  return tvccm_synthesize(cfg.sys, nominal, cfg.tvccm);
}

} // namespace

void PipelineConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("pipeline: delta must be in (0,1)");
  if (max_iters < 1)
    throw std::invalid_argument("pipeline: max_iters >= 1 required");
  if (!formula) throw std::invalid_argument("pipeline: missing formula");
  if (controller == ControllerType::TvccmGlobal &&
      (region_lo.size() != sys.n || region_hi.size() != sys.n))
    throw std::invalid_argument(
        "pipeline: trajectory-independent branch needs a state region");
}

PipelineOutput run_pipeline(const PipelineConfig &cfg) {
  cfg.validate();
  const FormulaPtr task = to_nnf(cfg.formula);
  PipelineOutput out;
  const double eps = cfg.optimize_eps
                         ? optimize_epsilon(cfg.sys.n, cfg.delta, cfg.T,
                                            cfg.dt_split)
                         : cfg.epsilon;
  out.epsilon = eps;

  if (cfg.controller == ControllerType::TvccmGlobal) {
    // one-shot branch: nominal-independent Euclidean erosion
    GainSchedule sched =
        tvccm_synthesize_global(cfg.sys, cfg.region_lo, cfg.region_hi,
                                cfg.tvccm);
    auto [tubeM, r_euc] =
        global_tvccm_radius(cfg.tvccm.c, cfg.sys.sigma, cfg.sys.n, cfg.delta,
                            cfg.T, cfg.dt_split, eps, sched.beta_bar);
    // report the tube in Euclidean units so downstream checks are direct
    TubeProfile tube = tubeM;
    for (auto &r : tube.radii) r *= std::sqrt(sched.beta_bar);

    PlanProblem prob = base_problem(cfg);
    prob.formula = erode_formula_constant(task, r_euc);
    out.plan = solve_stlto(prob);
    out.schedule = std::move(sched);
    out.tube = std::move(tube);
    out.erosion_times = {0.0, cfg.T};
    out.erosion_radii = {r_euc, r_euc};
    out.iterations = 1;
    const TvccmReport rep = tvccm_verify(out.schedule);
    out.converged = out.plan.feasible && rep.feasible;
    out.message = out.converged
                      ? "converged"
                      : (out.plan.feasible ? "tvccm verification failed"
                                           : out.plan.message);
    return out;
  }

  // iterative branch: alternate planning and certification
  std::vector<double> times(cfg.N + 1);
  for (int k = 0; k <= cfg.N; ++k) times[k] = cfg.T * k / cfg.N;
  std::vector<double> planned(cfg.N + 1, 0.0);
  const Trajectory *warm = nullptr;
  Trajectory prev;

  for (int it = 0; it < cfg.max_iters; ++it) {
    ErosionSchedule sched;
    sched.times = times;
    sched.radii = planned;
    if (cfg.time_invariant_erosion)
      sched = ErosionSchedule::constant(sched.max_radius());
    PlanProblem prob = base_problem(cfg);
    try {
      prob.formula = erode_formula_with(task, sched);
    } catch (const InfeasibleErosionError &e) {
      out.iterations = it + 1;
      out.message = std::string("erosion infeasible: ") + e.what();
      out.erosion_times = times;
      out.erosion_radii = planned;
      return out;
    }
    out.plan = solve_stlto(prob, warm);
    out.erosion_times = times;
    out.erosion_radii = planned;
    out.iterations = it + 1;
    if (!out.plan.feasible) {
      out.message = "planner failed at iteration " + std::to_string(it + 1) +
                    ": " + out.plan.message;
      return out;
    }
    prev = out.plan.nominal;
    warm = &prev;

    out.schedule = synthesize_along(cfg, out.plan.nominal);
    out.tube = tube_radius_profile(out.schedule.certificate, cfg.sys.sigma,
                                   cfg.sys.n, cfg.delta, cfg.T, cfg.dt_split,
                                   eps);

    PipelineIteration trace;
    trace.times = times;
    trace.planned = planned;
    trace.certified.resize(times.size());
    double max_slack = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < times.size(); ++k) {
      const double rM = out.tube.radius_at(times[k]);
      const Mat M = out.tube.M_at(times[k]);
      trace.certified[k] = projected_radius(M, rM, cfg.sys.P);
      max_slack = std::max(max_slack, trace.certified[k] - planned[k]);
    }
    trace.max_slack = max_slack;
    out.trace.push_back(trace);

    if (max_slack <= 1e-9) {
      out.converged = true;
      out.message = "converged";
      return out;
    }
    // grow the erosion monotonically with a little headroom: planning with
    // more erosion than the certificate requires is always safe, and the
    // padded running max keeps the iteration from cycling when the
    // certified radii wobble with the nominal
    for (size_t k = 0; k < planned.size(); ++k)
      planned[k] = std::max(planned[k], 1.1 * trace.certified[k]);
  }
  out.message = "max iterations reached without erosion domination";
  return out;
}

} // namespace stlfmp
