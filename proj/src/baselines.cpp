#include "stlfmp/baselines.hpp"

#include <cmath>
#include <random>

namespace stlfmp {

DiscreteLinearModel discretize_di(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("discretize_di: dt <= 0");
  DiscreteLinearModel m;
  m.dt = dt;
  m.A = Mat::Identity(4, 4);
  m.A(0, 2) = dt;
  m.A(1, 3) = dt;
  m.B = Mat::Zero(4, 2);
  m.B(0, 0) = 0.5 * dt * dt;
  m.B(1, 1) = 0.5 * dt * dt;
  m.B(2, 0) = dt;
  m.B(3, 1) = dt;
  // exact covariance of int_0^dt e^{A(dt-s)} G dW_s with G = 0.02 I4
  const double g2 = 0.02 * 0.02;
  m.Qd = Mat::Zero(4, 4);
  const double q_pp = g2 * (dt + dt * dt * dt / 3.0);
  const double q_pv = g2 * dt * dt / 2.0;
  const double q_vv = g2 * dt;
  m.Qd(0, 0) = q_pp;
  m.Qd(1, 1) = q_pp;
  m.Qd(2, 2) = q_vv;
  m.Qd(3, 3) = q_vv;
  m.Qd(0, 2) = m.Qd(2, 0) = q_pv;
  m.Qd(1, 3) = m.Qd(3, 1) = q_pv;
  m.P = Mat::Zero(2, 4);
  m.P(0, 0) = 1.0;
  m.P(1, 1) = 1.0;
  return m;
}

Mat dlqr_gain(const DiscreteLinearModel &m, const Mat &Q, const Mat &R) {
  Mat S = Q;
  for (int it = 0; it < 10000; ++it) {
    const Mat BtSB = m.B.transpose() * S * m.B;
    const Mat gain = (R + BtSB).ldlt().solve(m.B.transpose() * S * m.A);
    const Mat Sn = symmetrize(Q + m.A.transpose() * S * (m.A - m.B * gain));
    const double diff = (Sn - S).norm();
    S = Sn;
    if (diff <= 1e-12 * (1.0 + S.norm())) break;
  }
  const Mat BtSB = m.B.transpose() * S * m.B;
  return -(R + BtSB).ldlt().solve(m.B.transpose() * S * m.A);
}

TighteningProfile stlcd_radii(const DiscreteLinearModel &m, double delta,
                              int N) {
  if (!(delta > 0.0 && delta < 1.0) || N < 1)
    throw std::invalid_argument("stlcd_radii: bad delta or N");
  TighteningProfile out;
  out.scheme = "stlcd";
  out.delta = delta;
  out.N = N;
  const double eta_obs = delta / (2.0 * (N + 1));
  const double eta_goal = delta / 2.0;
  const double q_obs = chi2_quantile(2, 1.0 - eta_obs);
  const double q_goal = chi2_quantile(2, 1.0 - eta_goal);
  Mat Sigma = Mat::Zero(4, 4);
  for (int k = 0; k <= N; ++k) {
    out.times.push_back(k * m.dt);
    const double lam = sym_eig_max(m.P * Sigma * m.P.transpose());
    out.obstacle_radii.push_back(std::sqrt(q_obs * lam));
    out.goal_radii.push_back(std::sqrt(q_goal * lam));
    Sigma = symmetrize(m.A * Sigma * m.A.transpose() + m.Qd);
  }
  return out;
}

TighteningProfile dprt_radii(const DiscreteLinearModel &m, const Mat &K,
                             double delta, int N) {
  if (!(delta > 0.0 && delta < 1.0) || N < 1)
    throw std::invalid_argument("dprt_radii: bad delta or N");
  TighteningProfile out;
  out.scheme = "dprt";
  out.delta = delta;
  out.N = N;
  const Mat A_cl = m.A + m.B * K;
  if (A_cl.eigenvalues().cwiseAbs().maxCoeff() >= 1.0)
    throw std::invalid_argument("dprt_radii: A + B K is not Schur stable");
  const double q = chi2_quantile(4, 1.0 - delta / N);
  const Mat Qd_half = spd_sqrt(m.Qd);
  double acc = 0.0;
  Mat power = Mat::Identity(4, 4); // A_cl^j
  for (int k = 0; k <= N; ++k) {
    out.times.push_back(k * m.dt);
    const double r = std::sqrt(q) * acc;
    out.obstacle_radii.push_back(r);
    out.goal_radii.push_back(r);
    acc += Eigen::JacobiSVD<Mat>(m.P * power * Qd_half).singularValues()(0);
    power = A_cl * power;
  }
  return out;
}

namespace {

PlanProblem baseline_problem(const PipelineConfig &cfg,
                             const FormulaPtr &task) {
  PlanProblem p;
  p.sys = cfg.sys;
  p.formula = task;
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

} // namespace

RolloutOutcome shmpc_rollout(const PipelineConfig &cfg, double sim_dt,
                             std::uint64_t seed) {
  const FormulaPtr task = to_nnf(cfg.formula);
  const int N = cfg.N;
  const double h = cfg.T / N;
  const int sub = std::max(1, static_cast<int>(std::round(h / sim_dt)));
  const double dts = h / sub;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  RolloutOutcome out;
  Vec x = cfg.x0;
  out.traj.times.push_back(0.0);
  out.traj.states.push_back(x);

  std::vector<Vec> obs_states{x};
  std::vector<Vec> obs_controls;
  Trajectory warm;
  bool have_warm = false;
  Vec prev_u = cfg.sys.clamp_control(Vec::Zero(cfg.sys.p));

  for (int k = 0; k < N; ++k) {
    PlanProblem prob = baseline_problem(cfg, task);
    prob.betas = {cfg.betas.back()};
    prob.quick = true;
    prob.dense_check = false;
    prob.prefix_states = obs_states;
    prob.prefix_controls = obs_controls;

    Vec u = prev_u;
    try {
      const PlanResult res =
          solve_stlto(prob, have_warm ? &warm : nullptr);
      // accept replans with loose tolerances: the rollout itself decides
      if (res.defect_norm <= 1e-4 && res.robustness_support >= 0.0) {
        u = res.nominal.controls[k];
        warm = res.nominal;
        have_warm = true;
      } else {
        ++out.replan_failures;
      }
    } catch (const std::exception &) {
      ++out.replan_failures;
    }
    u = cfg.sys.clamp_control(u);

    for (int j = 0; j < sub; ++j) {
      const double t = k * h + j * dts;
      Vec xi(cfg.sys.G.cols());
      for (int i = 0; i < xi.size(); ++i) xi[i] = gauss(rng);
      x += cfg.sys.drift(x, u, t) * dts + std::sqrt(dts) * (cfg.sys.G * xi);
      out.traj.times.push_back(t + dts);
      out.traj.states.push_back(x);
      out.traj.controls.push_back(u);
    }
    obs_states.push_back(x);
    obs_controls.push_back(u);
    prev_u = u;
  }

  SampledSignal sig;
  sig.times = out.traj.times;
  sig.states = out.traj.states;
  out.satisfied = eval_boolean_dense(task, sig);
  return out;
}

NonRobustPlan non_robust_plan(const PipelineConfig &cfg) {
  const FormulaPtr task = to_nnf(cfg.formula);
  NonRobustPlan np;
  np.plan = solve_stlto(baseline_problem(cfg, task));
  if (!np.plan.feasible)
    throw std::runtime_error("non_robust_plan: planner failed: " +
                             np.plan.message);
  const int n = cfg.sys.n, p = cfg.sys.p;
  const Mat Q = cfg.Q.size() > 0 ? cfg.Q : Mat(Mat::Identity(n, n));
  const Mat R = cfg.R.size() > 0 ? cfg.R : Mat(0.1 * Mat::Identity(p, p));
  const Mat Qf = cfg.Qf.size() > 0 ? cfg.Qf : Mat(10.0 * Mat::Identity(n, n));
  np.schedule = tvlqr_synthesize(cfg.sys, np.plan.nominal, Q, R, Qf);
  return np;
}

RolloutOutcome non_robust_rollout(const NonRobustPlan &np,
                                  const PipelineConfig &cfg, double sim_dt,
                                  std::uint64_t seed) {
  RolloutOutcome out;
  const Policy pol = make_policy(np.schedule, np.plan.nominal, cfg.sys);
  const int steps = static_cast<int>(std::round(cfg.T / sim_dt));
  out.traj =
      simulate_sde(cfg.sys, cfg.x0, pol, cfg.T / steps, steps, seed);
  SampledSignal sig;
  sig.times = out.traj.times;
  sig.states = out.traj.states;
  out.satisfied = eval_boolean_dense(to_nnf(cfg.formula), sig);
  return out;
}

} // namespace stlfmp
