#include "stlfmp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <cstdio>
#include <cstdlib>

namespace stlfmp {

namespace {

struct Layout {
  int n, p, N;
  int m = 0; // states x_0..x_m and controls u_0..u_{m-1} are frozen
  int dim() const { return (N - m) * (n + p); }
  int xoff(int k) const { return (k - m - 1) * n; }             // k = m+1..N
  int uoff(int k) const { return (N - m) * n + (k - m) * p; }   // k = m..N-1
};

struct Point {
  std::vector<Vec> states;   // x_0..x_N (x_0..x_m pinned)
  std::vector<Vec> controls; // u_0..u_{N-1}
};

Point unpack(const PlanProblem &prob, const Layout &L, const Vec &z) {
  Point pt;
  pt.states.resize(L.N + 1);
  pt.controls.resize(L.N);
  pt.states[0] = prob.x0;
  for (int k = 0; k <= L.m && k < static_cast<int>(prob.prefix_states.size());
       ++k)
    pt.states[k] = prob.prefix_states[k];
  for (int k = 0; k < L.m; ++k) pt.controls[k] = prob.prefix_controls[k];
  for (int k = L.m + 1; k <= L.N; ++k)
    pt.states[k] = z.segment(L.xoff(k), L.n);
  for (int k = L.m; k < L.N; ++k)
    pt.controls[k] = z.segment(L.uoff(k), L.p);
  return pt;
}

Vec pack(const Layout &L, const Point &pt) {
  Vec z(L.dim());
  for (int k = L.m + 1; k <= L.N; ++k)
    z.segment(L.xoff(k), L.n) = pt.states[k];
  for (int k = L.m; k < L.N; ++k)
    z.segment(L.uoff(k), L.p) = pt.controls[k];
  return z;
}

Vec project_box(const PlanProblem &prob, const Layout &L, Vec z) {
  for (int k = L.m; k < L.N; ++k)
    z.segment(L.uoff(k), L.p) = z.segment(L.uoff(k), L.p)
                                    .cwiseMax(prob.sys.u_lo)
                                    .cwiseMin(prob.sys.u_hi);
  return z;
}

SampledSignal make_signal(const PlanProblem &prob, const Point &pt) {
  SampledSignal sig;
  const double h = prob.T / prob.N;
  for (int k = 0; k <= prob.N; ++k) {
    sig.times.push_back(k * h);
    sig.states.push_back(pt.states[k]);
  }
  return sig;
}

struct Multipliers {
  std::vector<Vec> lam_d; // one per defect block
  double lam_g = 0.0;
  double mu_d = 10.0;
  double mu_g = 10.0;
};

struct EvalOut {
  double value = 0.0;
  Vec grad;
  double defect_norm = 0.0;
  double smooth_rob = 0.0;
  double cost = 0.0;
};

EvalOut eval_lagrangian(const PlanProblem &prob, const Layout &L,
                        const FormulaPtr &f, double beta, const Vec &z,
                        const Multipliers &mult) {
  EvalOut out;
  out.grad = Vec::Zero(L.dim());
  const Point pt = unpack(prob, L, z);
  const double h = prob.T / prob.N;

  for (int k = 0; k < L.N; ++k) {
    const Vec &u = pt.controls[k];
    out.cost += h * u.dot(prob.R_cost * u);
    if (k >= L.m)
      out.grad.segment(L.uoff(k), L.p) += 2.0 * h * (prob.R_cost * u);
  }
  out.value += out.cost;

  for (int k = L.m; k < L.N; ++k) {
    const double t0 = k * h, t1 = (k + 1) * h;
    const Vec f0 = prob.sys.drift(pt.states[k], pt.controls[k], t0);
    const Vec f1 = prob.sys.drift(pt.states[k + 1], pt.controls[k], t1);
    const Vec d = pt.states[k + 1] - pt.states[k] - 0.5 * h * (f0 + f1);
    out.defect_norm = std::max(out.defect_norm, d.lpNorm<Eigen::Infinity>());
    const Vec w = mult.lam_d[k] + mult.mu_d * d;
    out.value += mult.lam_d[k].dot(d) + 0.5 * mult.mu_d * d.squaredNorm();
    const auto [A0, B0] = prob.sys.jacobians(pt.states[k], pt.controls[k], t0);
    const auto [A1, B1] =
        prob.sys.jacobians(pt.states[k + 1], pt.controls[k], t1);
    if (k > L.m)
      out.grad.segment(L.xoff(k), L.n) +=
          (-Mat::Identity(L.n, L.n) - 0.5 * h * A0).transpose() * w;
    out.grad.segment(L.xoff(k + 1), L.n) +=
        (Mat::Identity(L.n, L.n) - 0.5 * h * A1).transpose() * w;
    out.grad.segment(L.uoff(k), L.p) +=
        (-0.5 * h * (B0 + B1)).transpose() * w;
  }

  const SampledSignal sig = make_signal(prob, pt);
  const SmoothRobustness sr = smooth_robustness(f, sig, 0, beta);
  out.smooth_rob = sr.value;
  const double g = sr.value - prob.rho_min;
  const double slack = std::max(0.0, mult.lam_g - mult.mu_g * g);
  out.value += (slack * slack - mult.lam_g * mult.lam_g) / (2.0 * mult.mu_g);
  if (slack > 0.0)
    for (int k = L.m + 1; k <= L.N; ++k)
      out.grad.segment(L.xoff(k), L.n) += -slack * sr.grad[k];
  return out;
}

// projected L-BFGS with Armijo backtracking
struct InnerResult {
  Vec z;
  EvalOut last;
  int iters = 0;
  double pg_norm = 0.0;
};

InnerResult lbfgs_inner(const PlanProblem &prob, const Layout &L,
                        const FormulaPtr &f, double beta, Vec z,
                        const Multipliers &mult, int max_iters, double tol) {
  auto eval = [&](const Vec &zz) {
    return eval_lagrangian(prob, L, f, beta, zz, mult);
  };
  const int mem = 10;
  std::deque<Vec> sk, yk;
  EvalOut cur = eval(z);
  InnerResult res;
  double pg = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Vec pgvec = z - project_box(prob, L, z - cur.grad);
    pg = pgvec.norm();
    if (pg <= tol) {
      res.iters = it;
      break;
    }
    // two-loop recursion
    Vec q = cur.grad;
    std::vector<double> alpha(sk.size());
    for (int i = static_cast<int>(sk.size()) - 1; i >= 0; --i) {
      const double rho = 1.0 / yk[i].dot(sk[i]);
      alpha[i] = rho * sk[i].dot(q);
      q -= alpha[i] * yk[i];
    }
    if (!sk.empty()) {
      const double gamma =
          sk.back().dot(yk.back()) / yk.back().squaredNorm();
      q *= gamma;
    }
    for (size_t i = 0; i < sk.size(); ++i) {
      const double rho = 1.0 / yk[i].dot(sk[i]);
      const double beta_c = rho * yk[i].dot(q);
      q += (alpha[i] - beta_c) * sk[i];
    }
    Vec d = -q;
    if (d.dot(cur.grad) > -1e-12 * d.norm() * cur.grad.norm())
      d = -cur.grad; // safeguard against non-descent directions
    double step = 1.0;
    bool accepted = false;
    EvalOut trial;
    Vec zt;
    for (int ls = 0; ls < 40; ++ls) {
      zt = project_box(prob, L, z + step * d);
      trial = eval(zt);
      const double pred = cur.grad.dot(zt - z);
      if (trial.value <= cur.value + 1e-4 * pred ||
          (pred > -1e-16 && trial.value < cur.value)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.iters = it;
      break;
    }
    const Vec s = zt - z;
    const Vec y = trial.grad - cur.grad;
    if (s.dot(y) > 1e-10 * s.norm() * y.norm()) {
      sk.push_back(s);
      yk.push_back(y);
      if (static_cast<int>(sk.size()) > mem) {
        sk.pop_front();
        yk.pop_front();
      }
    }
    z = zt;
    cur = trial;
    res.iters = it + 1;
  }
  res.z = z;
  res.last = cur;
  res.pg_norm = pg;
  return res;
}

// Reach-style atoms in DFS order. In NNF, obstacles and Until guards are
// outside-kind predicates, so collecting inside-kind atoms (and skipping
// Until/Release guard children) recovers the intended visit sequence,
// e.g. ((!B) U A) & ((!C) U B) & (F C) yields A, B, C.
void collect_goal_preds(const FormulaPtr &f,
                        std::vector<const Predicate *> &out) {
  using Op = Formula::Op;
  if (f->op == Op::Atom) {
    if (f->pred.kind == Predicate::Kind::DiskInside ||
        f->pred.kind == Predicate::Kind::BoxInside)
      out.push_back(&f->pred);
    return;
  }
  if (f->op == Op::Until || f->op == Op::Release) {
    collect_goal_preds(f->children[1], out);
    return;
  }
  for (const auto &c : f->children) collect_goal_preds(c, out);
}

// piecewise-linear route through the goal waypoints, time-allocated by arc
// length; only the projected coordinates move, the rest stay at the anchor
Vec straight_line_guess(const PlanProblem &prob, const Layout &L,
                        const FormulaPtr &f) {
  const Vec anchor = L.m > 0 ? prob.prefix_states[L.m] : prob.x0;
  Point pt;
  pt.states.assign(L.N + 1, anchor);
  Vec u0 = Vec::Zero(L.p);
  u0 = u0.cwiseMax(prob.sys.u_lo).cwiseMin(prob.sys.u_hi);
  pt.controls.assign(L.N, u0);

  std::vector<const Predicate *> goals;
  collect_goal_preds(f, goals);
  const Mat &P = prob.sys.P;
  std::vector<Vec> wp = {Vec(P * anchor)};
  for (const Predicate *g : goals) {
    const Vec target = g->kind == Predicate::Kind::DiskInside
                           ? g->center
                           : Vec(0.5 * (g->lower + g->upper));
    if ((target - wp.back()).norm() > 1e-9) wp.push_back(target);
  }
  if (wp.size() > 1) {
    std::vector<double> cum = {0.0};
    for (size_t i = 1; i < wp.size(); ++i)
      cum.push_back(cum.back() + (wp[i] - wp[i - 1]).norm());
    const double total = cum.back();
    for (int k = L.m + 1; k <= L.N; ++k) {
      const double s =
          total * static_cast<double>(k - L.m) / (L.N - L.m);
      size_t i = 1;
      while (i + 1 < wp.size() && s > cum[i]) ++i;
      const double a =
          std::clamp((s - cum[i - 1]) / (cum[i] - cum[i - 1]), 0.0, 1.0);
      const Vec pk = (1.0 - a) * wp[i - 1] + a * wp[i];
      pt.states[k] = anchor + P.transpose() * (pk - wp.front());
    }
  }
  return pack(L, pt);
}

} // namespace

void PlanProblem::validate() const {
  if (!(T > 0.0) || N < 2)
    throw std::invalid_argument("plan: need T > 0 and N >= 2");
  if (!formula) throw std::invalid_argument("plan: missing formula");
  if (horizon(formula) > T + 1e-9)
    throw InsufficientHorizonError(
        "plan: formula horizon exceeds the planning horizon");
  if (x0.size() != sys.n) throw std::invalid_argument("plan: x0 dim");
  if (R_cost.rows() != sys.p || R_cost.cols() != sys.p)
    throw std::invalid_argument("plan: R_cost shape");
  if (rho_min < 0.0) throw std::invalid_argument("plan: rho_min < 0");
  if (betas.empty()) throw std::invalid_argument("plan: empty beta schedule");
  if (!prefix_states.empty() || !prefix_controls.empty()) {
    if (prefix_states.size() != prefix_controls.size() + 1)
      throw std::invalid_argument("plan: prefix arrays misaligned");
    if (static_cast<int>(prefix_controls.size()) >= N)
      throw std::invalid_argument("plan: prefix covers the whole horizon");
  }
}

std::vector<Vec> collocation_defects(const PlanProblem &prob,
                                     const std::vector<Vec> &states,
                                     const std::vector<Vec> &controls) {
  const double h = prob.T / prob.N;
  std::vector<Vec> out;
  for (int k = 0; k < prob.N; ++k) {
    const Vec f0 = prob.sys.drift(states[k], controls[k], k * h);
    const Vec f1 = prob.sys.drift(states[k + 1], controls[k], (k + 1) * h);
    out.push_back(states[k + 1] - states[k] - 0.5 * h * (f0 + f1));
  }
  return out;
}

PlanResult solve_stlto(const PlanProblem &prob, const Trajectory *guess) {
  prob.validate();
  const FormulaPtr f = to_nnf(prob.formula);
  const int m = static_cast<int>(prob.prefix_controls.size());
  const Layout L{prob.sys.n, prob.sys.p, prob.N, m};
  const double h = prob.T / prob.N;

  Vec z;
  if (guess) {
    if (static_cast<int>(guess->states.size()) != prob.N + 1)
      throw std::invalid_argument("plan: guess grid mismatch");
    Point pt;
    pt.states = guess->states;
    pt.controls = guess->controls;
    z = pack(L, pt);
  } else {
    z = straight_line_guess(prob, L, f);
  }
  z = project_box(prob, L, z);

  Multipliers mult;
  mult.lam_d.assign(prob.N, Vec::Zero(prob.sys.n));

  PlanResult res;
  int total_iters = 0;
  EvalOut fin;
  double pg = 0.0;
  for (size_t bi = 0; bi < prob.betas.size(); ++bi) {
    const double beta = prob.betas[bi];
    const bool last_stage = bi + 1 == prob.betas.size();
    // cool the penalties at a stage change: the robustness constraint moves
    // with beta, and a weight inherited from an unreachable smoothed
    // constraint would poison the new stage's conditioning
    mult.mu_d = std::max(10.0, mult.mu_d / 16.0);
    mult.mu_g = std::max(10.0, mult.mu_g / 16.0);
    double prev_viol_d = std::numeric_limits<double>::infinity();
    double prev_viol_g = std::numeric_limits<double>::infinity();
    const int outers = prob.quick ? 5 : (last_stage ? 30 : 8);
    const int inner_cap = prob.quick ? 80 : (last_stage ? 400 : 200);
    for (int outer = 0; outer < outers; ++outer) {
      const double tol = last_stage && outer >= 4 ? 1e-4 : 1e-3;
      InnerResult inner =
          lbfgs_inner(prob, L, f, beta, z, mult, inner_cap, tol);
      z = inner.z;
      fin = inner.last;
      pg = inner.pg_norm;
      total_iters += inner.iters;
      // multiplier updates
      const Point pt = unpack(prob, L, z);
      const auto defects = collocation_defects(prob, pt.states, pt.controls);
      double viol = 0.0;
      for (int k = 0; k < prob.N; ++k) {
        mult.lam_d[k] += mult.mu_d * defects[k];
        viol = std::max(viol, defects[k].lpNorm<Eigen::Infinity>());
      }
      const double g = fin.smooth_rob - prob.rho_min;
      mult.lam_g = std::max(0.0, mult.lam_g - mult.mu_g * g);
      const double gviol = std::max(0.0, -g);
      // grow each penalty only on stagnation of its own constraint, with
      // caps: an unbounded weight on an unattainable smoothed-robustness
      // level must not wreck the conditioning of the whole subproblem
      if (viol > 1e-7 && viol > 0.5 * prev_viol_d)
        mult.mu_d = std::min(mult.mu_d * 2.0, 1e6);
      if (gviol > 0.0 && gviol > 0.8 * prev_viol_g)
        mult.mu_g = std::min(mult.mu_g * 2.0, 1e4);
      prev_viol_d = viol;
      prev_viol_g = gviol;
      if (std::getenv("STLFMP_PLAN_DEBUG"))
        std::fprintf(stderr,
                     "plan: beta %g outer %d inner %d viol %.3e rob %.4f "
                     "pg %.3e mu_d %g mu_g %g\n",
                     beta, outer, inner.iters, viol, fin.smooth_rob, pg,
                     mult.mu_d, mult.mu_g);
      if (viol <= (last_stage ? 1e-6 : 1e-5) && g >= 0.0 &&
          pg <= (last_stage ? 1e-2 : 1e-1))
        break;
    }
  }

  Point pt = unpack(prob, L, z);
  {
    const auto defects = collocation_defects(prob, pt.states, pt.controls);
    res.defect_norm = 0.0;
    for (int k = L.m; k < prob.N; ++k)
      res.defect_norm =
          std::max(res.defect_norm, defects[k].lpNorm<Eigen::Infinity>());
  }

  // The certified nominal is the exact integral curve of the planned
  // control sequence from the last pinned state, not the collocation
  // iterate: re-integrating removes the residual defect entirely, and the
  // robustness below is evaluated on the re-integrated trajectory. The
  // collocation defect only needs to be small enough that the rollout
  // keeps the planned margin.
  const int refine = 8;
  bool blow_up = false;
  Trajectory dense;
  try {
    std::vector<Vec> dense_u;
    for (int k = L.m; k < prob.N; ++k)
      for (int j = 0; j < refine; ++j) dense_u.push_back(pt.controls[k]);
    dense = integrate_nominal(prob.sys, pt.states[L.m], dense_u, h / refine,
                              (prob.N - L.m) * refine);
    for (int k = L.m + 1; k <= prob.N; ++k)
      pt.states[k] = dense.states[static_cast<size_t>(k - L.m) * refine];
  } catch (const BlowUpError &e) {
    res.message = e.what();
    blow_up = true;
  }

  res.nominal.times.clear();
  for (int k = 0; k <= prob.N; ++k) res.nominal.times.push_back(k * h);
  res.nominal.states = pt.states;
  res.nominal.controls = pt.controls;
  res.cost = fin.cost;
  res.grad_norm = pg;
  res.iterations = total_iters;

  const SampledSignal sig = make_signal(prob, pt);
  res.robustness_support = blow_up
                               ? -std::numeric_limits<double>::infinity()
                               : robustness(f, sig, 0);

  // inter-sample certification on the prefix grid plus the refined tail
  bool dense_ok = !prob.dense_check;
  if (blow_up) {
    res.robustness_dense = -std::numeric_limits<double>::infinity();
    dense_ok = false;
  } else if (!prob.dense_check) {
    res.robustness_dense = res.robustness_support;
  } else {
    SampledSignal dsig;
    for (int k = 0; k < L.m; ++k) {
      dsig.times.push_back(k * h);
      dsig.states.push_back(pt.states[k]);
    }
    for (size_t i = 0; i < dense.times.size(); ++i) {
      dsig.times.push_back(L.m * h + dense.times[i]);
      dsig.states.push_back(dense.states[i]);
    }
    res.robustness_dense = robustness(f, dsig, 0);
    dense_ok = res.robustness_dense >= 0.0;
  }

  // the certified nominal is the exact re-integrated rollout and its
  // robustness is checked directly, so the collocation defect only gates
  // how far the rollout may sit from the collocation iterate
  const bool support_ok = !blow_up && res.defect_norm <= 1e-3 &&
                          res.robustness_support >= 0.0;
  res.feasible = support_ok && dense_ok;
  res.dense_check_failed = support_ok && !dense_ok;
  if (res.feasible)
    res.message = "feasible";
  else if (res.dense_check_failed)
    res.message = "inter-sample violation: dense robustness " +
                  std::to_string(res.robustness_dense);
  else if (res.message.empty())
    res.message = "not converged: defect " + std::to_string(res.defect_norm) +
                  ", support robustness " +
                  std::to_string(res.robustness_support) +
                  ", projected gradient " + std::to_string(pg);
  return res;
}

double gradient_check(const PlanProblem &prob, std::uint64_t seed) {
  prob.validate();
  const FormulaPtr f = to_nnf(prob.formula);
  const Layout L{prob.sys.n, prob.sys.p, prob.N};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  Point pt;
  pt.states.assign(L.N + 1, prob.x0);
  pt.controls.resize(L.N);
  for (int k = 1; k <= L.N; ++k) {
    Vec x = prob.x0;
    for (int i = 0; i < L.n; ++i) x[i] += uni(rng);
    pt.states[k] = x;
  }
  for (int k = 0; k < L.N; ++k) {
    Vec u(L.p);
    for (int i = 0; i < L.p; ++i) {
      const double mid = 0.5 * (prob.sys.u_lo[i] + prob.sys.u_hi[i]);
      const double half = 0.5 * (prob.sys.u_hi[i] - prob.sys.u_lo[i]);
      u[i] = mid + uni(rng) * half;
    }
    pt.controls[k] = u;
  }
  const Vec z0 = pack(L, pt);
  const double beta = prob.betas.back();
  const double hfd = 1e-6;

  auto value_and_grad = [&](const Vec &z, Vec *grad) {
    const Point p = unpack(prob, L, z);
    const double hh = prob.T / prob.N;
    double v = 0.0;
    if (grad) *grad = Vec::Zero(L.dim());
    for (int k = 0; k < L.N; ++k) {
      v += hh * p.controls[k].dot(prob.R_cost * p.controls[k]);
      if (grad)
        grad->segment(L.uoff(k), L.p) +=
            2.0 * hh * (prob.R_cost * p.controls[k]);
    }
    const SampledSignal sig = make_signal(prob, p);
    const SmoothRobustness sr = smooth_robustness(f, sig, 0, beta);
    v += sr.value;
    if (grad)
      for (int k = 1; k <= L.N; ++k)
        grad->segment(L.xoff(k), L.n) += sr.grad[k];
    return v;
  };

  Vec g;
  value_and_grad(z0, &g);
  double max_rel = 0.0;
  for (int i = 0; i < L.dim(); ++i) {
    Vec zp = z0, zm = z0;
    zp[i] += hfd;
    zm[i] -= hfd;
    const double fd =
        (value_and_grad(zp, nullptr) - value_and_grad(zm, nullptr)) /
        (2.0 * hfd);
    const double rel =
        std::abs(fd - g[i]) / (1.0 + std::max(std::abs(fd), std::abs(g[i])));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

} // namespace stlfmp
