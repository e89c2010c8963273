#include "stlfmp/controllers.hpp"

#include <cmath>
#include <random>
#include <cstdio>
#include <cstdlib>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace stlfmp {

namespace {

// One sampled LMI: -(W[iw1]-W[iw0])/h + A W[iw0] + W[iw0] A' + B Y[iy]
// + Y' B' - 2c W[iw0] <= 0. h <= 0 marks a static link (no difference
// term), used by the region-sampled branch.
struct Link {
  Mat A, B;
  double h = 0.0;
  int iw0 = 0, iw1 = 0, iy = 0;
};

struct VarSet {
  std::vector<Mat> W, Y;
  Mat Wbar;
  double beta = 0.0;

  VarSet zeros_like() const {
    VarSet z;
    z.W.assign(W.size(), Mat::Zero(W[0].rows(), W[0].cols()));
    z.Y.assign(Y.size(), Mat::Zero(Y[0].rows(), Y[0].cols()));
    z.Wbar = Mat::Zero(Wbar.rows(), Wbar.cols());
    z.beta = 0.0;
    return z;
  }
  void axpy(double a, const VarSet &d) {
    for (size_t i = 0; i < W.size(); ++i) W[i] += a * d.W[i];
    for (size_t i = 0; i < Y.size(); ++i) Y[i] += a * d.Y[i];
    Wbar += a * d.Wbar;
    beta += a * d.beta;
    for (auto &w : W) w = symmetrize(w);
    Wbar = symmetrize(Wbar);
  }
  void scale(double a) {
    for (auto &w : W) w *= a;
    for (auto &y : Y) y *= a;
    Wbar *= a;
    beta *= a;
  }
  double norm() const {
    double s = beta * beta + Wbar.squaredNorm();
    for (const auto &w : W) s += w.squaredNorm();
    for (const auto &y : Y) s += y.squaredNorm();
    return std::sqrt(s);
  }
};

double dot(const VarSet &a, const VarSet &b) {
  double s = a.beta * b.beta + (a.Wbar.cwiseProduct(b.Wbar)).sum();
  for (size_t i = 0; i < a.W.size(); ++i)
    s += (a.W[i].cwiseProduct(b.W[i])).sum();
  for (size_t i = 0; i < a.Y.size(); ++i)
    s += (a.Y[i].cwiseProduct(b.Y[i])).sum();
  return s;
}

Mat link_residual(const Link &l, const VarSet &v, double c) {
  Mat R = l.A * v.W[l.iw0] + v.W[l.iw0] * l.A.transpose() +
          l.B * v.Y[l.iy] + v.Y[l.iy].transpose() * l.B.transpose() -
          2.0 * c * v.W[l.iw0];
  if (l.h > 0.0) R -= (v.W[l.iw1] - v.W[l.iw0]) / l.h;
  return symmetrize(R);
}

struct PenaltyEval {
  double objective = 0.0;
  double penalty = 0.0; // with the tau margin, drives the solver
  double max_lmi_eig = -std::numeric_limits<double>::infinity();
  double max_bound_viol = -std::numeric_limits<double>::infinity();
};

class Problem {
public:
  Problem(std::vector<Link> links, double c, double w, const Mat &P,
          double tau)
      : links_(std::move(links)), c_(c), w_(w), PtP_(symmetrize(
            P.transpose() * P)), tau_(tau) {}

  PenaltyEval eval(const VarSet &v, VarSet *grad) const {
    PenaltyEval out;
    if (grad) *grad = v.zeros_like();
    out.objective = v.beta + w_ * (PtP_.cwiseProduct(v.Wbar)).sum();
    if (grad) {
      grad->beta += 1.0;
      grad->Wbar += w_ * PtP_;
    }
    // squared hinge on every eigenvalue above -tau; summing over the whole
    // spectrum (not just the top eigenvalue) gives the solver gradient
    // information in all violated directions at once
    auto add_pen = [&](const Mat &X, auto &&accum) {
      auto [evals, evecs] = sym_eig(X);
      const int m = static_cast<int>(evals.size());
      Mat D = Mat::Zero(m, m);
      bool any = false;
      for (int i = 0; i < m; ++i) {
        const double a = evals[i] + tau_;
        if (a > 0.0) {
          out.penalty += a * a;
          D +=
              (2.0 * a) * (evecs.col(i) * evecs.col(i).transpose());
          any = true;
        }
      }
      if (any && grad) accum(1.0, D);
      return evals[m - 1];
    };
    for (const auto &l : links_) {
      const Mat R = link_residual(l, v, c_);
      const double lam = add_pen(R, [&](double s, const Mat &vv) {
        grad->W[l.iw0] += s * symmetrize(l.A.transpose() * vv + vv * l.A -
                                         2.0 * c_ * vv);
        if (l.h > 0.0) {
          grad->W[l.iw0] += (s / l.h) * vv;
          grad->W[l.iw1] -= (s / l.h) * vv;
        }
        grad->Y[l.iy] += 2.0 * s * l.B.transpose() * vv;
      });
      out.max_lmi_eig = std::max(out.max_lmi_eig, lam);
    }
    const int n = static_cast<int>(v.Wbar.rows());
    const Mat I = Mat::Identity(n, n);
    for (size_t k = 0; k < v.W.size(); ++k) {
      double lam = add_pen(I - v.W[k], [&](double s, const Mat &vv) {
        grad->W[k] -= s * vv;
      });
      out.max_bound_viol = std::max(out.max_bound_viol, lam);
      lam = add_pen(v.W[k] - v.Wbar, [&](double s, const Mat &vv) {
        grad->W[k] += s * vv;
        grad->Wbar -= s * vv;
      });
      out.max_bound_viol = std::max(out.max_bound_viol, lam);
    }
    const double lam =
        add_pen(v.Wbar - v.beta * I, [&](double s, const Mat &vv) {
          grad->Wbar += s * vv;
          grad->beta -= s;
        });
    out.max_bound_viol = std::max(out.max_bound_viol, lam);
    return out;
  }

  bool feasible(const PenaltyEval &e, double feas_tol) const {
    return e.max_lmi_eig <= -feas_tol && e.max_bound_viol <= 1e-9;
  }

  const std::vector<Link> &links() const { return links_; }

  // phase1 = false: minimize the certificate objective from a strictly
  // feasible v0. phase1 = true: minimize a shared slack added to every cone
  // constraint, which turns any v0 into a strictly feasible start and
  // yields a strictly feasible point whenever one exists.
  VarSet barrier_descend(const VarSet &v0, double tau_b, bool phase1,
                         double feas_tol) const;

private:
  std::vector<Link> links_;
  double c_, w_;
  Mat PtP_;
  double tau_;
};

// The sampled program is linear in (W, Y, W_bar, beta) with PSD cone
// constraints, i.e. a small structured SDP. barrier_descend solves it by
// primal log-barrier path following with sparse Newton steps: the Hessian
// couples only neighbouring support times through the difference quotient
// plus a shared arrowhead for (W_bar, beta), so each Newton system
// factorizes cheaply. The link barriers are shifted by tau_b, so every
// iterate keeps lambda_max of every residual at or below -tau_b and any
// point on the path is a valid certificate.
VarSet Problem::barrier_descend(const VarSet &v0, double tau_b, bool phase1,
                                double feas_tol) const {
  const int n = static_cast<int>(v0.Wbar.rows());
  const int p = static_cast<int>(v0.Y[0].rows());
  const int nW = static_cast<int>(v0.W.size());
  const int nY = static_cast<int>(v0.Y.size());
  const int sw = n * (n + 1) / 2;
  const int sy = p * n;
  const int nvb = nW * sw + nY * sy + sw + 1;
  const int nv = nvb + (phase1 ? 1 : 0);
  const int off_s = nvb; // slack variable, phase 1 only
  auto offW = [&](int k) { return k * sw; };
  auto offY = [&](int k) { return nW * sw + k * sy; };
  const int off_wbar = nW * sw + nY * sy;
  const int off_beta = off_wbar + sw;

  std::vector<std::pair<int, int>> sidx;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) sidx.emplace_back(i, j);
  std::vector<Mat> sbasis(sw);
  for (int s = 0; s < sw; ++s) {
    Mat E = Mat::Zero(n, n);
    E(sidx[s].first, sidx[s].second) = 1.0;
    E(sidx[s].second, sidx[s].first) = 1.0;
    sbasis[s] = E;
  }

  auto flatten = [&](const VarSet &vs) {
    Vec x = Vec::Zero(nv);
    for (int k = 0; k < nW; ++k)
      for (int s = 0; s < sw; ++s)
        x[offW(k) + s] = vs.W[k](sidx[s].first, sidx[s].second);
    for (int k = 0; k < nY; ++k)
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < n; ++b) x[offY(k) + a * n + b] = vs.Y[k](a, b);
    for (int s = 0; s < sw; ++s)
      x[off_wbar + s] = vs.Wbar(sidx[s].first, sidx[s].second);
    x[off_beta] = vs.beta;
    return x;
  };
  auto unflatten = [&](const Vec &x) {
    VarSet vs = v0.zeros_like();
    for (int k = 0; k < nW; ++k)
      for (int s = 0; s < sw; ++s) {
        vs.W[k](sidx[s].first, sidx[s].second) = x[offW(k) + s];
        vs.W[k](sidx[s].second, sidx[s].first) = x[offW(k) + s];
      }
    for (int k = 0; k < nY; ++k)
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < n; ++b) vs.Y[k](a, b) = x[offY(k) + a * n + b];
    for (int s = 0; s < sw; ++s) {
      vs.Wbar(sidx[s].first, sidx[s].second) = x[off_wbar + s];
      vs.Wbar(sidx[s].second, sidx[s].first) = x[off_wbar + s];
    }
    vs.beta = x[off_beta];
    return vs;
  };

  // barrier blocks: F(x) = F0 + sum_i x[idx[i]] dF[i] must stay PD
  struct Block {
    Mat F0;
    std::vector<int> idx;
    std::vector<Mat> dF;
  };
  std::vector<Block> blocks;
  const Mat I = Mat::Identity(n, n);
  for (const auto &l : links_) {
    Block b;
    b.F0 = -tau_b * I;
    for (int s = 0; s < sw; ++s) {
      const Mat &E = sbasis[s];
      Mat dR = l.A * E + E * l.A.transpose() - 2.0 * c_ * E;
      if (l.h > 0.0) dR += E / l.h;
      b.idx.push_back(offW(l.iw0) + s);
      b.dF.push_back(-dR);
    }
    if (l.h > 0.0) {
      for (int s = 0; s < sw; ++s) {
        b.idx.push_back(offW(l.iw1) + s);
        b.dF.push_back(sbasis[s] / l.h);
      }
    }
    for (int a = 0; a < p; ++a)
      for (int col = 0; col < n; ++col) {
        Mat dR = l.B.col(a) * Vec::Unit(n, col).transpose();
        dR += dR.transpose().eval();
        b.idx.push_back(offY(l.iy) + a * n + col);
        b.dF.push_back(-dR);
      }
    blocks.push_back(std::move(b));
  }
  for (int k = 0; k < nW; ++k) {
    Block lo; // W_k - I > 0
    lo.F0 = -I;
    for (int s = 0; s < sw; ++s) {
      lo.idx.push_back(offW(k) + s);
      lo.dF.push_back(sbasis[s]);
    }
    blocks.push_back(std::move(lo));
    Block hi; // W_bar - W_k > 0
    hi.F0 = Mat::Zero(n, n);
    for (int s = 0; s < sw; ++s) {
      hi.idx.push_back(offW(k) + s);
      hi.dF.push_back(-sbasis[s]);
      hi.idx.push_back(off_wbar + s);
      hi.dF.push_back(sbasis[s]);
    }
    blocks.push_back(std::move(hi));
  }
  {
    Block top; // beta I - W_bar > 0
    top.F0 = Mat::Zero(n, n);
    for (int s = 0; s < sw; ++s) {
      top.idx.push_back(off_wbar + s);
      top.dF.push_back(-sbasis[s]);
    }
    top.idx.push_back(off_beta);
    top.dF.push_back(I);
    blocks.push_back(std::move(top));
  }
  if (phase1)
    for (auto &b : blocks) {
      b.idx.push_back(off_s);
      b.dF.push_back(I);
    }
  double m_total = 0.0;
  for (const auto &b : blocks) m_total += b.F0.rows();

  Vec c_lin = Vec::Zero(nv);
  if (phase1) {
    c_lin[off_s] = 1.0;
  } else {
    c_lin[off_beta] = 1.0;
    for (int s = 0; s < sw; ++s) {
      const auto [i, j] = sidx[s];
      c_lin[off_wbar + s] = w_ * (i == j ? PtP_(i, i) : 2.0 * PtP_(i, j));
    }
  }

  auto block_F = [&](const Block &b, const Vec &x) {
    Mat F = b.F0;
    for (size_t i = 0; i < b.idx.size(); ++i) F += x[b.idx[i]] * b.dF[i];
    return F;
  };
  // t * objective + sum of -log det barriers; infinity outside the domain
  auto eval_phi = [&](const Vec &x, double t) {
    double phi = t * c_lin.dot(x);
    for (const auto &b : blocks) {
      Eigen::LLT<Mat> llt(block_F(b, x));
      if (llt.info() != Eigen::Success)
        return std::numeric_limits<double>::infinity();
      const Mat L = llt.matrixL();
      for (int i = 0; i < L.rows(); ++i) {
        if (!(L(i, i) > 0.0))
          return std::numeric_limits<double>::infinity();
        phi -= 2.0 * std::log(L(i, i));
      }
    }
    return phi;
  };

  Vec x = flatten(v0);
  if (phase1) {
    double lam_min = std::numeric_limits<double>::infinity();
    for (const auto &b : blocks) {
      Mat F = b.F0;
      for (size_t i = 0; i < b.idx.size(); ++i)
        if (b.idx[i] != off_s) F += x[b.idx[i]] * b.dF[i];
      lam_min = std::min(lam_min, sym_eig_min(F));
    }
    x[off_s] = std::max(1.0, -lam_min + 1.0);
  }
  if (!std::isfinite(eval_phi(x, 1.0))) return v0; // caller keeps its point

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::SparseMatrix<double> H(nv, nv);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool analyzed = false;
  double t = std::max(1.0, m_total / (1.0 + std::abs(c_lin.dot(x))));
  while (true) {
    for (int itn = 0; itn < 60; ++itn) {
      Vec g = t * c_lin;
      trips.clear();
      for (const auto &b : blocks) {
        Eigen::LLT<Mat> llt(block_F(b, x));
        if (llt.info() != Eigen::Success) return unflatten(x);
        const Mat L = llt.matrixL();
        const Mat Finv = llt.solve(Mat::Identity(n, n));
        const size_t d = b.idx.size();
        std::vector<Mat> D(d);
        for (size_t i = 0; i < d; ++i) {
          const Mat T1 =
              L.triangularView<Eigen::Lower>().solve(b.dF[i]);
          D[i] = L.triangularView<Eigen::Lower>().solve(
              Mat(T1.transpose()));
          g[b.idx[i]] -= (Finv.cwiseProduct(b.dF[i])).sum();
        }
        for (size_t i = 0; i < d; ++i)
          for (size_t j = 0; j < d; ++j)
            trips.emplace_back(b.idx[i], b.idx[j],
                               (D[i].cwiseProduct(D[j])).sum());
      }
      for (int i = 0; i < nv; ++i) trips.emplace_back(i, i, 1e-10);
      H.setFromTriplets(trips.begin(), trips.end());
      if (!analyzed) {
        solver.analyzePattern(H);
        analyzed = true;
      }
      solver.factorize(H);
      if (solver.info() != Eigen::Success) return unflatten(x);
      const Vec dx = solver.solve(-g);
      const double dec = -g.dot(dx);
      if (!(dec > 0.0)) break;
      const double phi0 = eval_phi(x, t);
      if (0.5 * dec <= 1e-8 * (1.0 + std::abs(phi0))) break; // centered
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Vec xt = x + step * dx;
        const double phit = eval_phi(xt, t);
        if (phit <= phi0 - 0.01 * step * dec) {
          x = xt;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    // the slack only has to clear zero, not reach its optimum
    if (phase1 && feasible(eval(unflatten(x), nullptr), feas_tol)) break;
    if (m_total / t <= 1e-2) break;
    t *= 10.0;
  }
  return unflatten(x);
}

// L-BFGS with backtracking line search on objective + mu * penalty; the
// penalty weight follows a continuation schedule so early rounds shape the
// variables cheaply and late rounds enforce the LMIs tightly. The penalty
// is exact in the limit (it vanishes on the strictly feasible set), so the
// best strictly feasible iterate is returned.
VarSet solve_penalty(const Problem &prob, VarSet v, const TvccmOptions &opt,
                     const char *what) {
  VarSet best = v;
  bool have_feasible = false;
  double best_obj = std::numeric_limits<double>::infinity();
  double worst_lmi = std::numeric_limits<double>::infinity();

  const int rounds = 6;
  const int per_round = std::max(50, opt.max_iters / rounds);
  const int mem = 8;
  double mu = 100.0;
  for (int round = 0; round < rounds; ++round, mu *= 10.0) {
    std::vector<VarSet> sk, yk;
    std::vector<double> rho;
    VarSet grad;
    PenaltyEval e = prob.eval(v, &grad);
    double merit = e.objective + mu * e.penalty;
    auto consider = [&](const VarSet &cand, const PenaltyEval &ce) {
      worst_lmi = std::min(worst_lmi, ce.max_lmi_eig);
      if (prob.feasible(ce, opt.feas_tol) && ce.objective < best_obj) {
        best = cand;
        best_obj = ce.objective;
        have_feasible = true;
      }
    };
    consider(v, e);
    double step0 = 1.0;
    for (int it = 0; it < per_round; ++it) {
      // two-loop recursion for the search direction
      VarSet dir = grad;
      std::vector<double> alpha(sk.size());
      for (int i = static_cast<int>(sk.size()) - 1; i >= 0; --i) {
        alpha[i] = rho[i] * dot(sk[i], dir);
        dir.axpy(-alpha[i], yk[i]);
      }
      if (!sk.empty()) {
        const double gamma =
            dot(sk.back(), yk.back()) / dot(yk.back(), yk.back());
        dir.scale(gamma);
      }
      for (size_t i = 0; i < sk.size(); ++i) {
        const double b = rho[i] * dot(yk[i], dir);
        dir.axpy(alpha[i] - b, sk[i]);
      }
      dir.scale(-1.0);
      double slope = dot(grad, dir);
      if (slope > 0.0) { // fall back to steepest descent
        dir = grad;
        dir.scale(-1.0);
        slope = -dot(grad, grad);
        sk.clear();
        yk.clear();
        rho.clear();
      }
      // backtracking Armijo search
      double step = sk.empty() ? step0 : 1.0;
      VarSet trial;
      VarSet tgrad;
      PenaltyEval te;
      double tmerit = std::numeric_limits<double>::infinity();
      bool ok = false;
      for (int ls = 0; ls < 30; ++ls) {
        trial = v;
        trial.axpy(step, dir);
        te = prob.eval(trial, &tgrad);
        tmerit = te.objective + mu * te.penalty;
        if (std::isfinite(tmerit) &&
            tmerit <= merit + 1e-4 * step * slope) {
          ok = true;
          break;
        }
        step *= 0.5;
      }
      if (!ok) break;
      if (sk.empty()) step0 = std::min(1.0, step * 2.0);
      VarSet s = trial;
      s.axpy(-1.0, v);
      VarSet yv = tgrad;
      yv.axpy(-1.0, grad);
      const double sy = dot(s, yv);
      if (sy > 1e-12 * s.norm() * yv.norm()) {
        sk.push_back(std::move(s));
        yk.push_back(std::move(yv));
        rho.push_back(1.0 / sy);
        if (static_cast<int>(sk.size()) > mem) {
          sk.erase(sk.begin());
          yk.erase(yk.begin());
          rho.erase(rho.begin());
        }
      }
      v = std::move(trial);
      grad = std::move(tgrad);
      const double drop = merit - tmerit;
      merit = tmerit;
      e = te;
      consider(v, e);
      if (drop <= 1e-10 * (1.0 + std::abs(merit))) break;
    }
    if (std::getenv("STLFMP_TVCCM_DEBUG"))
      std::fprintf(stderr,
                   "tvccm round %d mu=%.1e obj=%.4f pen=%.3e lmi=%.3e "
                   "bound=%.3e best=%.4f\n",
                   round, mu, e.objective, e.penalty, e.max_lmi_eig,
                   e.max_bound_viol, best_obj);
  }
  if (!have_feasible)
    throw TvccmInfeasibleError(
        std::string(what) +
        ": no strictly feasible point found at the prescribed rate (worst "
        "LMI eigenvalue " +
        std::to_string(worst_lmi) + "); try a shallower rate");
  return best;
}

// Restore strict feasibility with the penalty method if the warm start
// needs it, then refine with the interior-point solver. The refined point
// is only accepted if it verifies at the required margins.
VarSet solve_sdp(const Problem &prob, VarSet v, const TvccmOptions &opt,
                 const char *what) {
  PenaltyEval e = prob.eval(v, nullptr);
  if (!prob.feasible(e, opt.feas_tol)) {
    VarSet restored =
        prob.barrier_descend(v, 2.0 * opt.feas_tol, true, opt.feas_tol);
    if (prob.feasible(prob.eval(restored, nullptr), opt.feas_tol))
      v = std::move(restored);
    else
      v = solve_penalty(prob, std::move(v), opt, what); // throws if stuck
    e = prob.eval(v, nullptr);
  }
  const double tau_b =
      std::min(2.0 * opt.feas_tol, 0.5 * std::max(0.0, -e.max_lmi_eig));
  VarSet refined = prob.barrier_descend(v, tau_b, false, opt.feas_tol);
  const PenaltyEval er = prob.eval(refined, nullptr);
  if (std::getenv("STLFMP_TVCCM_DEBUG"))
    std::fprintf(stderr,
                 "tvccm sdp: warm obj=%.4f lmi=%.3e -> refined obj=%.4f "
                 "lmi=%.3e bound=%.3e\n",
                 e.objective, e.max_lmi_eig, er.objective, er.max_lmi_eig,
                 er.max_bound_viol);
  if (prob.feasible(er, opt.feas_tol) && er.objective < e.objective)
    return refined;
  return v;
}

// Warm start from TVLQR on the rate-shifted linearization (A - c I, B).
// The shifted Riccati equation gives Acl' S + S Acl - 2c S = -Sdot - Q
// - S B R^-1 B' S along the nominal, so W = alpha S^-1 with the shifted
// gain satisfies the sampled LMIs up to the O(h) difference error.
VarSet init_from_lqr(const SystemModel &sys, const Trajectory &nominal,
                     size_t nW, size_t nY, double c) {
  SystemModel shifted = sys;
  const auto base = sys.jacobians;
  shifted.jacobians = [base, c](const Vec &x, const Vec &u, double t) {
    auto [A, B] = base(x, u, t);
    A -= c * Mat::Identity(A.rows(), A.cols());
    return std::make_pair(A, B);
  };
  const Mat Q = Mat::Identity(sys.n, sys.n);
  const Mat R = 0.1 * Mat::Identity(sys.p, sys.p);
  // settle the terminal cost toward the steady Riccati solution of the
  // terminal linearization first; otherwise the terminal boundary layer
  // makes S-dot (and the finite-difference W-dot error) large enough to
  // break the warm start on stiff systems
  Mat Qf = 10.0 * Mat::Identity(sys.n, sys.n);
  {
    const auto [Af, Bf] = shifted.jacobians(
        nominal.states.back(), nominal.controls.back(), nominal.times.back());
    const Mat Rinv = spd_inverse(R);
    auto rhs = [&](const Mat &S) {
      return Mat(symmetrize(S * Af + Af.transpose() * S -
                            S * Bf * Rinv * Bf.transpose() * S + Q));
    };
    auto rk4 = [&](const Mat &S, double hh) {
      const Mat k1 = rhs(S);
      const Mat k2 = rhs(Mat(S + 0.5 * hh * k1));
      const Mat k3 = rhs(Mat(S + 0.5 * hh * k2));
      const Mat k4 = rhs(Mat(S + hh * k3));
      return Mat(symmetrize(S + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
    };
    double left = 2.0, hs = 1e-3;
    while (left > 0.0) {
      hs = std::min(hs, left);
      const Mat full = rk4(Qf, hs);
      const Mat half = rk4(rk4(Qf, 0.5 * hs), 0.5 * hs);
      const double err = full.allFinite() && half.allFinite()
                             ? (full - half).norm()
                             : std::numeric_limits<double>::infinity();
      const double tol = 1e-8 * (1.0 + Qf.norm());
      if (err <= tol) {
        Qf = half;
        left -= hs;
        if (err < 0.03 * tol) hs *= 2.0;
      } else if (hs <= 1e-12) {
        break; // keep whatever has settled so far
      } else {
        hs *= 0.5;
      }
    }
    if (!Qf.allFinite() || sym_eig_min(Qf) <= 0.0)
      Qf = 10.0 * Mat::Identity(sys.n, sys.n);
  }
  const GainSchedule lqr = tvlqr_synthesize(shifted, nominal, Q, R, Qf);
  double smax = 0.0;
  for (const auto &S : lqr.S) smax = std::max(smax, sym_eig_max(S));
  const double alpha = 1.05 * smax;
  VarSet v;
  v.W.resize(nW);
  v.Y.resize(nY);
  for (size_t k = 0; k < nW; ++k) {
    const size_t i = std::min(k, lqr.S.size() - 1);
    v.W[k] = symmetrize(alpha * spd_inverse(lqr.S[i]));
  }
  for (size_t k = 0; k < nY; ++k) {
    const size_t i = std::min(k, lqr.K.size() - 1);
    v.Y[k] = lqr.K[i] * v.W[std::min(k, nW - 1)]; // K already additive
  }
  double wmax = 0.0;
  for (const auto &W : v.W) wmax = std::max(wmax, sym_eig_max(W));
  v.Wbar = 1.05 * wmax * Mat::Identity(sys.n, sys.n);
  v.beta = 1.05 * sym_eig_max(v.Wbar);
  return v;
}

GainSchedule finish(const SystemModel &sys, const VarSet &v,
                    std::vector<Link> links, std::vector<double> times,
                    const TvccmOptions &opt) {
  GainSchedule g;
  g.times = std::move(times);
  g.rate = opt.c;
  g.proj_weight = opt.w;
  g.proj = sys.P;
  g.W = v.W;
  g.Y = v.Y;
  g.W_bar = v.Wbar;
  g.beta_bar = v.beta;
  for (const auto &l : links) {
    g.A.push_back(l.A);
    g.B.push_back(l.B);
  }
  for (size_t k = 0; k < v.W.size(); ++k) {
    const Mat Winv = spd_inverse(v.W[k]);
    g.K.push_back(v.Y[std::min(k, v.Y.size() - 1)] * Winv);
  }
  g.certificate.times =
      g.times.size() == v.W.size() ? g.times : std::vector<double>{0.0};
  for (size_t k = 0; k < v.W.size(); ++k) {
    g.certificate.M.push_back(spd_inverse(v.W[k]));
    g.certificate.c.push_back(opt.c);
  }
  return g;
}

} // namespace

GainSchedule tvccm_synthesize(const SystemModel &sys,
                              const Trajectory &nominal,
                              const TvccmOptions &opt) {
  nominal.validate(sys);
  if (!(opt.c < 0.0))
    throw std::invalid_argument("tvccm: target rate must be < 0");
  const int N = static_cast<int>(nominal.times.size()) - 1;
  std::vector<Link> links;
  for (int k = 0; k < N; ++k) {
    const auto [A, B] = sys.jacobians(nominal.states[k], nominal.controls[k],
                                      nominal.times[k]);
    links.push_back(
        {A, B, nominal.times[k + 1] - nominal.times[k], k, k + 1, k});
  }
  Problem prob(links, opt.c, opt.w, sys.P, 2.0 * opt.feas_tol);
  VarSet v0 = init_from_lqr(sys, nominal, N + 1, N + 1, opt.c);
  const VarSet v = solve_sdp(prob, std::move(v0), opt, "tvccm");
  return finish(sys, v, prob.links(), nominal.times, opt);
}

GainSchedule tvccm_synthesize_global(const SystemModel &sys, const Vec &x_lo,
                                     const Vec &x_hi,
                                     const TvccmOptions &opt) {
  if (!(opt.c < 0.0))
    throw std::invalid_argument("tvccm: target rate must be < 0");
  if (x_lo.size() != sys.n || x_hi.size() != sys.n)
    throw std::invalid_argument("tvccm global: state box dim mismatch");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Link> links;
  for (int s = 0; s < opt.n_samples; ++s) {
    Vec x(sys.n), u(sys.p);
    for (int i = 0; i < sys.n; ++i)
      x[i] = x_lo[i] + uni(rng) * (x_hi[i] - x_lo[i]);
    for (int i = 0; i < sys.p; ++i)
      u[i] = sys.u_lo[i] + uni(rng) * (sys.u_hi[i] - sys.u_lo[i]);
    const auto [A, B] = sys.jacobians(x, u, 0.0);
    links.push_back({A, B, 0.0, 0, 0, 0});
  }
  Problem prob(links, opt.c, opt.w, sys.P, 2.0 * opt.feas_tol);
  // initialize from an LQR around the box center with an off-center control
  Trajectory fake;
  const Vec xc = 0.5 * (x_lo + x_hi);
  const Vec uc = 0.5 * (sys.u_lo + sys.u_hi) + 0.25 * (sys.u_hi - sys.u_lo);
  const int M = 30;
  for (int k = 0; k <= M; ++k) {
    fake.times.push_back(0.1 * k);
    fake.states.push_back(xc);
    if (k < M) fake.controls.push_back(uc);
  }
  VarSet v0 = init_from_lqr(sys, fake, 1, 1, opt.c);
  const VarSet v = solve_sdp(prob, std::move(v0), opt, "tvccm global");
  return finish(sys, v, prob.links(), {0.0}, opt);
}

TvccmReport tvccm_verify(const GainSchedule &sched, double tol) {
  if (sched.W.empty())
    throw std::invalid_argument("tvccm_verify: schedule has no TVCCM data");
  TvccmReport rep;
  const bool shared = sched.W.size() == 1;
  VarSet v;
  v.W = sched.W;
  v.Y = sched.Y;
  v.Wbar = sched.W_bar;
  v.beta = sched.beta_bar;
  for (size_t l = 0; l < sched.A.size(); ++l) {
    Link link;
    link.A = sched.A[l];
    link.B = sched.B[l];
    if (shared) {
      link.h = 0.0;
      link.iw0 = link.iw1 = link.iy = 0;
    } else {
      link.h = sched.times[l + 1] - sched.times[l];
      link.iw0 = static_cast<int>(l);
      link.iw1 = static_cast<int>(l) + 1;
      link.iy = static_cast<int>(l);
    }
    const Mat R = link_residual(link, v, sched.rate);
    const double lam = sym_eig_max(R);
    rep.lmi_max_eig.push_back(lam);
    rep.penalty_value += std::max(0.0, lam) * std::max(0.0, lam);
  }
  const int n = static_cast<int>(v.Wbar.rows());
  const Mat I = Mat::Identity(n, n);
  for (const auto &W : v.W) {
    rep.w_min_eig.push_back(sym_eig_min(W));
    rep.w_gap_eig.push_back(sym_eig_max(W - v.Wbar));
  }
  rep.wbar_beta_gap = sym_eig_max(v.Wbar - v.beta * I);
  rep.feasible = rep.wbar_beta_gap <= 1e-9;
  for (double lam : rep.lmi_max_eig)
    if (lam > -tol) rep.feasible = false;
  for (double w : rep.w_min_eig)
    if (w < 1.0 - 1e-9) rep.feasible = false;
  for (double gp : rep.w_gap_eig)
    if (gp > 1e-9) rep.feasible = false;
  return rep;
}

} // namespace stlfmp
