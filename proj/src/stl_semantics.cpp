#include "stlfmp/stl.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace stlfmp {

namespace {

constexpr double kTimeTol = 1e-9;

// Support indices j with times[j] in [times[i] + t1, times[i] + t2] (closed).
std::pair<int, int> window(const SampledSignal &sig, int i, double t1,
                           double t2) {
  const double lo = sig.times[i] + t1 - kTimeTol;
  const double hi = sig.times[i] + t2 + kTimeTol;
  const auto b = std::lower_bound(sig.times.begin(), sig.times.end(), lo);
  const auto e = std::upper_bound(sig.times.begin(), sig.times.end(), hi);
  const int jb = static_cast<int>(b - sig.times.begin());
  const int je = static_cast<int>(e - sig.times.begin()) - 1;
  if (jb > je)
    throw EmptyIntervalError("temporal interval [" + std::to_string(t1) + "," +
                             std::to_string(t2) +
                             "] contains no support time at t = " +
                             std::to_string(sig.times[i]));
  return {jb, je};
}

void check_horizon(const FormulaPtr &f, const SampledSignal &sig, int i) {
  if (i < 0 || i >= sig.size())
    throw std::out_of_range("stl: t_index out of range");
  if (sig.times[i] + horizon(f) > sig.times.back() + kTimeTol)
    throw InsufficientHorizonError(
        "signal ends at " + std::to_string(sig.times.back()) +
        " but formula horizon needs " +
        std::to_string(sig.times[i] + horizon(f)));
}

bool eval_rec(const FormulaPtr &f, const SampledSignal &sig, int i) {
  using Op = Formula::Op;
  switch (f->op) {
  case Op::Atom:
    return f->pred.mu(sig.states[i], f->erosion.at(sig.times[i])) >= 0.0;
  case Op::Not:
    return !eval_rec(f->children[0], sig, i);
  case Op::And:
    for (const auto &c : f->children)
      if (!eval_rec(c, sig, i)) return false;
    return true;
  case Op::Or:
    for (const auto &c : f->children)
      if (eval_rec(c, sig, i)) return true;
    return false;
  case Op::Always: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    for (int j = jb; j <= je; ++j)
      if (!eval_rec(f->children[0], sig, j)) return false;
    return true;
  }
  case Op::Eventually: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    for (int j = jb; j <= je; ++j)
      if (eval_rec(f->children[0], sig, j)) return true;
    return false;
  }
  case Op::Until: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    bool prefix = true;
    for (int j = i; j <= je; ++j) {
      prefix = prefix && eval_rec(f->children[0], sig, j);
      if (j >= jb && prefix && eval_rec(f->children[1], sig, j)) return true;
      if (!prefix) return false;
    }
    return false;
  }
  case Op::Release: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    bool released = false;
    for (int j = i; j <= je; ++j) {
      released = released || eval_rec(f->children[0], sig, j);
      if (j >= jb && !released && !eval_rec(f->children[1], sig, j))
        return false;
    }
    return true;
  }
  }
  throw std::logic_error("eval: unknown op");
}

double rob_rec(const FormulaPtr &f, const SampledSignal &sig, int i) {
  using Op = Formula::Op;
  switch (f->op) {
  case Op::Atom:
    return f->pred.mu(sig.states[i], f->erosion.at(sig.times[i]));
  case Op::Not:
    return -rob_rec(f->children[0], sig, i);
  case Op::And: {
    double m = std::numeric_limits<double>::infinity();
    for (const auto &c : f->children) m = std::min(m, rob_rec(c, sig, i));
    return m;
  }
  case Op::Or: {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto &c : f->children) m = std::max(m, rob_rec(c, sig, i));
    return m;
  }
  case Op::Always: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    double m = std::numeric_limits<double>::infinity();
    for (int j = jb; j <= je; ++j)
      m = std::min(m, rob_rec(f->children[0], sig, j));
    return m;
  }
  case Op::Eventually: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    double m = -std::numeric_limits<double>::infinity();
    for (int j = jb; j <= je; ++j)
      m = std::max(m, rob_rec(f->children[0], sig, j));
    return m;
  }
  case Op::Until: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    double prefix = std::numeric_limits<double>::infinity();
    double m = -std::numeric_limits<double>::infinity();
    for (int j = i; j <= je; ++j) {
      prefix = std::min(prefix, rob_rec(f->children[0], sig, j));
      if (j >= jb)
        m = std::max(m, std::min(rob_rec(f->children[1], sig, j), prefix));
    }
    return m;
  }
  case Op::Release: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    double prefix = -std::numeric_limits<double>::infinity();
    double m = std::numeric_limits<double>::infinity();
    for (int j = i; j <= je; ++j) {
      prefix = std::max(prefix, rob_rec(f->children[0], sig, j));
      if (j >= jb)
        m = std::min(m, std::max(rob_rec(f->children[1], sig, j), prefix));
    }
    return m;
  }
  }
  throw std::logic_error("robustness: unknown op");
}

// ---------------------------------------------------------------------------
// Smooth robustness: build a (formula node, time index) DAG once, run a
// log-sum-exp forward pass and a reverse adjoint pass over it.

struct TapeEntry {
  enum class Type { Leaf, Min, Max };
  Type type;
  int state_index = -1; // Leaf
  double value = 0.0;
  Vec leaf_grad;          // Leaf: d value / d state
  std::vector<int> args;  // Min/Max
  double adj = 0.0;
};

class SmoothTape {
public:
  SmoothTape(const SampledSignal &sig, double beta) : sig_(sig), beta_(beta) {}

  int build(const FormulaPtr &f, int i) {
    const auto key = std::make_pair(f.get(), i);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const int id = build_impl(f, i);
    memo_[key] = id;
    return id;
  }

  SmoothRobustness run(int root) {
    // forward
    for (auto &e : tape_) {
      if (e.type == TapeEntry::Type::Leaf) continue;
      double shift = e.type == TapeEntry::Type::Min
                         ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
      for (int a : e.args)
        shift = e.type == TapeEntry::Type::Min
                    ? std::min(shift, tape_[a].value)
                    : std::max(shift, tape_[a].value);
      double s = 0.0;
      for (int a : e.args) {
        const double d = tape_[a].value - shift;
        s += std::exp(e.type == TapeEntry::Type::Min ? -beta_ * d : beta_ * d);
      }
      const double k = static_cast<double>(e.args.size());
      if (e.type == TapeEntry::Type::Min)
        e.value = shift - std::log(s) / beta_;
      else
        e.value = shift + (std::log(s) - std::log(k)) / beta_;
    }
    // backward
    for (auto &e : tape_) e.adj = 0.0;
    tape_[root].adj = 1.0;
    SmoothRobustness out;
    out.value = tape_[root].value;
    out.grad.assign(sig_.states.size(), Vec());
    for (size_t si = 0; si < sig_.states.size(); ++si)
      out.grad[si] = Vec::Zero(sig_.states[si].size());
    for (int id = static_cast<int>(tape_.size()) - 1; id >= 0; --id) {
      const TapeEntry &e = tape_[id];
      if (e.adj == 0.0) continue;
      if (e.type == TapeEntry::Type::Leaf) {
        out.grad[e.state_index] += e.adj * e.leaf_grad;
        continue;
      }
      // softmax weights (recompute shift; cheap relative to storage)
      double shift = e.type == TapeEntry::Type::Min
                         ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
      for (int a : e.args)
        shift = e.type == TapeEntry::Type::Min
                    ? std::min(shift, tape_[a].value)
                    : std::max(shift, tape_[a].value);
      double s = 0.0;
      for (int a : e.args) {
        const double d = tape_[a].value - shift;
        s += std::exp(e.type == TapeEntry::Type::Min ? -beta_ * d : beta_ * d);
      }
      for (int a : e.args) {
        const double d = tape_[a].value - shift;
        const double w =
            std::exp(e.type == TapeEntry::Type::Min ? -beta_ * d : beta_ * d) /
            s;
        tape_[a].adj += e.adj * w;
      }
    }
    return out;
  }

private:
  int push(TapeEntry e) {
    tape_.push_back(std::move(e));
    return static_cast<int>(tape_.size()) - 1;
  }

  int leaf(int state_index, double value, Vec grad) {
    TapeEntry e;
    e.type = TapeEntry::Type::Leaf;
    e.state_index = state_index;
    e.value = value;
    e.leaf_grad = std::move(grad);
    return push(std::move(e));
  }

  int group(TapeEntry::Type t, std::vector<int> args) {
    if (args.size() == 1) return args[0];
    TapeEntry e;
    e.type = t;
    e.args = std::move(args);
    return push(std::move(e));
  }

  int atom(const Formula &f, int i) {
    const Predicate &p = f.pred;
    const Vec &x = sig_.states[i];
    const double er = f.erosion.at(sig_.times[i]);
    using K = Predicate::Kind;
    if (p.kind == K::BoxInside || p.kind == K::BoxOutside) {
      // expand into affine faces so the smoothing sees the inner min/max
      const Vec pos = p.project(x);
      const int d = static_cast<int>(pos.size());
      std::vector<int> faces;
      for (int c = 0; c < d; ++c) {
        Vec gp = Vec::Zero(d);
        if (p.kind == K::BoxInside) {
          gp[c] = 1.0;
          faces.push_back(leaf(i, pos[c] - (p.lower[c] + er), lift(p, gp)));
          gp[c] = -1.0;
          faces.push_back(leaf(i, (p.upper[c] - er) - pos[c], lift(p, gp)));
        } else {
          gp[c] = -1.0;
          faces.push_back(leaf(i, (p.lower[c] - er) - pos[c], lift(p, gp)));
          gp[c] = 1.0;
          faces.push_back(leaf(i, pos[c] - (p.upper[c] + er), lift(p, gp)));
        }
      }
      return group(p.kind == K::BoxInside ? TapeEntry::Type::Min
                                          : TapeEntry::Type::Max,
                   std::move(faces));
    }
    return leaf(i, p.mu(x, er), p.mu_grad(x, er));
  }

  static Vec lift(const Predicate &p, const Vec &gp) {
    if (p.projection.rows() > 0) return p.projection.transpose() * gp;
    return gp;
  }

  int build_impl(const FormulaPtr &f, int i) {
    using Op = Formula::Op;
    switch (f->op) {
    case Op::Atom:
      return atom(*f, i);
    case Op::Not:
      throw std::invalid_argument(
          "smooth_robustness: formula must be in NNF (convert with to_nnf)");
    case Op::And:
    case Op::Or: {
      std::vector<int> ids;
      for (const auto &c : f->children) ids.push_back(build(c, i));
      return group(f->op == Op::And ? TapeEntry::Type::Min
                                    : TapeEntry::Type::Max,
                   std::move(ids));
    }
    case Op::Always:
    case Op::Eventually: {
      auto [jb, je] = window(sig_, i, f->t1, f->t2);
      std::vector<int> ids;
      for (int j = jb; j <= je; ++j) ids.push_back(build(f->children[0], j));
      return group(f->op == Op::Always ? TapeEntry::Type::Min
                                       : TapeEntry::Type::Max,
                   std::move(ids));
    }
    case Op::Until: {
      auto [jb, je] = window(sig_, i, f->t1, f->t2);
      std::vector<int> prefix, cands;
      for (int j = i; j <= je; ++j) {
        prefix.push_back(build(f->children[0], j));
        if (j >= jb) {
          std::vector<int> grp = prefix;
          grp.push_back(build(f->children[1], j));
          cands.push_back(group(TapeEntry::Type::Min, std::move(grp)));
        }
      }
      return group(TapeEntry::Type::Max, std::move(cands));
    }
    case Op::Release: {
      auto [jb, je] = window(sig_, i, f->t1, f->t2);
      std::vector<int> prefix, cands;
      for (int j = i; j <= je; ++j) {
        prefix.push_back(build(f->children[0], j));
        if (j >= jb) {
          std::vector<int> grp = prefix;
          grp.push_back(build(f->children[1], j));
          cands.push_back(group(TapeEntry::Type::Max, std::move(grp)));
        }
      }
      return group(TapeEntry::Type::Min, std::move(cands));
    }
    }
    throw std::logic_error("smooth: unknown op");
  }

  struct KeyHash {
    size_t operator()(const std::pair<const Formula *, int> &k) const {
      return std::hash<const Formula *>()(k.first) ^
             (std::hash<int>()(k.second) * 0x9e3779b97f4a7c15ULL);
    }
  };

  const SampledSignal &sig_;
  double beta_;
  std::vector<TapeEntry> tape_;
  std::unordered_map<std::pair<const Formula *, int>, int, KeyHash> memo_;
};

double gap_rec(const FormulaPtr &f, const SampledSignal &sig, int i,
               double beta) {
  using Op = Formula::Op;
  const double lb = 1.0 / beta;
  switch (f->op) {
  case Op::Atom: {
    using K = Predicate::Kind;
    if (f->pred.kind == K::BoxInside || f->pred.kind == K::BoxOutside) {
      const int d = f->pred.lower.size();
      return lb * std::log(2.0 * d);
    }
    return 0.0;
  }
  case Op::Not:
    return gap_rec(f->children[0], sig, i, beta);
  case Op::And:
  case Op::Or: {
    double g = 0.0;
    for (const auto &c : f->children) g = std::max(g, gap_rec(c, sig, i, beta));
    return g + lb * std::log(static_cast<double>(f->children.size()));
  }
  case Op::Always:
  case Op::Eventually: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    double g = 0.0;
    for (int j = jb; j <= je; ++j)
      g = std::max(g, gap_rec(f->children[0], sig, j, beta));
    return g + lb * std::log(static_cast<double>(je - jb + 1));
  }
  case Op::Until:
  case Op::Release: {
    auto [jb, je] = window(sig, i, f->t1, f->t2);
    double g = 0.0;
    for (int j = i; j <= je; ++j) {
      g = std::max(g, gap_rec(f->children[0], sig, j, beta));
      if (j >= jb) g = std::max(g, gap_rec(f->children[1], sig, j, beta));
    }
    const double outer = lb * std::log(static_cast<double>(je - jb + 1));
    const double inner = lb * std::log(static_cast<double>(je - i + 2));
    return g + outer + inner;
  }
  }
  throw std::logic_error("gap: unknown op");
}

} // namespace

bool eval_boolean(const FormulaPtr &f, const SampledSignal &sig, int t_index) {
  sig.validate();
  check_horizon(f, sig, t_index);
  return eval_rec(f, sig, t_index);
}

double robustness(const FormulaPtr &f, const SampledSignal &sig, int t_index) {
  sig.validate();
  check_horizon(f, sig, t_index);
  return rob_rec(f, sig, t_index);
}

SmoothRobustness smooth_robustness(const FormulaPtr &f,
                                   const SampledSignal &sig, int t_index,
                                   double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("smooth_robustness: beta must be finite > 0");
  sig.validate();
  check_horizon(f, sig, t_index);
  SmoothTape tape(sig, beta);
  const int root = tape.build(f, t_index);
  return tape.run(root);
}

double smooth_gap_bound(const FormulaPtr &f, const SampledSignal &sig,
                        int t_index, double beta) {
  return gap_rec(f, sig, t_index, beta);
}

// ---------------------------------------------------------------------------
// Dense boolean evaluation at t = 0 with linear-time window algorithms.

namespace {

using BitVec = std::vector<char>;

// prefix[i] = number of true entries before index i
std::vector<int> prefix_counts(const BitVec &v) {
  std::vector<int> p(v.size() + 1, 0);
  for (size_t i = 0; i < v.size(); ++i) p[i + 1] = p[i] + (v[i] ? 1 : 0);
  return p;
}

struct DenseEval {
  const SampledSignal &sig;
  int n;

  explicit DenseEval(const SampledSignal &s)
      : sig(s), n(static_cast<int>(s.times.size())) {}

  // [lo_i, hi_i] index windows for interval [t1, t2]; clamped to the grid.
  void windows(double t1, double t2, std::vector<int> &lo,
               std::vector<int> &hi) const {
    lo.resize(n);
    hi.resize(n);
    int b = 0, e = 0;
    for (int i = 0; i < n; ++i) {
      const double tlo = sig.times[i] + t1 - kTimeTol;
      const double thi = sig.times[i] + t2 + kTimeTol;
      if (b < i) b = i;
      while (b < n && sig.times[b] < tlo) ++b;
      if (e < b) e = b;
      while (e + 1 < n && sig.times[e + 1] <= thi) ++e;
      lo[i] = std::min(b, n - 1);
      hi[i] = std::min(e, n - 1);
    }
  }

  BitVec eval(const FormulaPtr &f) const {
    using Op = Formula::Op;
    switch (f->op) {
    case Op::Atom: {
      BitVec out(n);
      for (int i = 0; i < n; ++i)
        out[i] =
            f->pred.mu(sig.states[i], f->erosion.at(sig.times[i])) >= 0.0;
      return out;
    }
    case Op::Not: {
      BitVec out = eval(f->children[0]);
      for (auto &b : out) b = !b;
      return out;
    }
    case Op::And: {
      BitVec out(n, 1);
      for (const auto &c : f->children) {
        const BitVec v = eval(c);
        for (int i = 0; i < n; ++i) out[i] = out[i] && v[i];
      }
      return out;
    }
    case Op::Or: {
      BitVec out(n, 0);
      for (const auto &c : f->children) {
        const BitVec v = eval(c);
        for (int i = 0; i < n; ++i) out[i] = out[i] || v[i];
      }
      return out;
    }
    case Op::Always:
    case Op::Eventually: {
      const BitVec v = eval(f->children[0]);
      const auto pc = prefix_counts(v);
      std::vector<int> lo, hi;
      windows(f->t1, f->t2, lo, hi);
      BitVec out(n);
      for (int i = 0; i < n; ++i) {
        const int cnt = pc[hi[i] + 1] - pc[lo[i]];
        const int len = hi[i] - lo[i] + 1;
        out[i] = f->op == Op::Always ? (cnt == len) : (cnt > 0);
      }
      return out;
    }
    case Op::Until: {
      const BitVec l = eval(f->children[0]);
      const BitVec r = eval(f->children[1]);
      const auto pr = prefix_counts(r);
      // nf[i]: first index >= i where l is false (n if none)
      std::vector<int> nf(n + 1);
      nf[n] = n;
      for (int i = n - 1; i >= 0; --i) nf[i] = l[i] ? nf[i + 1] : i;
      std::vector<int> lo, hi;
      windows(f->t1, f->t2, lo, hi);
      BitVec out(n);
      for (int i = 0; i < n; ++i) {
        const int jmax = std::min(hi[i], nf[i] - 1);
        out[i] = jmax >= lo[i] && (pr[jmax + 1] - pr[lo[i]]) > 0;
      }
      return out;
    }
    case Op::Release: {
      const BitVec l = eval(f->children[0]);
      const BitVec r = eval(f->children[1]);
      const auto pr = prefix_counts(r);
      // ft[i]: first index >= i where l is true (n if none)
      std::vector<int> ft(n + 1);
      ft[n] = n;
      for (int i = n - 1; i >= 0; --i) ft[i] = l[i] ? i : ft[i + 1];
      std::vector<int> lo, hi;
      windows(f->t1, f->t2, lo, hi);
      BitVec out(n);
      for (int i = 0; i < n; ++i) {
        const int jmax = std::min(hi[i], ft[i] - 1);
        const int len = jmax - lo[i] + 1;
        out[i] = len <= 0 || (pr[jmax + 1] - pr[lo[i]]) == len;
      }
      return out;
    }
    }
    throw std::logic_error("dense eval: unknown op");
  }
};

} // namespace

bool eval_boolean_dense(const FormulaPtr &f, const SampledSignal &sig) {
  sig.validate();
  check_horizon(f, sig, 0);
  return DenseEval(sig).eval(f)[0] != 0;
}

} // namespace stlfmp
