#include "stlfmp/stl.hpp"

#include <algorithm>
#include <cmath>

namespace stlfmp {

double ErosionSchedule::at(double t) const {
  if (radii.empty()) return 0.0;
  if (radii.size() == 1 || t <= times.front()) return radii.front();
  if (t >= times.back()) return radii.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const size_t k = it - times.begin();
  const double t0 = times[k - 1], t1 = times[k];
  const double a = (t - t0) / (t1 - t0);
  return (1.0 - a) * radii[k - 1] + a * radii[k];
}

double ErosionSchedule::max_radius() const {
  if (radii.empty()) return 0.0;
  return *std::max_element(radii.begin(), radii.end());
}

void Predicate::validate() const {
  switch (kind) {
  case Kind::DiskInside:
  case Kind::DiskOutside:
    if (!(radius > 0.0))
      throw std::invalid_argument("predicate: disk radius must be > 0");
    break;
  case Kind::BoxInside:
  case Kind::BoxOutside:
    if (lower.size() != upper.size() || lower.size() == 0)
      throw std::invalid_argument("predicate: box bounds dimension mismatch");
    for (int i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw std::invalid_argument("predicate: box lower must be < upper");
    break;
  case Kind::Halfspace:
    if (normal.size() == 0 || normal.norm() == 0.0)
      throw std::invalid_argument("predicate: halfspace normal must be nonzero");
    break;
  }
}

double Predicate::mu(const Vec &x, double er) const {
  const Vec p = project(x);
  switch (kind) {
  case Kind::DiskInside:
    return (radius - er) - (p - center).norm();
  case Kind::DiskOutside:
    return (p - center).norm() - (radius + er);
  case Kind::BoxInside: {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.size(); ++i) {
      m = std::min(m, p[i] - (lower[i] + er));
      m = std::min(m, (upper[i] - er) - p[i]);
    }
    return m;
  }
  case Kind::BoxOutside: {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.size(); ++i) {
      m = std::max(m, (lower[i] - er) - p[i]);
      m = std::max(m, p[i] - (upper[i] + er));
    }
    return m;
  }
  case Kind::Halfspace:
    return normal.dot(p) - (offset + er * normal.norm());
  }
  return 0.0;
}

Vec Predicate::mu_grad(const Vec &x, double er) const {
  const Vec p = project(x);
  Vec gp = Vec::Zero(p.size());
  switch (kind) {
  case Kind::DiskInside:
  case Kind::DiskOutside: {
    const Vec d = p - center;
    const double nd = d.norm();
    if (nd > 1e-12) gp = d / nd;
    if (kind == Kind::DiskInside) gp = -gp;
    break;
  }
  case Kind::BoxInside: {
    // subgradient at the active face
    int best = 0;
    double sign = 1.0, m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] - (lower[i] + er) < m) { m = p[i] - (lower[i] + er); best = i; sign = 1.0; }
      if ((upper[i] - er) - p[i] < m) { m = (upper[i] - er) - p[i]; best = i; sign = -1.0; }
    }
    gp[best] = sign;
    break;
  }
  case Kind::BoxOutside: {
    int best = 0;
    double sign = 1.0, m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.size(); ++i) {
      if ((lower[i] - er) - p[i] > m) { m = (lower[i] - er) - p[i]; best = i; sign = -1.0; }
      if (p[i] - (upper[i] + er) > m) { m = p[i] - (upper[i] + er); best = i; sign = 1.0; }
    }
    gp[best] = sign;
    break;
  }
  case Kind::Halfspace:
    gp = normal;
    break;
  }
  if (projection.rows() > 0) return projection.transpose() * gp;
  return gp;
}

Predicate Predicate::negated() const {
  Predicate q = *this;
  switch (kind) {
  case Kind::DiskInside: q.kind = Kind::DiskOutside; break;
  case Kind::DiskOutside: q.kind = Kind::DiskInside; break;
  case Kind::BoxInside: q.kind = Kind::BoxOutside; break;
  case Kind::BoxOutside: q.kind = Kind::BoxInside; break;
  case Kind::Halfspace:
    q.normal = -normal;
    q.offset = -offset;
    break;
  }
  return q;
}

bool Predicate::erosion_infeasible(double er) const {
  switch (kind) {
  case Kind::DiskInside:
    return radius - er <= 0.0;
  case Kind::BoxInside:
    for (int i = 0; i < lower.size(); ++i)
      if (upper[i] - lower[i] <= 2.0 * er) return true;
    return false;
  default:
    return false; // complements and halfspaces never empty out
  }
}

Predicate erode_predicate(const Predicate &p, double radius) {
  if (radius < 0.0) throw std::invalid_argument("erode_predicate: radius < 0");
  if (p.erosion_infeasible(radius))
    throw InfeasibleErosionError("erosion radius " + std::to_string(radius) +
                                 " empties the predicate set");
  Predicate q = p;
  switch (p.kind) {
  case Predicate::Kind::DiskInside: q.radius = p.radius - radius; break;
  case Predicate::Kind::DiskOutside: q.radius = p.radius + radius; break;
  case Predicate::Kind::BoxInside:
    q.lower = p.lower.array() + radius;
    q.upper = p.upper.array() - radius;
    break;
  case Predicate::Kind::BoxOutside:
    q.lower = p.lower.array() - radius;
    q.upper = p.upper.array() + radius;
    break;
  case Predicate::Kind::Halfspace:
    q.offset = p.offset + radius * p.normal.norm();
    break;
  }
  return q;
}

namespace {
FormulaPtr make(Formula f) { return std::make_shared<const Formula>(std::move(f)); }

void check_interval(double a, double b) {
  if (a < 0.0 || b < a)
    throw std::invalid_argument("formula: interval must satisfy 0 <= t1 <= t2");
}
} // namespace

FormulaPtr Formula::atom(Predicate p, std::string name) {
  p.validate();
  Formula f;
  f.op = Op::Atom;
  f.pred = std::move(p);
  f.name = std::move(name);
  return make(std::move(f));
}
FormulaPtr Formula::lnot(FormulaPtr c) {
  Formula f;
  f.op = Op::Not;
  f.children = {std::move(c)};
  return make(std::move(f));
}
FormulaPtr Formula::land(std::vector<FormulaPtr> fs) {
  if (fs.empty()) throw std::invalid_argument("and: needs children");
  Formula f;
  f.op = Op::And;
  f.children = std::move(fs);
  return make(std::move(f));
}
FormulaPtr Formula::lor(std::vector<FormulaPtr> fs) {
  if (fs.empty()) throw std::invalid_argument("or: needs children");
  Formula f;
  f.op = Op::Or;
  f.children = std::move(fs);
  return make(std::move(f));
}
FormulaPtr Formula::always(double a, double b, FormulaPtr c) {
  check_interval(a, b);
  Formula f;
  f.op = Op::Always;
  f.t1 = a;
  f.t2 = b;
  f.children = {std::move(c)};
  return make(std::move(f));
}
FormulaPtr Formula::eventually(double a, double b, FormulaPtr c) {
  check_interval(a, b);
  Formula f;
  f.op = Op::Eventually;
  f.t1 = a;
  f.t2 = b;
  f.children = {std::move(c)};
  return make(std::move(f));
}
FormulaPtr Formula::until(double a, double b, FormulaPtr l, FormulaPtr r) {
  check_interval(a, b);
  Formula f;
  f.op = Op::Until;
  f.t1 = a;
  f.t2 = b;
  f.children = {std::move(l), std::move(r)};
  return make(std::move(f));
}
FormulaPtr Formula::release(double a, double b, FormulaPtr l, FormulaPtr r) {
  check_interval(a, b);
  Formula f;
  f.op = Op::Release;
  f.t1 = a;
  f.t2 = b;
  f.children = {std::move(l), std::move(r)};
  return make(std::move(f));
}

namespace {
FormulaPtr nnf_rec(const FormulaPtr &f, bool neg) {
  using Op = Formula::Op;
  switch (f->op) {
  case Op::Atom: {
    if (!neg) return f;
    Formula g = *f;
    g.pred = f->pred.negated();
    g.name = "!" + f->name;
    return std::make_shared<const Formula>(std::move(g));
  }
  case Op::Not:
    return nnf_rec(f->children[0], !neg);
  case Op::And:
  case Op::Or: {
    std::vector<FormulaPtr> cs;
    cs.reserve(f->children.size());
    for (const auto &c : f->children) cs.push_back(nnf_rec(c, neg));
    const bool is_and = (f->op == Op::And) != neg;
    return is_and ? Formula::land(std::move(cs)) : Formula::lor(std::move(cs));
  }
  case Op::Always:
    return neg ? Formula::eventually(f->t1, f->t2, nnf_rec(f->children[0], true))
               : Formula::always(f->t1, f->t2, nnf_rec(f->children[0], false));
  case Op::Eventually:
    return neg ? Formula::always(f->t1, f->t2, nnf_rec(f->children[0], true))
               : Formula::eventually(f->t1, f->t2, nnf_rec(f->children[0], false));
  case Op::Until:
    return neg ? Formula::release(f->t1, f->t2, nnf_rec(f->children[0], true),
                                  nnf_rec(f->children[1], true))
               : Formula::until(f->t1, f->t2, nnf_rec(f->children[0], false),
                                nnf_rec(f->children[1], false));
  case Op::Release:
    return neg ? Formula::until(f->t1, f->t2, nnf_rec(f->children[0], true),
                                nnf_rec(f->children[1], true))
               : Formula::release(f->t1, f->t2, nnf_rec(f->children[0], false),
                                  nnf_rec(f->children[1], false));
  }
  throw std::logic_error("nnf: unknown op");
}
} // namespace

FormulaPtr to_nnf(const FormulaPtr &f) { return nnf_rec(f, false); }

double horizon(const FormulaPtr &f) {
  using Op = Formula::Op;
  switch (f->op) {
  case Op::Atom:
    return 0.0;
  case Op::Not:
    return horizon(f->children[0]);
  case Op::And:
  case Op::Or: {
    double h = 0.0;
    for (const auto &c : f->children) h = std::max(h, horizon(c));
    return h;
  }
  case Op::Always:
  case Op::Eventually:
    return f->t2 + horizon(f->children[0]);
  case Op::Until:
  case Op::Release:
    return f->t2 +
           std::max(horizon(f->children[0]), horizon(f->children[1]));
  }
  throw std::logic_error("horizon: unknown op");
}

void SampledSignal::validate() const {
  if (times.size() != states.size() || times.size() < 2)
    throw std::invalid_argument("signal: need >= 2 aligned samples");
  if (times.front() != 0.0)
    throw std::invalid_argument("signal: times must start at 0");
  for (size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("signal: times must be strictly increasing");
}

} // namespace stlfmp
