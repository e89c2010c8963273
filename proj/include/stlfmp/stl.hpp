#ifndef STLFMP_STL_HPP
#define STLFMP_STL_HPP

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stlfmp/numerics.hpp"

namespace stlfmp {

struct InsufficientHorizonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleErosionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyIntervalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Time-varying erosion radius attached to an atom. Empty means no erosion.
struct ErosionSchedule {
  std::vector<double> times;
  std::vector<double> radii; // position-space radii, aligned with times

  bool empty() const { return radii.empty(); }
  static ErosionSchedule constant(double r) {
    ErosionSchedule s;
    s.times = {0.0};
    s.radii = {r};
    return s;
  }
  /// Piecewise-linear interpolation, clamped at the ends.
  double at(double t) const;
  double max_radius() const;
};

/// Atomic predicate over the position projection p = P x of the state.
/// If projection has zero rows the full state is used.
struct Predicate {
  enum class Kind { DiskInside, DiskOutside, BoxInside, BoxOutside, Halfspace };

  Kind kind = Kind::DiskInside;
  Vec center;           // disks
  double radius = 0.0;  // disks
  Vec lower, upper;     // boxes
  Vec normal;           // halfspace
  double offset = 0.0;  // halfspace: satisfied iff normal . p >= offset
  Mat projection;       // position-extraction map P (rows x n), may be empty

  void validate() const;
  Vec project(const Vec &x) const {
    return projection.rows() > 0 ? Vec(projection * x) : x;
  }
  /// Margin function mu(x) with the predicate eroded by radius `er`.
  double mu(const Vec &x, double er) const;
  /// Gradient of mu with respect to the full state x.
  Vec mu_grad(const Vec &x, double er) const;
  /// Negated predicate (set complement), used by NNF conversion.
  Predicate negated() const;
  /// True if the eroded satisfaction set is empty.
  bool erosion_infeasible(double er) const;
};

/// Erode a predicate by a fixed position-space radius, shrinking its
/// satisfaction set. Throws InfeasibleErosionError if the set empties.
Predicate erode_predicate(const Predicate &p, double radius);

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// STL abstract syntax tree. Release is the dual of Until introduced when
/// NNF conversion pushes a negation through an Until node.
struct Formula {
  enum class Op { Atom, Not, And, Or, Always, Eventually, Until, Release };

  Op op = Op::Atom;
  std::string name;            // atom label, for diagnostics
  Predicate pred;              // Atom only
  ErosionSchedule erosion;     // Atom only
  double t1 = 0.0, t2 = 0.0;   // temporal interval [t1, t2]
  std::vector<FormulaPtr> children;

  static FormulaPtr atom(Predicate p, std::string name = "");
  static FormulaPtr lnot(FormulaPtr f);
  static FormulaPtr land(std::vector<FormulaPtr> fs);
  static FormulaPtr lor(std::vector<FormulaPtr> fs);
  static FormulaPtr always(double a, double b, FormulaPtr f);
  static FormulaPtr eventually(double a, double b, FormulaPtr f);
  static FormulaPtr until(double a, double b, FormulaPtr l, FormulaPtr r);
  static FormulaPtr release(double a, double b, FormulaPtr l, FormulaPtr r);
};

/// Negation Normal Form: negations pushed to the leaves and absorbed into
/// predicate kinds; Not nodes disappear entirely.
FormulaPtr to_nnf(const FormulaPtr &f);

/// Minimum signal duration needed to evaluate f at time 0.
double horizon(const FormulaPtr &f);

/// Parse the textual formula grammar. Atoms are identifiers resolved
/// through `bindings`; operators are !, &, |, F[a,b], G[a,b] and infix
/// U[a,b].
FormulaPtr parse_formula(const std::string &text,
                         const std::map<std::string, Predicate> &bindings);

/// Uniformly or non-uniformly sampled state signal.
struct SampledSignal {
  std::vector<double> times;
  std::vector<Vec> states;

  void validate() const;
  int size() const { return static_cast<int>(times.size()); }
};

bool eval_boolean(const FormulaPtr &f, const SampledSignal &sig, int t_index);
double robustness(const FormulaPtr &f, const SampledSignal &sig, int t_index);

struct SmoothRobustness {
  double value = 0.0;
  std::vector<Vec> grad; // d value / d states[k], one entry per sample
};

/// Sound smooth under-approximation of the robustness (always <= the exact
/// value), with the gradient w.r.t. every state sample by reverse
/// accumulation.
SmoothRobustness smooth_robustness(const FormulaPtr &f,
                                   const SampledSignal &sig, int t_index,
                                   double beta);

/// Upper bound on robustness - smooth_robustness: depth * log(K_max) / beta.
double smooth_gap_bound(const FormulaPtr &f, const SampledSignal &sig,
                        int t_index, double beta);

struct TubeProfile; // defined in prt.hpp

/// Attach per-support-time erosion radii (the position projection of the
/// tube cross-sections) to every atom of an NNF formula. If
/// `time_invariant` is set, the largest radius is used everywhere.
FormulaPtr erode_formula(const FormulaPtr &f, const TubeProfile &tube,
                         const Mat &projection, bool time_invariant = false);

/// Attach a fixed erosion radius to every atom.
FormulaPtr erode_formula_constant(const FormulaPtr &f, double radius);

/// Attach an explicit position-space erosion schedule to every atom.
FormulaPtr erode_formula_with(const FormulaPtr &f,
                              const ErosionSchedule &sched);

/// Fast Boolean evaluation at t=0 over a (possibly long) dense signal.
/// Linear-time sliding-window algorithms; must agree with eval_boolean.
bool eval_boolean_dense(const FormulaPtr &f, const SampledSignal &sig);

} // namespace stlfmp

#endif
