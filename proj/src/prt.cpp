#include "stlfmp/prt.hpp"

#include <algorithm>
#include <cmath>

namespace stlfmp {

namespace {

// Piecewise-linear interpolation on a support grid, clamped at the ends.
double lerp_at(const std::vector<double> &ts, const std::vector<double> &vs,
               double t) {
  if (vs.size() == 1 || t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const size_t k = it - ts.begin();
  const double a = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
  return (1.0 - a) * vs[k - 1] + a * vs[k];
}

Mat lerp_mat_at(const std::vector<double> &ts, const std::vector<Mat> &vs,
                double t) {
  if (vs.size() == 1 || t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const size_t k = it - ts.begin();
  const double a = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
  return (1.0 - a) * vs[k - 1] + a * vs[k];
}

// psi(t) = int_0^t c, Psi(t) = int_0^t sbar^2 e^{-2 psi}, both accumulated
// with composite Simpson on a uniform grid. psi between nodes is evaluated
// by cubic Hermite interpolation (its derivative c is known exactly), which
// keeps the O(h^4) accuracy of the node values.
class TubeIntegrals {
public:
  TubeIntegrals(std::function<double(double)> c,
                std::function<double(double)> sbar, double t_max,
                double h_target)
      : c_(std::move(c)), sbar_(std::move(sbar)) {
    n_ = std::max(16, static_cast<int>(std::ceil(t_max / h_target)));
    h_ = t_max / n_;
    psi_.resize(n_ + 1);
    Psi_.resize(n_ + 1);
    psi_[0] = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double t0 = i * h_, t1 = t0 + h_, tm = t0 + 0.5 * h_;
      psi_[i + 1] =
          psi_[i] + (h_ / 6.0) * (c_(t0) + 4.0 * c_(tm) + c_(t1));
    }
    Psi_[0] = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double t0 = i * h_, t1 = t0 + h_, tm = t0 + 0.5 * h_;
      Psi_[i + 1] = Psi_[i] + (h_ / 6.0) * (f(t0) + 4.0 * f(tm) + f(t1));
    }
  }

  double psi(double t) const {
    if (t <= 0.0) return 0.0;
    const int i = std::min(static_cast<int>(t / h_), n_ - 1);
    const double s = (t - i * h_) / h_;
    const double p0 = psi_[i], p1 = psi_[i + 1];
    const double d0 = h_ * c_(i * h_), d1 = h_ * c_((i + 1) * h_);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * d0 +
           (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * d1;
  }

  double Psi(double t) const {
    if (t <= 0.0) return 0.0;
    const int i = std::min(static_cast<int>(t / h_), n_ - 1);
    const double t0 = i * h_;
    double v = Psi_[i];
    if (t > t0) {
      const double tm = 0.5 * (t0 + t);
      v += ((t - t0) / 6.0) * (f(t0) + 4.0 * f(tm) + f(t));
    }
    return v;
  }

private:
  double f(double t) const {
    const double s = sbar_(t);
    return s * s * std::exp(-2.0 * psi(t));
  }

  std::function<double(double)> c_, sbar_;
  int n_ = 0;
  double h_ = 0.0;
  std::vector<double> psi_, Psi_;
};

double eps_factor(double epsilon, int n, double log_term) {
  const double e2 = epsilon * epsilon;
  const double eps1 = std::log(1.0 / (1.0 - e2)) / e2;
  const double eps2 = 2.0 / e2;
  return std::sqrt(eps1 * n + eps2 * log_term);
}

} // namespace

void ContractionCertificate::validate() const {
  if (times.size() != M.size() || times.size() != c.size() || times.empty())
    throw std::invalid_argument("certificate: misaligned support arrays");
  for (double ci : c)
    if (!(ci < 0.0))
      throw std::invalid_argument(
          "certificate: contraction rate must be negative everywhere");
  for (const Mat &m : M)
    if (sym_eig_min(m) <= 0.0)
      throw std::invalid_argument("certificate: metric must be positive "
                                  "definite");
}

double ContractionCertificate::metric_norm_bound() const {
  double b = 0.0;
  for (const Mat &m : M) b = std::max(b, sym_eig_max(m));
  return b;
}

double ContractionCertificate::metric_lower() const {
  double b = std::numeric_limits<double>::infinity();
  for (const Mat &m : M) b = std::min(b, sym_eig_min(m));
  return b;
}

Mat ContractionCertificate::M_at(double t) const {
  return lerp_mat_at(times, M, t);
}
double ContractionCertificate::c_at(double t) const {
  return lerp_at(times, c, t);
}

double TubeProfile::radius_at(double t) const {
  return lerp_at(times, radii, t);
}
Mat TubeProfile::M_at(double t) const { return lerp_mat_at(times, M, t); }

TubeProfile tube_radius_profile(const ContractionCertificate &cert,
                                double sigma, int n, double delta, double T,
                                double dt_split, double epsilon) {
  cert.validate();
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("tube: delta must be in (0,1)");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("tube: epsilon must be in (0,1)");
  if (!(dt_split > 0.0) || !(T > 0.0))
    throw std::invalid_argument("tube: T and dt_split must be > 0");
  const double log_term = std::log(2.0 * T / (delta * dt_split));
  if (!std::isfinite(log_term))
    throw std::invalid_argument("tube: delta * dt_split underflows the "
                                "union-bound log term");
  const double tail = eps_factor(epsilon, n, log_term);

  const int K = std::max(1, static_cast<int>(std::ceil(T / dt_split - 1e-9)));
  const double t_max = K * dt_split;
  double h_support = t_max;
  for (size_t i = 1; i < cert.times.size(); ++i)
    h_support = std::min(h_support, cert.times[i] - cert.times[i - 1]);
  const double h_target = std::min(h_support / 8.0, t_max / 4096.0);

  std::vector<double> norms(cert.M.size());
  for (size_t i = 0; i < cert.M.size(); ++i) norms[i] = sym_eig_max(cert.M[i]);
  auto sbar = [&](double t) {
    return std::sqrt(lerp_at(cert.times, norms, t)) * sigma;
  };
  auto c_of = [&](double t) { return cert.c_at(t); };
  TubeIntegrals I(c_of, sbar, t_max, h_target);

  TubeProfile tube;
  tube.delta = delta;
  tube.epsilon = epsilon;
  tube.dt_split = dt_split;
  for (size_t i = 0; i < cert.times.size(); ++i) {
    const double t = cert.times[i];
    if (t > T + 1e-9) break;
    const int k = std::min(static_cast<int>(std::floor(t / dt_split)), K - 1);
    const double t0 = k * dt_split, t1 = (k + 1) * dt_split;
    const double seg =
        std::exp(2.0 * I.psi(t0)) * (I.Psi(t1) - I.Psi(t0));
    const double hist = std::exp(2.0 * I.psi(t)) * I.Psi(t);
    const double r =
        (std::sqrt(std::max(0.0, hist)) + std::sqrt(std::max(0.0, seg))) *
        tail;
    tube.times.push_back(t);
    tube.M.push_back(cert.M[i]);
    tube.radii.push_back(r);
  }
  return tube;
}

double optimize_epsilon(int n, double delta, double T, double dt_split) {
  const double log_term = std::log(2.0 * T / (delta * dt_split));
  auto g = [&](double e) { return eps_factor(e, n, log_term); };
  double a = 0.05, b = 0.995;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = g(c), fd = g(d);
  for (int it = 0; it < 200 && b - a > 1e-10; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = g(d);
    }
  }
  return 0.5 * (a + b);
}

double projected_radius(const Mat &M, double r, const Mat &P) {
  if (r < 0.0) throw std::invalid_argument("projected_radius: r < 0");
  const Mat Minv = spd_inverse(M);
  return r * std::sqrt(sym_eig_max(P * Minv * P.transpose()));
}

std::pair<TubeProfile, double>
global_tvccm_radius(double c, double sigma, int n, double delta, double T,
                    double dt_split, double epsilon, double beta_bar) {
  if (!(c < 0.0))
    throw std::invalid_argument("global tube: rate must be negative");
  if (beta_bar < 1.0)
    throw std::invalid_argument("global tube: beta_bar must be >= 1");
  const double log_term = std::log(2.0 * T / (delta * dt_split));
  const double tail = eps_factor(epsilon, n, log_term);
  TubeProfile tube;
  tube.delta = delta;
  tube.epsilon = epsilon;
  tube.dt_split = dt_split;
  const int steps = 200;
  const double seg = sigma * std::sqrt((std::exp(-2.0 * c * dt_split) - 1.0) /
                                       (-2.0 * c));
  for (int i = 0; i <= steps; ++i) {
    const double t = T * i / steps;
    const double hist =
        sigma * std::sqrt((1.0 - std::exp(2.0 * c * t)) / (-2.0 * c));
    tube.times.push_back(t);
    tube.M.push_back(Mat::Identity(n, n));
    tube.radii.push_back((hist + seg) * tail);
  }
  const double r_max =
      *std::max_element(tube.radii.begin(), tube.radii.end());
  return {tube, std::sqrt(beta_bar) * r_max};
}

// --- formula erosion -------------------------------------------------------

namespace {

FormulaPtr erode_rec(const FormulaPtr &f,
                     const std::function<ErosionSchedule()> &make_sched) {
  using Op = Formula::Op;
  if (f->op == Op::Not)
    throw std::invalid_argument(
        "erode_formula: formula must be in NNF (convert with to_nnf)");
  if (f->op == Op::Atom) {
    Formula g = *f;
    g.erosion = make_sched();
    if (g.pred.erosion_infeasible(g.erosion.max_radius()))
      throw InfeasibleErosionError("erosion empties atom '" + f->name + "'");
    return std::make_shared<const Formula>(std::move(g));
  }
  Formula g = *f;
  for (auto &ch : g.children) ch = erode_rec(ch, make_sched);
  return std::make_shared<const Formula>(std::move(g));
}

} // namespace

FormulaPtr erode_formula(const FormulaPtr &f, const TubeProfile &tube,
                         const Mat &projection, bool time_invariant) {
  ErosionSchedule sched;
  sched.times = tube.times;
  sched.radii.resize(tube.radii.size());
  for (size_t i = 0; i < tube.radii.size(); ++i)
    sched.radii[i] = projected_radius(tube.M[i], tube.radii[i], projection);
  if (time_invariant) sched = ErosionSchedule::constant(sched.max_radius());
  return erode_rec(f, [&] { return sched; });
}

FormulaPtr erode_formula_constant(const FormulaPtr &f, double radius) {
  if (radius < 0.0)
    throw std::invalid_argument("erode_formula_constant: radius < 0");
  return erode_rec(f, [&] { return ErosionSchedule::constant(radius); });
}

FormulaPtr erode_formula_with(const FormulaPtr &f,
                              const ErosionSchedule &sched) {
  for (double r : sched.radii)
    if (r < 0.0)
      throw std::invalid_argument("erode_formula_with: negative radius");
  return erode_rec(f, [&] { return sched; });
}

} // namespace stlfmp
