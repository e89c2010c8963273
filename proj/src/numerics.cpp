#include "stlfmp/numerics.hpp"

#include <cmath>
#include <string>

namespace stlfmp {

std::pair<Vec, Mat> sym_eig(const Mat &a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_eig: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

double sym_eig_max(const Mat &a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double sym_eig_min(const Mat &a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a),
                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Mat chol(const Mat &a) {
  Eigen::LLT<Mat> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    const double piv = sym_eig_min(a);
    throw std::runtime_error("chol: matrix not positive definite, smallest "
                             "eigenvalue " + std::to_string(piv));
  }
  return llt.matrixL();
}

Mat spd_inverse(const Mat &a) {
  auto [w, v] = sym_eig(a);
  if (w.minCoeff() <= 0.0)
    throw std::runtime_error("spd_inverse: matrix not positive definite");
  return v * w.cwiseInverse().asDiagonal() * v.transpose();
}

Mat spd_sqrt(const Mat &a) {
  auto [w, v] = sym_eig(a);
  if (w.minCoeff() < 0.0)
    throw std::runtime_error("spd_sqrt: matrix not positive semidefinite");
  return v * w.cwiseSqrt().asDiagonal() * v.transpose();
}

Mat spd_inv_sqrt(const Mat &a) {
  auto [w, v] = sym_eig(a);
  if (w.minCoeff() <= 0.0)
    throw std::runtime_error("spd_inv_sqrt: matrix not positive definite");
  return v * w.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

namespace {

// Regularized lower incomplete gamma, series for x < s+1, continued
// fraction otherwise (Lentz).
double gamma_p_series(double s, double x) {
  double term = 1.0 / s;
  double sum = term;
  double ap = s;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

double gamma_q_cf(double s, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
}

} // namespace

double gamma_p(double s, double x) {
  if (x < 0.0 || s <= 0.0) throw std::invalid_argument("gamma_p: bad args");
  if (x == 0.0) return 0.0;
  if (x < s + 1.0) return gamma_p_series(s, x);
  return 1.0 - gamma_q_cf(s, x);
}

double chi2_quantile(int dof, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("chi2_quantile: p must be in (0,1)");
  if (dof < 1) throw std::invalid_argument("chi2_quantile: dof must be >= 1");
  if (dof == 2) return -2.0 * std::log1p(-p);
  // Solve P(dof/2, q/2) = p by bisection + Newton polish.
  const double s = 0.5 * dof;
  double lo = 0.0, hi = 1.0;
  while (gamma_p(s, 0.5 * hi) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (gamma_p(s, 0.5 * mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  double q = 0.5 * (lo + hi);
  // Newton: d/dq P(s, q/2) = 0.5 * x^(s-1) e^{-x} / Gamma(s), x = q/2.
  for (int i = 0; i < 8; ++i) {
    const double x = 0.5 * q;
    const double fp = 0.5 * std::exp((s - 1.0) * std::log(x) - x - std::lgamma(s));
    if (fp <= 0.0) break;
    const double step = (gamma_p(s, x) - p) / fp;
    q -= step;
    if (std::abs(step) < 1e-12 * (1.0 + q)) break;
  }
  return q;
}

double quadrature(const std::function<double(double)> &f, double a, double b,
                  int n_panels) {
  if (n_panels < 1) throw std::invalid_argument("quadrature: n_panels >= 1");
  const double h = (b - a) / n_panels;
  double sum = 0.0;
  for (int i = 0; i < n_panels; ++i) {
    const double x0 = a + i * h;
    sum += (h / 6.0) * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
  }
  return sum;
}

} // namespace stlfmp
