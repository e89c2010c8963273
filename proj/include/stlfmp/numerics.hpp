#ifndef STLFMP_NUMERICS_HPP
#define STLFMP_NUMERICS_HPP

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <utility>

namespace stlfmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Symmetrize on ingest: (A + A^T)/2.
inline Mat symmetrize(const Mat &a) { return 0.5 * (a + a.transpose()); }

/// Eigendecomposition of a symmetric matrix. Eigenvalues ascending,
/// columns of the second element are orthonormal eigenvectors.
std::pair<Vec, Mat> sym_eig(const Mat &a);

double sym_eig_max(const Mat &a);
double sym_eig_min(const Mat &a);

/// Lower Cholesky factor of an SPD matrix. Throws std::runtime_error
/// (reporting the offending pivot) if the matrix is not positive definite.
Mat chol(const Mat &a);

/// SPD inverse and principal square root via the eigendecomposition.
Mat spd_inverse(const Mat &a);
Mat spd_sqrt(const Mat &a);
Mat spd_inv_sqrt(const Mat &a);

/// Quantile of the chi-square distribution. dof = 2 uses the closed form
/// -2 log(1-p); other (even small) dofs invert the regularized lower
/// incomplete gamma to 1e-10.
double chi2_quantile(int dof, double p);

/// Regularized lower incomplete gamma P(s, x) by series/continued fraction.
double gamma_p(double s, double x);

/// Composite Simpson quadrature with n_panels panels.
double quadrature(const std::function<double(double)> &f, double a, double b,
                  int n_panels);

} // namespace stlfmp

#endif
