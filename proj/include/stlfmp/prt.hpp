#ifndef STLFMP_PRT_HPP
#define STLFMP_PRT_HPP

#include <vector>

#include "stlfmp/numerics.hpp"
#include "stlfmp/stl.hpp"

namespace stlfmp {

/// Time-varying contraction certificate: metric M_t > 0 and rate c_t < 0
/// sampled on a support grid, interpolated in between.
struct ContractionCertificate {
  std::vector<double> times;
  std::vector<Mat> M;
  std::vector<double> c;

  void validate() const;
  double metric_norm_bound() const; // sup_t ||M_t||
  double metric_lower() const;      // m1 with m1 I <= M_t
  Mat M_at(double t) const;         // linear interpolation, clamped
  double c_at(double t) const;
};

/// Probabilistic reachable tube: metric-space radius r_t at each support
/// time such that the whole deviation path stays inside with prob >= 1-delta.
struct TubeProfile {
  std::vector<double> times;
  std::vector<Mat> M;
  std::vector<double> radii; // metric units
  double delta = 0.0;
  double epsilon = 0.0;
  double dt_split = 0.0;

  double radius_at(double t) const; // linear interpolation, clamped
  Mat M_at(double t) const;
};

/// Whole-horizon tube radius profile. sigma bounds the diffusion
/// (||G|| <= sigma), n is the state dimension, dt_split the union-bound
/// segment length, epsilon the free parameter in (0,1).
TubeProfile tube_radius_profile(const ContractionCertificate &cert,
                                double sigma, int n, double delta, double T,
                                double dt_split, double epsilon);

/// Minimize the radius at t = T over epsilon in [0.05, 0.995] by
/// golden-section search. Only the epsilon-dependent factor matters, so the
/// integrals are not recomputed.
double optimize_epsilon(int n, double delta, double T, double dt_split);

/// Largest position deviation ||P e|| over the metric ball ||e||_M <= r:
/// r * sqrt(lambda_max(P M^{-1} P^T)).
double projected_radius(const Mat &M, double r, const Mat &P);

/// Constant-rate tube for the trajectory-independent controller branch.
/// The metric-space profile assumes ||M_t|| <= 1; the Euclidean radius is
/// sqrt(beta_bar) times the largest metric radius over the horizon.
std::pair<TubeProfile, double>
global_tvccm_radius(double c, double sigma, int n, double delta, double T,
                    double dt_split, double epsilon, double beta_bar);

} // namespace stlfmp

#endif
