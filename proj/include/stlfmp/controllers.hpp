#ifndef STLFMP_CONTROLLERS_HPP
#define STLFMP_CONTROLLERS_HPP

#include <atomic>
#include <vector>

#include "stlfmp/prt.hpp"
#include "stlfmp/systems.hpp"

namespace stlfmp {

/// Tracking feedback along a nominal trajectory. The policy applies
/// u = u*(t) + K_k (X - x*(t)), so TVLQR gains are stored with the minus
/// sign already folded in (K = -R^{-1} B' S).
struct GainSchedule {
  std::vector<double> times;
  std::vector<Mat> K; // p x n, zero-order hold per interval

  // TVLQR data
  std::vector<Mat> S;
  // dense Riccati table for defect checks: S and its exact derivative
  // from the Riccati right-hand side, cubic-Hermite interpolated
  std::vector<double> dense_times;
  std::vector<Mat> dense_S, dense_Sdot;
  Mat S_at(double t) const;

  // TVCCM data
  std::vector<Mat> W, Y;
  Mat W_bar;
  double beta_bar = 0.0;
  double rate = 0.0;          // prescribed rate c
  double proj_weight = 0.0;   // objective weight w
  std::vector<Mat> A, B;      // Jacobians the LMIs were built with
  Mat proj;                   // P used in the objective

  ContractionCertificate certificate;
};

struct RiccatiBlowUpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TvccmInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Backward RK4 integration of the differential Riccati equation along the
/// nominal trajectory. Q >= 0, R > 0, Qf > 0.
GainSchedule tvlqr_synthesize(const SystemModel &sys,
                              const Trajectory &nominal, const Mat &Q,
                              const Mat &R, const Mat &Qf);

struct TvccmOptions {
  double c = -0.8;        // target contraction rate, must be < 0
  double w = 1.0;         // projection weight in the objective
  int max_iters = 4000;
  double feas_tol = 1e-6; // required -lambda_max margin on every LMI
  std::uint64_t seed = 0; // sampling seed for the region branch
  int n_samples = 64;     // Jacobian samples for the region branch
};

/// Trajectory-dependent TVCCM: per-support-time (W_k, Y_k) plus shared
/// (W_bar, beta_bar), solved by exact-penalty first-order descent on the
/// sampled LMI program. Throws TvccmInfeasibleError if the residuals cannot
/// be pushed below -feas_tol at the prescribed rate.
GainSchedule tvccm_synthesize(const SystemModel &sys,
                              const Trajectory &nominal,
                              const TvccmOptions &opt);

/// Trajectory-independent TVCCM: one shared (W, Y) enforced at Jacobian
/// samples drawn from the state box [x_lo, x_hi] and the control box.
GainSchedule tvccm_synthesize_global(const SystemModel &sys, const Vec &x_lo,
                                     const Vec &x_hi,
                                     const TvccmOptions &opt);

struct TvccmReport {
  std::vector<double> lmi_max_eig;  // per k
  std::vector<double> w_min_eig;    // lambda_min(W_k) (>= 1 required)
  std::vector<double> w_gap_eig;    // lambda_max(W_k - W_bar) (<= 0)
  double wbar_beta_gap = 0.0;       // lambda_max(W_bar - beta_bar I)
  double penalty_value = 0.0;       // exact-penalty sum at the solution
  bool feasible = false;
};

/// Independent re-evaluation of the TVCCM constraints on a schedule.
TvccmReport tvccm_verify(const GainSchedule &sched, double tol = 1e-6);

struct SaturationStats {
  std::atomic<std::uint64_t> saturated{0};
  std::atomic<std::uint64_t> total{0};
  double fraction() const {
    const auto t = total.load();
    return t == 0 ? 0.0 : static_cast<double>(saturated.load()) / t;
  }
};

/// Tracking policy u = u*(t) + K_k (X - x*(t)) with linearly interpolated
/// x*, u* and zero-order-hold gains, clamped to the control box. Saturation
/// events are counted in `stats` when provided.
Policy make_policy(const GainSchedule &sched, const Trajectory &nominal,
                   const SystemModel &sys, SaturationStats *stats = nullptr);

} // namespace stlfmp

#endif
