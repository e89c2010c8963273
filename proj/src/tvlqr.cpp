#include "stlfmp/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace stlfmp {

namespace {

// Linear interpolation of the nominal state, zero-order hold of the
// nominal control (controls[k] active on [t_k, t_{k+1})).
struct NominalInterp {
  const Trajectory &tr;

  int interval(double t) const {
    const auto &ts = tr.times;
    if (t <= ts.front()) return 0;
    if (t >= ts.back()) return static_cast<int>(ts.size()) - 2;
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    return static_cast<int>(it - ts.begin()) - 1;
  }

  Vec state(double t) const {
    const int k = interval(t);
    const double t0 = tr.times[k], t1 = tr.times[k + 1];
    const double a = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    return (1.0 - a) * tr.states[k] + a * tr.states[k + 1];
  }

  Vec control(double t) const { return tr.controls[interval(t)]; }
};

} // namespace

Mat GainSchedule::S_at(double t) const {
  if (dense_times.empty())
    throw std::logic_error("GainSchedule: no dense Riccati table");
  const auto &ts = dense_times;
  if (t <= ts.front()) return dense_S.front();
  if (t >= ts.back()) return dense_S.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const int i = static_cast<int>(it - ts.begin()) - 1;
  const double h = ts[i + 1] - ts[i];
  const double s = (t - ts[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  // cubic Hermite with the exact Riccati derivative at the nodes
  return (2 * s3 - 3 * s2 + 1) * dense_S[i] +
         (s3 - 2 * s2 + s) * h * dense_Sdot[i] +
         (-2 * s3 + 3 * s2) * dense_S[i + 1] +
         (s3 - s2) * h * dense_Sdot[i + 1];
}

GainSchedule tvlqr_synthesize(const SystemModel &sys,
                              const Trajectory &nominal, const Mat &Q,
                              const Mat &R, const Mat &Qf) {
  nominal.validate(sys);
  if (sym_eig_min(Q) < -1e-12)
    throw std::invalid_argument("tvlqr: Q must be PSD");
  if (sym_eig_min(R) <= 0.0)
    throw std::invalid_argument("tvlqr: R must be PD");
  if (sym_eig_min(Qf) <= 0.0)
    throw std::invalid_argument("tvlqr: Qf must be PD");

  NominalInterp nom{nominal};
  const Mat Rinv = spd_inverse(R);
  auto rhs = [&](const Mat &S, double t) {
    const auto [A, B] = sys.jacobians(nom.state(t), nom.control(t), t);
    // -dS/dt = SA + A'S - S B R^-1 B' S + Q, integrated backward
    return Mat(symmetrize(S * A + A.transpose() * S -
                          S * B * Rinv * B.transpose() * S + Q));
  };

  const int N = static_cast<int>(nominal.times.size()) - 1;
  const int nsub = 10;
  GainSchedule g;
  g.times = nominal.times;

  auto rk4_step = [&](const Mat &S, double t, double h) {
    const Mat k1 = rhs(S, t);
    const Mat k2 = rhs(S + 0.5 * h * k1, t - 0.5 * h);
    const Mat k3 = rhs(S + 0.5 * h * k2, t - 0.5 * h);
    const Mat k4 = rhs(S + h * k3, t - h);
    return Mat(symmetrize(S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
  };
  // Adaptive backward advance from t1 to t0: step doubling controls the
  // local error, which handles the stiff terminal boundary layer that a
  // fixed step cannot (strong control authority makes S B R^-1 B' S large
  // near Qf).
  auto advance = [&](Mat S, double t1, double t0) {
    double t = t1, h = t1 - t0;
    while (t - t0 > 1e-13 * (1.0 + std::abs(t0))) {
      h = std::min(h, t - t0);
      const Mat full = rk4_step(S, t, h);
      const Mat half = rk4_step(rk4_step(S, t, 0.5 * h), t - 0.5 * h, 0.5 * h);
      const double err =
          full.allFinite() && half.allFinite()
              ? (full - half).norm()
              : std::numeric_limits<double>::infinity();
      const double tol = 1e-11 * (1.0 + S.norm());
      if (err <= tol || h <= 1e-10 * (t1 - t0)) {
        S = half;
        t -= h;
        if (!S.allFinite() || S.norm() > 1e12)
          throw RiccatiBlowUpError("tvlqr: Riccati blow-up at t = " +
                                   std::to_string(t));
        if (err < 0.03 * tol) h *= 2.0;
      } else {
        h *= 0.5;
      }
    }
    return S;
  };

  // integrate backward, recording the dense grid in backward order first
  std::vector<double> dts;
  std::vector<Mat> dS;
  Mat S = symmetrize(Qf);
  dts.push_back(nominal.times.back());
  dS.push_back(S);
  for (int k = N - 1; k >= 0; --k) {
    const double t1 = nominal.times[k + 1], t0 = nominal.times[k];
    const double h = (t1 - t0) / nsub;
    for (int j = 0; j < nsub; ++j) {
      S = advance(S, t1 - j * h, t1 - (j + 1) * h);
      dts.push_back(t1 - (j + 1) * h);
      dS.push_back(S);
    }
  }
  std::reverse(dts.begin(), dts.end());
  std::reverse(dS.begin(), dS.end());
  g.dense_times = std::move(dts);
  g.dense_S = std::move(dS);
  g.dense_Sdot.resize(g.dense_S.size());
  for (size_t i = 0; i < g.dense_S.size(); ++i)
    g.dense_Sdot[i] = -rhs(g.dense_S[i], g.dense_times[i]);

  // support-time gains and certificate
  g.certificate.times = g.times;
  for (int k = 0; k <= N; ++k) {
    const double t = nominal.times[k];
    const Mat Sk = g.dense_S[static_cast<size_t>(k) * nsub];
    if (sym_eig_min(Sk) <= 0.0)
      throw RiccatiBlowUpError("tvlqr: S lost positive definiteness at t = " +
                               std::to_string(t));
    const auto [A, B] = sys.jacobians(nom.state(t), nom.control(t), t);
    const Mat Klqr = Rinv * B.transpose() * Sk;
    g.S.push_back(Sk);
    g.K.push_back(-Klqr);
    const Mat Sis = spd_inv_sqrt(Sk);
    const Mat core = symmetrize(-Q - Klqr.transpose() * R * Klqr);
    const double c = 0.5 * sym_eig_max(Sis * core * Sis);
    g.certificate.M.push_back(Sk);
    g.certificate.c.push_back(c);
  }
  return g;
}

} // namespace stlfmp
