#include "stlfmp/controllers.hpp"

#include <algorithm>

namespace stlfmp {

Policy make_policy(const GainSchedule &sched, const Trajectory &nominal,
                   const SystemModel &sys, SaturationStats *stats) {
  // a single shared gain (region-sampled TVCCM) is replicated over the grid
  std::vector<Mat> gains = sched.K;
  if (gains.size() == 1)
    gains.assign(nominal.times.size(), sched.K.front());
  if (gains.size() != nominal.times.size())
    throw std::invalid_argument("make_policy: schedule/nominal mismatch");
  auto times = nominal.times;
  auto states = nominal.states;
  auto controls = nominal.controls;
  Vec lo = sys.u_lo, hi = sys.u_hi;
  return [times, states, controls, gains, lo, hi, stats](const Vec &x,
                                                         double t) {
    const double T = times.back();
    if (t < -1e-9 || t > T + 1e-9)
      throw std::out_of_range("policy: t outside the nominal horizon");
    int k;
    if (t >= T)
      k = static_cast<int>(times.size()) - 2;
    else {
      const auto it = std::upper_bound(times.begin(), times.end(), t);
      k = std::max(0, static_cast<int>(it - times.begin()) - 1);
    }
    const double a =
        std::clamp((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0);
    const Vec xs = (1.0 - a) * states[k] + a * states[k + 1];
    const Vec us = controls[k];
    Vec u = us + gains[k] * (x - xs);
    const Vec uc = u.cwiseMax(lo).cwiseMin(hi);
    if (stats) {
      stats->total.fetch_add(1, std::memory_order_relaxed);
      if ((uc - u).norm() > 1e-12)
        stats->saturated.fetch_add(1, std::memory_order_relaxed);
    }
    return uc;
  };
}

} // namespace stlfmp
