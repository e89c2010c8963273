#ifndef STLFMP_SYSTEMS_HPP
#define STLFMP_SYSTEMS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stlfmp/numerics.hpp"

namespace stlfmp {

/// Control-affine diffusion model dX = f(X,u,t) dt + G dW with constant G.
struct SystemModel {
  std::string name;
  int n = 0; // state dim
  int p = 0; // control dim
  std::function<Vec(const Vec &, const Vec &, double)> drift;
  std::function<std::pair<Mat, Mat>(const Vec &, const Vec &, double)>
      jacobians; // (A, B)
  Mat G;         // n x m diffusion matrix
  double sigma = 0.0; // scalar bound, largest singular value of G
  Vec u_lo, u_hi;     // control box
  Mat P;              // position projection (2 x n or 3 x n)

  Vec clamp_control(const Vec &u) const {
    return u.cwiseMax(u_lo).cwiseMin(u_hi);
  }
};

/// Construct one of the benchmark models. Recognized names:
/// double_integrator, dubins, pvtol, quadrotor3d, unicycle.
/// `params` may override control bounds as u_lo_i / u_hi_i per channel.
SystemModel make_system(const std::string &name,
                        const std::map<std::string, double> &params = {});

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;   // one per time
  std::vector<Vec> controls; // one fewer than states

  void validate(const SystemModel &sys) const;
};

struct BlowUpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Classical RK4 with zero-order-hold controls. controls[k] is applied on
/// [k dt, (k+1) dt]. Throws BlowUpError naming the step if the state leaves
/// the finite range.
Trajectory integrate_nominal(const SystemModel &sys, const Vec &x0,
                             const std::vector<Vec> &controls, double dt,
                             int N);

using Policy = std::function<Vec(const Vec &, double)>;

/// Euler-Maruyama rollout X_{k+1} = X_k + f dt + G sqrt(dt) xi_k with a
/// seeded generator. Identical seed gives an identical trajectory.
Trajectory simulate_sde(const SystemModel &sys, const Vec &x0,
                        const Policy &policy, double dt, int N,
                        std::uint64_t seed);

/// Derive a per-rollout seed from a base seed and a rollout index so
/// parallel rollouts stay mutually decorrelated and reproducible.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

} // namespace stlfmp

#endif
