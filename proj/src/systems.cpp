#include "stlfmp/systems.hpp"

#include <cmath>

namespace stlfmp {

namespace {

Mat selector(int rows, int n) {
  Mat P = Mat::Zero(rows, n);
  for (int i = 0; i < rows; ++i) P(i, i) = 1.0;
  return P;
}

void apply_bound_overrides(SystemModel &m,
                           const std::map<std::string, double> &params) {
  for (int i = 0; i < m.p; ++i) {
    if (auto it = params.find("u_lo_" + std::to_string(i)); it != params.end())
      m.u_lo[i] = it->second;
    if (auto it = params.find("u_hi_" + std::to_string(i)); it != params.end())
      m.u_hi[i] = it->second;
  }
  for (int i = 0; i < m.p; ++i)
    if (!(m.u_lo[i] < m.u_hi[i]))
      throw std::invalid_argument("make_system: control bounds need lo < hi");
}

SystemModel double_integrator() {
  SystemModel m;
  m.name = "double_integrator";
  m.n = 4;
  m.p = 2;
  m.drift = [](const Vec &x, const Vec &u, double) {
    Vec dx(4);
    dx << x[2], x[3], u[0], u[1];
    return dx;
  };
  m.jacobians = [](const Vec &, const Vec &, double) {
    Mat A = Mat::Zero(4, 4), B = Mat::Zero(4, 2);
    A(0, 2) = A(1, 3) = 1.0;
    B(2, 0) = B(3, 1) = 1.0;
    return std::make_pair(A, B);
  };
  m.G = 0.02 * Mat::Identity(4, 4);
  m.u_lo = Vec::Constant(2, -3.0);
  m.u_hi = Vec::Constant(2, 3.0);
  m.P = selector(2, 4);
  return m;
}

SystemModel dubins() {
  SystemModel m;
  m.name = "dubins";
  m.n = 4; // (px, py, theta, v), controls (a, omega)
  m.p = 2;
  m.drift = [](const Vec &x, const Vec &u, double) {
    Vec dx(4);
    dx << x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), u[1], u[0];
    return dx;
  };
  m.jacobians = [](const Vec &x, const Vec &, double) {
    Mat A = Mat::Zero(4, 4), B = Mat::Zero(4, 2);
    const double c = std::cos(x[2]), s = std::sin(x[2]), v = x[3];
    A(0, 2) = -v * s;
    A(0, 3) = c;
    A(1, 2) = v * c;
    A(1, 3) = s;
    B(2, 1) = 1.0;
    B(3, 0) = 1.0;
    return std::make_pair(A, B);
  };
  Vec gd(4);
  gd << 0.02, 0.02, 0.01, 0.02;
  m.G = gd.asDiagonal();
  m.u_lo = Vec(2);
  m.u_hi = Vec(2);
  m.u_lo << -2.0, -0.8;
  m.u_hi << 2.0, 0.8;
  m.P = selector(2, 4);
  return m;
}

SystemModel pvtol() {
  SystemModel m;
  m.name = "pvtol";
  m.n = 6; // (x, z, phi, vx, vz, r) body-frame velocities
  m.p = 2; // (u_left, u_right)
  const double mass = 0.486, J = 0.00383, g = 9.81, l = 0.25;
  m.drift = [=](const Vec &x, const Vec &u, double) {
    const double phi = x[2], vx = x[3], vz = x[4], r = x[5];
    Vec dx(6);
    dx << vx * std::cos(phi) - vz * std::sin(phi),
        vx * std::sin(phi) + vz * std::cos(phi), r,
        vz * r - g * std::sin(phi),
        -vx * r - g * std::cos(phi) + (u[0] + u[1]) / mass,
        (l / J) * (u[0] - u[1]);
    return dx;
  };
  m.jacobians = [=](const Vec &x, const Vec &, double) {
    const double phi = x[2], vx = x[3], vz = x[4], r = x[5];
    const double c = std::cos(phi), s = std::sin(phi);
    Mat A = Mat::Zero(6, 6), B = Mat::Zero(6, 2);
    A(0, 2) = -vx * s - vz * c;
    A(0, 3) = c;
    A(0, 4) = -s;
    A(1, 2) = vx * c - vz * s;
    A(1, 3) = s;
    A(1, 4) = c;
    A(2, 5) = 1.0;
    A(3, 2) = -g * c;
    A(3, 4) = r;
    A(3, 5) = vz;
    A(4, 2) = g * s;
    A(4, 3) = -r;
    A(4, 5) = -vx;
    B(4, 0) = B(4, 1) = 1.0 / mass;
    B(5, 0) = l / J;
    B(5, 1) = -l / J;
    return std::make_pair(A, B);
  };
  m.G = 0.03 * Mat::Identity(6, 6);
  // thrust per rotor, hover needs mg/2 ~ 2.38 each
  m.u_lo = Vec::Constant(2, 0.0);
  m.u_hi = Vec::Constant(2, 10.0);
  m.P = selector(2, 6);
  return m;
}

SystemModel quadrotor3d() {
  SystemModel m;
  m.name = "quadrotor3d";
  m.n = 8; // (px, py, pz, vx, vy, vz, thx, thy)
  m.p = 3; // (az, wx, wy)
  const double g = 9.81;
  m.drift = [=](const Vec &x, const Vec &u, double) {
    Vec dx(8);
    dx << x[3], x[4], x[5], g * std::tan(x[6]), g * std::tan(x[7]), u[0],
        u[1], u[2];
    return dx;
  };
  m.jacobians = [=](const Vec &x, const Vec &, double) {
    Mat A = Mat::Zero(8, 8), B = Mat::Zero(8, 3);
    A(0, 3) = A(1, 4) = A(2, 5) = 1.0;
    const double cx = std::cos(x[6]), cy = std::cos(x[7]);
    A(3, 6) = g / (cx * cx);
    A(4, 7) = g / (cy * cy);
    B(5, 0) = B(6, 1) = B(7, 2) = 1.0;
    return std::make_pair(A, B);
  };
  m.G = 0.02 * Mat::Identity(8, 8);
  m.u_lo = Vec(3);
  m.u_hi = Vec(3);
  m.u_lo << -8.0, -3.0, -3.0;
  m.u_hi << 8.0, 3.0, 3.0;
  m.P = selector(3, 8);
  return m;
}

SystemModel unicycle() {
  SystemModel m;
  m.name = "unicycle";
  m.n = 3; // (x, y, theta)
  m.p = 2; // (v, omega)
  m.drift = [](const Vec &x, const Vec &u, double) {
    Vec dx(3);
    dx << u[0] * std::cos(x[2]), u[0] * std::sin(x[2]), u[1];
    return dx;
  };
  m.jacobians = [](const Vec &x, const Vec &u, double) {
    Mat A = Mat::Zero(3, 3), B = Mat::Zero(3, 2);
    const double c = std::cos(x[2]), s = std::sin(x[2]);
    A(0, 2) = -u[0] * s;
    A(1, 2) = u[0] * c;
    B(0, 0) = c;
    B(1, 0) = s;
    B(2, 1) = 1.0;
    return std::make_pair(A, B);
  };
  Mat G(3, 3);
  G << 0.0091, 0.0001, 0.0003, //
      0.0001, 0.0093, 0.0006,  //
      0.0003, 0.0006, 0.0214;
  m.G = G;
  m.u_lo = Vec(2);
  m.u_hi = Vec(2);
  m.u_lo << -1.0, -1.5;
  m.u_hi << 1.0, 1.5;
  m.P = selector(2, 3);
  return m;
}

} // namespace

SystemModel make_system(const std::string &name,
                        const std::map<std::string, double> &params) {
  SystemModel m;
  if (name == "double_integrator")
    m = double_integrator();
  else if (name == "dubins")
    m = dubins();
  else if (name == "pvtol")
    m = pvtol();
  else if (name == "quadrotor3d")
    m = quadrotor3d();
  else if (name == "unicycle")
    m = unicycle();
  else
    throw std::invalid_argument("make_system: unknown system '" + name + "'");
  apply_bound_overrides(m, params);
  Eigen::JacobiSVD<Mat> svd(m.G);
  m.sigma = svd.singularValues()(0);
  if (sym_eig_max(m.G * m.G.transpose()) > m.sigma * m.sigma + 1e-12)
    throw std::logic_error("make_system: diffusion bound violated");
  return m;
}

void Trajectory::validate(const SystemModel &sys) const {
  if (times.size() != states.size() || states.size() != controls.size() + 1)
    throw std::invalid_argument("trajectory: size mismatch");
  for (size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("trajectory: times not increasing");
  for (const auto &x : states)
    if (x.size() != sys.n)
      throw std::invalid_argument("trajectory: state dim mismatch");
  for (const auto &u : controls)
    if (u.size() != sys.p)
      throw std::invalid_argument("trajectory: control dim mismatch");
}

} // namespace stlfmp
