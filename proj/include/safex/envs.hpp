#pragma once

// Ground-truth nonlinear dynamics, costs, linear approximation models,
// error bounds, and closed-form conservative inputs for the inverted
// pendulum and the four-bar parallel link manipulator.

#include "safex/core.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace safex::envs {

// Map an angle to [-pi, pi) via floored modulo.
inline double wrap_angle(double phi) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(phi + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  return r - std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Inverted pendulum, state [phi, zeta], input torque u.

struct PendulumParams {
  double m = 1.0;   // mass [kg]
  double l = 1.0;   // length [m]
  double g = 9.8;   // gravity [m/s^2]
  double Ts = 0.05; // sampling period [s]
};

inline Vector pendulum_step(const PendulumParams& p, const Vector& x, const Vector& u,
                            const Vector& w) {
  require_shape(x.size() == 2 && u.size() == 1 && w.size() == 2, "pendulum_step dimensions");
  Vector next(2);
  next[0] = x[0] + p.Ts * x[1] + w[0];
  next[1] = x[1] - p.Ts * (3.0 * p.g / (2.0 * p.l)) * std::sin(x[0] + std::numbers::pi) +
            p.Ts * (3.0 / (p.m * p.l * p.l)) * u[0] + w[1];
  return next;
}

inline double pendulum_cost(const Vector& x, const Vector& u) {
  const double a = wrap_angle(x[0]);
  return a * a + 0.1 * x[1] * x[1] + 0.001 * u[0] * u[0];
}

inline LinearModel pendulum_linear_model(const PendulumParams& p) {
  Matrix A(2, 2), B(2, 1);
  A << 1.0, p.Ts, 0.0, 1.0;
  B << 0.0, p.Ts * 3.0 / (p.m * p.l * p.l);
  return LinearModel(A, B);
}

// One-step bound Ts*3g/(2l) on the projected linearization error; the
// tau=2 stacked bound is Ts*3g/l. `paper_stated_Delta` selects the
// variant that reuses the one-step bound for both.
inline std::pair<Vector, Vector> pendulum_error_bounds(const PendulumParams& p,
                                                       bool paper_stated_Delta = false) {
  const double delta = p.Ts * 3.0 * p.g / (2.0 * p.l);
  const double Delta = paper_stated_Delta ? delta : p.Ts * 3.0 * p.g / p.l;
  return {Vector::Constant(2, delta), Vector::Constant(2, Delta)};
}

inline Vector pendulum_stay_input(const PendulumParams& p, const Vector& x, const Vector& mu_w) {
  Vector u(1);
  u[0] = -(p.m * p.l * p.l / (3.0 * p.Ts)) * (x[1] + mu_w[0]);
  return u;
}

inline std::vector<Vector> pendulum_back_sequence(const PendulumParams& p, const Vector& x,
                                                  const Vector& mu_w) {
  Vector u0(1), u1(1);
  u0[0] = -(p.m * p.l * p.l / (3.0 * p.Ts)) * (x[1] + 2.0 * mu_w[0]);
  u1[0] = 0.0;
  return {u0, u1};
}

// ---------------------------------------------------------------------------
// Four-bar parallel link manipulator, state [q1, q2, w1, w2], inputs
// [v1, v2] (armature voltages).

struct ManipulatorParams {
  double m11_hat = 3.91e-3;
  double m22_hat = 2.39e-3;
  double d11_hat = 9.37e-3;
  double d22_hat = 9.37e-3;
  double V1 = 9.01e-2;
  double V2 = 1.92e-2;
  double alpha = 6.89e-2;
  double Ts = 0.05;

  double a1() const { return Ts * d11_hat / m11_hat; }
  double a2() const { return Ts * d22_hat / m22_hat; }
  double b1() const { return Ts * alpha / m11_hat; }
  double b2() const { return Ts * alpha / m22_hat; }
};

inline Vector manipulator_step(const ManipulatorParams& p, const Vector& x, const Vector& u,
                               const Vector& w) {
  require_shape(x.size() == 4 && u.size() == 2 && w.size() == 4, "manipulator_step dimensions");
  Vector next(4);
  next[0] = x[0] + p.Ts * x[2] + w[0];
  next[1] = x[1] + p.Ts * x[3] + w[1];
  next[2] = x[2] - p.Ts * (p.d11_hat / p.m11_hat) * x[2] -
            p.Ts * (p.V1 / p.m11_hat) * std::cos(x[0]) + p.Ts * (p.alpha / p.m11_hat) * u[0] + w[2];
  next[3] = x[3] - p.Ts * (p.d22_hat / p.m22_hat) * x[3] -
            p.Ts * (p.V2 / p.m22_hat) * std::cos(x[1]) + p.Ts * (p.alpha / p.m22_hat) * u[1] + w[3];
  return next;
}

inline double manipulator_cost(const Vector& x, const Vector& u) {
  const double t1 = wrap_angle(x[0]);
  const double t2 = wrap_angle(x[1] - 5.0 * std::numbers::pi / 6.0);
  return 2.0 * t1 * t1 + 2.0 * t2 * t2 + 0.1 * (x[2] * x[2] + x[3] * x[3]) + 0.001 * u.squaredNorm();
}

inline LinearModel manipulator_linear_model(const ManipulatorParams& p) {
  Matrix A = Matrix::Identity(4, 4);
  A(0, 2) = p.Ts;
  A(1, 3) = p.Ts;
  A(2, 2) = 1.0 - p.a1();
  A(3, 3) = 1.0 - p.a2();
  Matrix B = Matrix::Zero(4, 2);
  B(2, 0) = p.b1();
  B(3, 1) = p.b2();
  return LinearModel(A, B);
}

// Rows ordered (w1 <=, w1 >=, w2 <=, w2 >=): bounds Ts*Vi/mii_hat per
// joint, stacked over two steps with the damping factor |2 - a_i|.
inline std::pair<Vector, Vector> manipulator_error_bounds(const ManipulatorParams& p) {
  Vector delta(4), Delta(4);
  const double d1 = p.Ts * p.V1 / p.m11_hat;
  const double d2 = p.Ts * p.V2 / p.m22_hat;
  delta << d1, d1, d2, d2;
  Delta << std::abs(2.0 - p.a1()) * d1, std::abs(2.0 - p.a1()) * d1,
           std::abs(2.0 - p.a2()) * d2, std::abs(2.0 - p.a2()) * d2;
  return {delta, Delta};
}

inline Vector manipulator_stay_input(const ManipulatorParams& p, const Vector& x,
                                     const Vector& mu_w) {
  Vector u(2);
  u[0] = -(1.0 / p.b1()) * ((1.0 - p.a1()) * x[2] + (1.0 - p.a1()) * mu_w[2]);
  u[1] = -(1.0 / p.b2()) * ((1.0 - p.a2()) * x[3] + (1.0 - p.a2()) * mu_w[3]);
  return u;
}

inline std::vector<Vector> manipulator_back_sequence(const ManipulatorParams& p, const Vector& x,
                                                     const Vector& mu_w) {
  Vector u0(2);
  const double oma1 = 1.0 - p.a1();
  const double oma2 = 1.0 - p.a2();
  u0[0] = -(1.0 / (oma1 * p.b1())) * (oma1 * oma1 * x[2] + (2.0 - p.a1()) * mu_w[2]);
  u0[1] = -(1.0 / (oma2 * p.b2())) * (oma2 * oma2 * x[3] + (2.0 - p.a2()) * mu_w[3]);
  return {u0, Vector::Zero(2)};
}

// ---------------------------------------------------------------------------
// Bundle consumed by the episode runner and the verification suites.
// `safety_noise` is the disturbance model as known to the controller;
// the disturbance-ignorant baseline zeroes it while the plant keeps the
// true one.

struct Environment {
  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  std::function<Vector(const Vector&, const Vector&, const Vector&)> step;  // (x, u, w)
  std::function<double(const Vector&, const Vector&)> cost;                 // (x, u)
  LinearModel model;
  ConstraintSet constraints;
  GaussianNoise plant_noise;
  GaussianNoise safety_noise;
  SafetyConfig safety;
  Vector x0;
  std::function<Vector(const Vector&)> stay_closed_form;
  std::function<std::vector<Vector>(const Vector&)> back_closed_form;
};

struct SafetyParams {
  double eta = 0.95;
  double xi = 0.9998;
  int tau = 2;
  int horizon = 100;
};

struct PendulumOptions {
  PendulumParams params;
  SafetyParams safety;
  Vector x0 = (Vector(2) << std::numbers::pi, 0.0).finished();
  Vector mu_w = (Vector(2) << 0.0, 0.5).finished();
  Vector sigma_w_std = (Vector(2) << 0.05, 0.1).finished();
  double zeta_max = 6.0;
  bool paper_stated_Delta = false;
  bool baseline = false;  // ignore disturbance in the safety layer, stay input 0
  bool use_closed_form = true;
};

inline Environment make_pendulum(const PendulumOptions& opt = {}) {
  const PendulumParams p = opt.params;
  Matrix H(2, 2);
  H << 0.0, 1.0, 0.0, -1.0;
  Vector d = Vector::Constant(2, opt.zeta_max);
  auto [delta, Delta] = pendulum_error_bounds(p, opt.paper_stated_Delta);
  GaussianNoise plant_noise(opt.mu_w, opt.sigma_w_std.cwiseProduct(opt.sigma_w_std).asDiagonal());
  GaussianNoise safety_noise = opt.baseline ? GaussianNoise::zero(2) : plant_noise;
  const Vector known_mu = safety_noise.mean;

  Environment env{
      "pendulum", 2, 1,
      [p](const Vector& x, const Vector& u, const Vector& w) { return pendulum_step(p, x, u, w); },
      [](const Vector& x, const Vector& u) { return pendulum_cost(x, u); },
      pendulum_linear_model(p),
      ConstraintSet(H, d),
      plant_noise,
      safety_noise,
      SafetyConfig(opt.safety.eta, opt.safety.xi, opt.safety.tau, opt.safety.horizon, delta, Delta),
      opt.x0,
      nullptr, nullptr};
  if (opt.use_closed_form) {
    if (opt.baseline) {
      env.stay_closed_form = [](const Vector&) { return Vector::Zero(1); };
    } else {
      env.stay_closed_form = [p, known_mu](const Vector& x) {
        return pendulum_stay_input(p, x, known_mu);
      };
    }
    env.back_closed_form = [p, known_mu](const Vector& x) {
      return pendulum_back_sequence(p, x, known_mu);
    };
  }
  return env;
}

struct ManipulatorOptions {
  ManipulatorParams params;
  SafetyParams safety;
  Vector x0 = (Vector(4) << std::numbers::pi, std::numbers::pi, 0.0, 0.0).finished();
  Vector mu_w = (Vector(4) << 0.0, 0.1, -0.1, 0.05).finished();
  Vector sigma_w_std = (Vector(4) << 0.01, 0.03, 0.02, 0.01).finished();
  double omega_max = 6.0;
  bool baseline = false;
  bool use_closed_form = true;
};

inline Environment make_manipulator(const ManipulatorOptions& opt = {}) {
  const ManipulatorParams p = opt.params;
  Matrix H = Matrix::Zero(4, 4);
  H(0, 2) = 1.0;
  H(1, 2) = -1.0;
  H(2, 3) = 1.0;
  H(3, 3) = -1.0;
  Vector d = Vector::Constant(4, opt.omega_max);
  auto [delta, Delta] = manipulator_error_bounds(p);
  GaussianNoise plant_noise(opt.mu_w, opt.sigma_w_std.cwiseProduct(opt.sigma_w_std).asDiagonal());
  GaussianNoise safety_noise = opt.baseline ? GaussianNoise::zero(4) : plant_noise;
  const Vector known_mu = safety_noise.mean;

  Environment env{
      "manipulator", 4, 2,
      [p](const Vector& x, const Vector& u, const Vector& w) { return manipulator_step(p, x, u, w); },
      [](const Vector& x, const Vector& u) { return manipulator_cost(x, u); },
      manipulator_linear_model(p),
      ConstraintSet(H, d),
      plant_noise,
      safety_noise,
      SafetyConfig(opt.safety.eta, opt.safety.xi, opt.safety.tau, opt.safety.horizon, delta, Delta),
      opt.x0,
      nullptr, nullptr};
  if (opt.use_closed_form) {
    if (opt.baseline) {
      env.stay_closed_form = [](const Vector&) { return Vector::Zero(2); };
    } else {
      env.stay_closed_form = [p, known_mu](const Vector& x) {
        return manipulator_stay_input(p, x, known_mu);
      };
    }
    env.back_closed_form = [p, known_mu](const Vector& x) {
      return manipulator_back_sequence(p, x, known_mu);
    };
  }
  return env;
}

}  // namespace safex::envs
