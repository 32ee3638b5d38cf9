#include "safex/conservative.hpp"
#include "safex/envs.hpp"
#include "safex/random.hpp"
#include "safex/verify.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace safex;

namespace {

struct Fix {
  envs::Environment env = envs::make_pendulum();
  const LinearModel& model = env.model;
  const ConstraintSet& cs = env.constraints;
  const SafetyConfig& cfg = env.safety;
  const GaussianNoise& noise = env.safety_noise;
};

}  // namespace

TEST_CASE("build_horizon collapses for tau = 1", "[conservative]") {
  Fix f;
  const HorizonModel h = build_horizon(f.model, f.noise, 1);
  CHECK((h.A_pow_tau - f.model.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h.B_hat - f.model.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h.C_hat - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h.mu_hat - f.noise.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h.cov_block - f.noise.cov).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(build_horizon(f.model, f.noise, 0), std::domain_error);
}

TEST_CASE("build_horizon pendulum tau = 2 blocks", "[conservative]") {
  Fix f;
  const HorizonModel h = build_horizon(f.model, f.noise, 2);
  // B_hat = [A B, B] with A B = [0.0075, 0.15]^T
  CHECK(h.B_hat(0, 0) == Catch::Approx(0.0075));
  CHECK(h.B_hat(1, 0) == Catch::Approx(0.15));
  CHECK(h.B_hat(0, 1) == Catch::Approx(0.0));
  CHECK(h.B_hat(1, 1) == Catch::Approx(0.15));
  // C_hat mu_hat = (A + I) mu_w
  const Vector lhs = h.C_hat * h.mu_hat;
  const Vector rhs = (f.model.A + Matrix::Identity(2, 2)) * f.noise.mean;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-15);
  // A^2
  CHECK(h.A_pow_tau(0, 1) == Catch::Approx(0.1));
}

TEST_CASE("stay condition on the paper inputs", "[conservative]") {
  Fix f;
  Vector x(2);
  x << std::numbers::pi, 0.0;
  const Vector u = envs::pendulum_stay_input({}, x, f.noise.mean);
  CHECK(u[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(stay_condition_holds(f.model, f.cs, f.cfg, f.noise, x, u, q_stay(f.cfg, 0)));

  // boundary: margin exactly zero with zero disturbance covariance
  const GaussianNoise zero_cov(Vector::Zero(2), Matrix::Zero(2, 2));
  Vector xb = Vector::Zero(2);
  Vector ub(1);
  ub << (6.0 - 0.735) / 0.15;  // h_1^T (A x + B u) = d_1 - delta_bar
  CHECK(stay_condition_holds(f.model, f.cs, f.cfg, zero_cov, xb, ub, 0.9));
  // the same input with positive covariance now falls short
  CHECK_FALSE(stay_condition_holds(f.model, f.cs, f.cfg, f.noise, xb, ub, 0.9));

  CHECK_THROWS_AS(stay_condition_holds(f.model, f.cs, f.cfg, f.noise, x, u, 0.5),
                  std::domain_error);
}

TEST_CASE("back condition on the paper inputs", "[conservative]") {
  Fix f;
  Vector x(2);
  x << std::numbers::pi, 7.0;  // outside the safe set
  const auto seq = envs::pendulum_back_sequence({}, x, f.noise.mean);
  Vector U(2);
  U << seq[0][0], seq[1][0];
  CHECK(U[0] == Catch::Approx(-46.6666666666666667).margin(1e-9));
  CHECK(back_condition_holds(f.model, f.cs, f.cfg, f.noise, x, U, f.cfg.xi));

  // zero noise, zero Delta bound, exact placement at the origin
  const GaussianNoise zero_cov(Vector::Zero(2), Matrix::Zero(2, 2));
  SafetyConfig cfg0(0.95, 0.9998, 2, 100, Vector::Zero(2), Vector::Zero(2));
  const HorizonModel h = build_horizon(f.model, zero_cov, 2);
  Vector target = -(h.A_pow_tau * x + h.C_hat * h.mu_hat);
  Vector U0 = h.B_hat.colPivHouseholderQr().solve(target);
  CHECK(back_condition_holds(f.model, f.cs, cfg0, zero_cov, x, U0, 0.9));

  // doing nothing far outside the safe set fails
  Vector far(2);
  far << std::numbers::pi, 100.0;
  CHECK_FALSE(back_condition_holds(f.model, f.cs, f.cfg, f.noise, far, Vector::Zero(2), f.cfg.xi));

  CHECK_THROWS_AS(back_condition_holds(f.model, f.cs, f.cfg, f.noise, x, Vector::Zero(3), f.cfg.xi),
                  std::invalid_argument);
}

TEST_CASE("solve_stay_input round trip", "[conservative]") {
  Fix f;
  Vector x(2);
  x << std::numbers::pi, 0.0;
  auto u = solve_stay_input(f.model, f.cs, f.cfg, f.noise, x, q_stay(f.cfg, 0));
  REQUIRE(u.has_value());
  CHECK(stay_condition_holds(f.model, f.cs, f.cfg, f.noise, x, *u, q_stay(f.cfg, 0)));

  // inflating the disturbance covariance 1000x leaves no valid input
  const GaussianNoise huge(f.noise.mean, 1e6 * f.noise.cov);
  CHECK_FALSE(solve_stay_input(f.model, f.cs, f.cfg, huge, x, q_stay(f.cfg, 0)).has_value());

  // manipulator initial state is feasible too
  const envs::Environment mani = envs::make_manipulator();
  auto um = solve_stay_input(mani.model, mani.constraints, mani.safety, mani.safety_noise,
                             mani.x0, q_stay(mani.safety, 0));
  REQUIRE(um.has_value());
  CHECK(stay_condition_holds(mani.model, mani.constraints, mani.safety, mani.safety_noise,
                             mani.x0, *um, q_stay(mani.safety, 0)));
}

TEST_CASE("solve_back_sequence round trip", "[conservative]") {
  Fix f;
  Vector x(2);
  x << std::numbers::pi, 7.0;
  auto U = solve_back_sequence(f.model, f.cs, f.cfg, f.noise, x, f.cfg.xi);
  REQUIRE(U.has_value());
  CHECK(back_condition_holds(f.model, f.cs, f.cfg, f.noise, x, *U, f.cfg.xi));

  // unbounded inputs keep even absurd velocities recoverable
  Vector farx(2);
  farx << std::numbers::pi, 1e6;
  auto Ufar = solve_back_sequence(f.model, f.cs, f.cfg, f.noise, farx, f.cfg.xi);
  REQUIRE(Ufar.has_value());
  CHECK(back_condition_holds(f.model, f.cs, f.cfg, f.noise, farx, *Ufar, f.cfg.xi));
}

TEST_CASE("tau = 1 back condition reduces to the stay condition", "[conservative]") {
  Fix f;
  // same bounds in both roles makes the two conditions structurally equal
  SafetyConfig cfg1(0.95, 0.9998, 1, 100, Vector::Constant(2, 0.735),
                    Vector::Constant(2, 0.735));
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    Vector x(2), u(1);
    x << rng.uniform(-3, 3), rng.uniform(-8, 8);
    u << rng.uniform(-40, 40);
    CHECK(back_condition_holds(f.model, f.cs, cfg1, f.noise, x, u, 0.97) ==
          stay_condition_holds(f.model, f.cs, cfg1, f.noise, x, u, 0.97));
  }
}

TEST_CASE("closed-form agreement under table parameters", "[conservative]") {
  // the literal conservative inputs of both environments pass the
  // theorem checks from states visited in practice
  Fix f;
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    Vector x(2);
    x << rng.uniform(-6, 6), rng.uniform(-6, 6);
    const Vector u = envs::pendulum_stay_input({}, x, f.noise.mean);
    CHECK(stay_condition_holds(f.model, f.cs, f.cfg, f.noise, x, u, q_stay(f.cfg, t % 100)));
  }
  for (int t = 0; t < 100; ++t) {
    Vector x(2);
    x << rng.uniform(-6, 6), (t % 2 ? rng.uniform(6.0, 9.0) : rng.uniform(-9.0, -6.0));
    const auto seq = envs::pendulum_back_sequence({}, x, f.noise.mean);
    Vector U(2);
    U << seq[0][0], seq[1][0];
    CHECK(back_condition_holds(f.model, f.cs, f.cfg, f.noise, x, U, f.cfg.xi));
  }

  const envs::Environment mani = envs::make_manipulator();
  for (int t = 0; t < 100; ++t) {
    Vector x(4);
    x << rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-6, 6), rng.uniform(-6, 6);
    const Vector u = envs::manipulator_stay_input({}, x, mani.safety_noise.mean);
    CHECK(stay_condition_holds(mani.model, mani.constraints, mani.safety, mani.safety_noise, x,
                               u, q_stay(mani.safety, t % 100)));
  }
  for (int t = 0; t < 100; ++t) {
    Vector x(4);
    x << rng.uniform(-3, 3), rng.uniform(-3, 3),
        (t % 2 ? rng.uniform(6.0, 9.0) : rng.uniform(-9.0, -6.0)),
        (t % 3 ? rng.uniform(6.0, 9.0) : rng.uniform(-6.0, 6.0));
    const auto seq = envs::manipulator_back_sequence({}, x, mani.safety_noise.mean);
    Vector U(4);
    U << seq[0][0], seq[0][1], seq[1][0], seq[1][1];
    CHECK(back_condition_holds(mani.model, mani.constraints, mani.safety, mani.safety_noise, x,
                               U, mani.safety.xi));
  }
}

TEST_CASE("stay input is probabilistically sound", "[conservative][mc]") {
  Fix f;
  Rng rng(77);
  Vector x(2);
  x << std::numbers::pi, 0.0;
  const double q = q_stay(f.cfg, 0);
  const Vector u = envs::pendulum_stay_input({}, x, f.noise.mean);
  const int n = 100000;
  const LinearModel& model = f.model;

  // linear route with adversarial constant offsets (the exact quantity
  // bounded by the theorem)
  auto linear_step = [&model](const Vector& xs, const Vector& us, const Vector& ws) {
    return (model.A * xs + model.B * us + ws).eval();
  };
  auto fixed_input = [&u](Rng&) { return u; };
  auto lin = verify::mc_one_step_safety(linear_step, f.cs, x, fixed_input, f.noise, n, rng,
                                        f.cfg.delta_bar);
  CHECK(lin.joint >= q - 3.0 * oracle::binomial_se(q, n));

  // true nonlinear plant
  auto nonlinear = verify::mc_one_step_safety(
      [&f](const Vector& xs, const Vector& us, const Vector& ws) { return f.env.step(xs, us, ws); },
      f.cs, x, fixed_input, f.noise, n, rng);
  CHECK(nonlinear.joint >= q - 3.0 * oracle::binomial_se(q, n));
}

TEST_CASE("back sequence is probabilistically sound over tau steps", "[conservative][mc]") {
  Fix f;
  Rng rng(78);
  Vector x(2);
  x << std::numbers::pi, 7.0;
  const auto seq = envs::pendulum_back_sequence({}, x, f.noise.mean);
  const int n = 100000;
  const LinearModel& model = f.model;
  auto linear_step = [&model](const Vector& xs, const Vector& us, const Vector& ws) {
    return (model.A * xs + model.B * us + ws).eval();
  };
  auto lin = verify::mc_tau_step_safety(linear_step, f.cs, x, seq, f.noise, n, rng,
                                        f.cfg.Delta_bar);
  CHECK(lin.joint >= f.cfg.xi - 3.0 * oracle::binomial_se(f.cfg.xi, n));
  auto nonlin = verify::mc_tau_step_safety(
      [&f](const Vector& xs, const Vector& us, const Vector& ws) { return f.env.step(xs, us, ws); },
      f.cs, x, seq, f.noise, n, rng);
  CHECK(nonlin.joint >= f.cfg.xi - 3.0 * oracle::binomial_se(f.cfg.xi, n));
  // tau = 1 estimator agrees with the one-step estimator
  Rng ra(5), rb(5);
  auto one = verify::mc_one_step_safety(linear_step, f.cs, x,
                                        [&seq](Rng&) { return seq[0]; }, f.noise, 5000, ra);
  auto tau1 = verify::mc_tau_step_safety(linear_step, f.cs, x, {seq[0]}, f.noise, 5000, rb);
  CHECK(one.joint == Catch::Approx(tau1.joint));
}
