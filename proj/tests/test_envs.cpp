#include "safex/conservative.hpp"
#include "safex/envs.hpp"
#include "safex/random.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace safex;
using namespace safex::envs;

TEST_CASE("wrap_angle floored modulo", "[envs]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(std::numbers::pi) == Catch::Approx(-std::numbers::pi));
  CHECK(wrap_angle(-1.5 * std::numbers::pi) == Catch::Approx(0.5 * std::numbers::pi));
  for (double phi = -20.0; phi <= 20.0; phi += 0.37) {
    const double w = wrap_angle(phi);
    CHECK(w >= -std::numbers::pi);
    CHECK(w < std::numbers::pi);
    CHECK(std::abs(std::remainder(w - phi, 2.0 * std::numbers::pi)) < 1e-12);
  }
}

TEST_CASE("pendulum step", "[envs]") {
  PendulumParams p;
  Vector x(2), u(1), w = Vector::Zero(2);

  x << std::numbers::pi, 0.0;
  u << 0.0;
  Vector next = pendulum_step(p, x, u, w);
  CHECK(next[0] == Catch::Approx(std::numbers::pi));
  CHECK(next[1] == Catch::Approx(0.0).margin(1e-15));

  x << 0.0, 0.0;
  next = pendulum_step(p, x, u, w);
  CHECK(next[0] == 0.0);
  CHECK(next[1] == Catch::Approx(0.0).margin(1e-15));

  x << std::numbers::pi / 2.0, 1.0;
  u << 1.0;
  w << 0.0, 0.5;
  next = pendulum_step(p, x, u, w);
  CHECK(next[0] == Catch::Approx(1.6207963267948966));
  CHECK(next[1] == Catch::Approx(2.385));
}

TEST_CASE("pendulum cost", "[envs]") {
  Vector x(2), u(1);
  x << 0.0, 0.0;
  u << 0.0;
  CHECK(pendulum_cost(x, u) == 0.0);
  x << std::numbers::pi, 0.0;
  CHECK(pendulum_cost(x, u) == Catch::Approx(9.869604401089358));
  x << 0.0, 1.0;
  u << 2.0;
  CHECK(pendulum_cost(x, u) == Catch::Approx(0.104));
  // periodicity
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    x << rng.uniform(-8, 8), rng.uniform(-4, 4);
    Vector x2 = x;
    x2[0] += 2.0 * std::numbers::pi;
    CHECK(pendulum_cost(x, u) == Catch::Approx(pendulum_cost(x2, u)).margin(1e-9));
  }
}

TEST_CASE("pendulum linear model and error bounds", "[envs]") {
  PendulumParams p;
  const LinearModel m = pendulum_linear_model(p);
  CHECK(m.A(0, 1) == Catch::Approx(0.05));
  CHECK(m.B(0, 0) == 0.0);
  CHECK(m.B(1, 0) == Catch::Approx(0.15));
  auto [delta, Delta] = pendulum_error_bounds(p);
  CHECK(delta[0] == Catch::Approx(0.735));
  CHECK(delta[1] == delta[0]);
  CHECK(Delta[0] == Catch::Approx(1.47));
  auto [d2, D2] = pendulum_error_bounds(p, /*paper_stated_Delta=*/true);
  CHECK(D2[0] == Catch::Approx(0.735));
}

TEST_CASE("pendulum conservative closed forms", "[envs]") {
  PendulumParams p;
  Vector mu_w(2);
  mu_w << 0.0, 0.5;
  Vector x(2);
  x << std::numbers::pi, 0.0;
  CHECK(pendulum_stay_input(p, x, mu_w)[0] == Catch::Approx(0.0).margin(1e-15));
  x << std::numbers::pi, 3.0;
  CHECK(pendulum_stay_input(p, x, mu_w)[0] == Catch::Approx(-20.0));
  x << std::numbers::pi, 7.0;
  const auto seq = pendulum_back_sequence(p, x, mu_w);
  REQUIRE(seq.size() == 2);
  CHECK(seq[0][0] == Catch::Approx(-46.6666666666666667));
  CHECK(seq[1][0] == 0.0);
}

TEST_CASE("manipulator step", "[envs]") {
  ManipulatorParams p;
  Vector x(4), u = Vector::Zero(2), w = Vector::Zero(4);

  x << std::numbers::pi / 2, std::numbers::pi / 2, 0.0, 0.0;
  Vector next = manipulator_step(p, x, u, w);
  CHECK(next[0] == Catch::Approx(x[0]));
  CHECK(next[1] == Catch::Approx(x[1]));
  CHECK(next[2] == Catch::Approx(0.0).margin(1e-15));
  CHECK(next[3] == Catch::Approx(0.0).margin(1e-15));

  x << 0.0, 0.0, 0.0, 0.0;
  next = manipulator_step(p, x, u, w);
  CHECK(next[2] == Catch::Approx(-1.1521739130434783));
  CHECK(next[3] == Catch::Approx(-0.40167364016736395));

  x << 0.0, 0.0, 1.0, 0.0;
  next = manipulator_step(p, x, u, w);
  CHECK(next[0] == Catch::Approx(0.05));
}

TEST_CASE("manipulator cost", "[envs]") {
  Vector x(4), u = Vector::Zero(2);
  x << 0.0, 5.0 * std::numbers::pi / 6.0, 0.0, 0.0;
  CHECK(manipulator_cost(x, u) == Catch::Approx(0.0).margin(1e-15));
  x << std::numbers::pi, 5.0 * std::numbers::pi / 6.0, 0.0, 0.0;
  CHECK(manipulator_cost(x, u) == Catch::Approx(19.739208802178716));
  x << 0.0, 5.0 * std::numbers::pi / 6.0, 1.0, 1.0;
  CHECK(manipulator_cost(x, u) == Catch::Approx(0.2));
}

TEST_CASE("manipulator linear model, bounds, closed forms", "[envs]") {
  ManipulatorParams p;
  CHECK(p.a1() == Catch::Approx(0.11982097186700766));
  CHECK(p.b1() == Catch::Approx(0.881074168797954));
  const LinearModel m = manipulator_linear_model(p);
  CHECK(m.A(2, 2) == Catch::Approx(1.0 - p.a1()));
  CHECK(m.A(3, 3) == Catch::Approx(1.0 - p.a2()));
  CHECK(m.B(2, 0) == Catch::Approx(p.b1()));
  CHECK(m.B(3, 1) == Catch::Approx(p.b2()));
  auto [delta, Delta] = manipulator_error_bounds(p);
  CHECK(delta[0] == Catch::Approx(1.1521739130434783));
  CHECK(delta[2] == Catch::Approx(0.40167364016736395));
  CHECK(Delta[0] == Catch::Approx(2.166293228066274));
  CHECK(Delta[2] == Catch::Approx(0.7246091630048493));
}

TEST_CASE("linear-model mismatch is input independent", "[envs]") {
  // f(x) + G u - (A x + B u) must not depend on u for either plant
  Rng rng(10);
  PendulumParams pp;
  const LinearModel pm = pendulum_linear_model(pp);
  for (int t = 0; t < 100; ++t) {
    Vector x(2), u1(1), u2(1);
    x << rng.uniform(-10, 10), rng.uniform(-10, 10);
    u1 << rng.uniform(-100, 100);
    u2 << rng.uniform(-100, 100);
    const Vector w = Vector::Zero(2);
    const Vector e1 = pendulum_step(pp, x, u1, w) - (pm.A * x + pm.B * u1);
    const Vector e2 = pendulum_step(pp, x, u2, w) - (pm.A * x + pm.B * u2);
    CHECK((e1 - e2).cwiseAbs().maxCoeff() < 1e-10);
  }
  ManipulatorParams mp;
  const LinearModel mm = manipulator_linear_model(mp);
  for (int t = 0; t < 100; ++t) {
    Vector x(4), u1(2), u2(2);
    x << rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10);
    u1 << rng.uniform(-100, 100), rng.uniform(-100, 100);
    u2 << rng.uniform(-100, 100), rng.uniform(-100, 100);
    const Vector w = Vector::Zero(4);
    const Vector e1 = manipulator_step(mp, x, u1, w) - (mm.A * x + mm.B * u1);
    const Vector e2 = manipulator_step(mp, x, u2, w) - (mm.A * x + mm.B * u2);
    CHECK((e1 - e2).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("approximation error bounds hold over random states and inputs", "[envs]") {
  Rng rng(12);
  PendulumParams pp;
  const LinearModel pm = pendulum_linear_model(pp);
  auto [pd, pD] = pendulum_error_bounds(pp);
  Matrix Hp(2, 2);
  Hp << 0, 1, 0, -1;
  const Matrix stacked_p = Hp * (pm.A + Matrix::Identity(2, 2));
  double worst_pd = 0.0, worst_pD = 0.0;
  for (int t = 0; t < 1000000; ++t) {
    Vector x(2), u(1);
    x << rng.uniform(-50, 50), rng.uniform(-50, 50);
    u << rng.uniform(-100, 100);
    const Vector w = Vector::Zero(2);
    const Vector e = pendulum_step(pp, x, u, w) - (pm.A * x + pm.B * u);
    worst_pd = std::max(worst_pd, (Hp * e).cwiseAbs().maxCoeff());
    worst_pD = std::max(worst_pD, (stacked_p * e).cwiseAbs().maxCoeff());
  }
  CHECK(worst_pd <= pd[0] + 1e-12);
  CHECK(worst_pD <= pD[0] + 1e-12);

  ManipulatorParams mp;
  const LinearModel mm = manipulator_linear_model(mp);
  auto [md, mD] = manipulator_error_bounds(mp);
  Matrix Hm = Matrix::Zero(4, 4);
  Hm(0, 2) = 1;
  Hm(1, 2) = -1;
  Hm(2, 3) = 1;
  Hm(3, 3) = -1;
  const Matrix stacked_m = Hm * (mm.A + Matrix::Identity(4, 4));
  Vector worst_md = Vector::Zero(4), worst_mD = Vector::Zero(4);
  for (int t = 0; t < 1000000; ++t) {
    Vector x(4), u(2);
    for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-50, 50);
    u << rng.uniform(-100, 100), rng.uniform(-100, 100);
    const Vector w = Vector::Zero(4);
    const Vector e = manipulator_step(mp, x, u, w) - (mm.A * x + mm.B * u);
    worst_md = worst_md.cwiseMax((Hm * e).cwiseAbs());
    worst_mD = worst_mD.cwiseMax((stacked_m * e).cwiseAbs());
  }
  for (int j = 0; j < 4; ++j) {
    CHECK(worst_md[j] <= md[j] + 1e-12);
    CHECK(worst_mD[j] <= mD[j] + 1e-12);
  }
}

TEST_CASE("environment bundles", "[envs]") {
  const Environment pend = make_pendulum();
  CHECK(pend.state_dim == 2);
  CHECK(pend.input_dim == 1);
  CHECK(pend.constraints.num_constraints() == 2);
  CHECK(is_safe(pend.constraints, pend.x0));
  CHECK(pend.constraints.actuation_condition_holds(pend.model));

  const Environment mani = make_manipulator();
  CHECK(mani.state_dim == 4);
  CHECK(mani.input_dim == 2);
  CHECK(mani.constraints.num_constraints() == 4);
  CHECK(mani.constraints.actuation_condition_holds(mani.model));

  // baseline variant zeroes the safety-layer disturbance and stay input
  envs::PendulumOptions opt;
  opt.baseline = true;
  const Environment base = make_pendulum(opt);
  CHECK(base.safety_noise.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(base.safety_noise.cov.cwiseAbs().maxCoeff() == 0.0);
  CHECK(base.plant_noise.mean[1] == Catch::Approx(0.5));
  Vector x(2);
  x << 0.0, 5.0;
  CHECK(base.stay_closed_form(x).cwiseAbs().maxCoeff() == 0.0);
}
