#include "safex/chance.hpp"
#include "safex/envs.hpp"
#include "safex/random.hpp"
#include "safex/verify.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace safex;

namespace {

struct PendulumFixture {
  envs::Environment env = envs::make_pendulum();
  const LinearModel& model = env.model;
  const ConstraintSet& cs = env.constraints;
  const SafetyConfig& cfg = env.safety;
  const GaussianNoise& noise = env.safety_noise;
};

}  // namespace

TEST_CASE("q_stay schedule", "[chance]") {
  PendulumFixture f;
  // frozen: sqrt(0.95) and (0.95 / 0.9998^100)^(1/2)
  CHECK(q_stay(f.cfg, 0) == Catch::Approx(0.9746794344808963).margin(1e-12));
  CHECK(q_stay(f.cfg, 100) == Catch::Approx(0.9844761102578329).margin(1e-12));
  CHECK(q_stay(f.cfg, 0) > f.cfg.eta);

  const SafetyConfig tau1(0.95, 0.9998, 1, 100, Vector::Zero(2), Vector::Zero(2));
  CHECK(q_stay(tau1, 0) == Catch::Approx(0.95).margin(1e-15));

  CHECK_THROWS_AS(q_stay(f.cfg, 101), std::domain_error);
  CHECK_THROWS_AS(q_stay(f.cfg, -1), std::domain_error);
}

TEST_CASE("eta_prime schedule", "[chance]") {
  PendulumFixture f;
  CHECK(eta_prime(f.cfg, 2, 0) == Catch::Approx(0.9873397172404482).margin(1e-12));
  CHECK(eta_prime(f.cfg, 2, 100) == Catch::Approx(0.9922380551289164).margin(1e-12));

  const SafetyConfig tau1(0.95, 0.9998, 1, 100, Vector::Zero(2), Vector::Zero(2));
  CHECK(eta_prime(tau1, 1, 0) == Catch::Approx(0.95).margin(1e-15));

  // schedule stays inside (0.5, 1) and is nondecreasing in k
  double prev = 0.5;
  for (int k = 0; k <= 100; ++k) {
    const double v = eta_prime(f.cfg, 2, k);
    CHECK(v > 0.5);
    CHECK(v < 1.0);
    CHECK(v >= prev);
    prev = v;
  }
  prev = 0.5;
  for (int k = 0; k <= 100; ++k) {
    const double v = q_stay(f.cfg, k);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("tightened radii", "[chance]") {
  PendulumFixture f;
  Vector x(2), u(1);
  x << std::numbers::pi, 0.0;
  u << 0.0;
  const double q = eta_prime(f.cfg, 2, 0);
  auto radii = tightened_radii(f.model, f.cs, f.cfg, f.noise, x, u, q);
  REQUIRE(radii.size() == 4);
  // row 1 with +delta_bar: (6 - 0.5 - 0.735) / PhiInv(eta'_0), frozen
  CHECK(radii[0].j == 0);
  CHECK(radii[0].delta == Catch::Approx(0.735));
  CHECK(radii[0].radius == Catch::Approx(2.1305833940162431).margin(1e-9));

  // consuming the margin exactly gives radius zero
  SafetyConfig exact(0.95, 0.9998, 2, 100, Vector::Constant(2, 5.5), Vector::Constant(2, 1.47));
  auto radii2 = tightened_radii(f.model, f.cs, exact, f.noise, x, u, q);
  CHECK(radii2[0].radius == Catch::Approx(0.0).margin(1e-12));

  // predicted mean outside the safe set makes the +delta radius negative
  Vector x_out(2);
  x_out << 0.0, 6.2;
  auto radii3 = tightened_radii(f.model, f.cs, f.cfg, f.noise, x_out, u, q);
  CHECK(radii3[0].radius < 0.0);

  CHECK_THROWS_AS(tightened_radii(f.model, f.cs, f.cfg, f.noise, x, u, 0.5), std::domain_error);
  CHECK_THROWS_AS(tightened_radii(f.model, f.cs, f.cfg, f.noise, x, u, 0.3), std::domain_error);
}

TEST_CASE("exploration feasibility", "[chance]") {
  PendulumFixture f;
  Vector x(2), u(1);
  u << 0.0;

  x << std::numbers::pi, 0.0;  // |h^T Sigma_w^(1/2)| = 0.1 <= 2.13
  CHECK(exploration_feasible(f.model, f.cs, f.cfg, f.noise, x, u, 0));

  x << 0.0, 5.9;  // predicted mean 6.4 exceeds the +delta margin
  CHECK_FALSE(exploration_feasible(f.model, f.cs, f.cfg, f.noise, x, u, 0));

  // zero disturbance: feasible whenever all radii are nonnegative
  const GaussianNoise zero = GaussianNoise::zero(2);
  x << 0.0, 5.0;
  CHECK(exploration_feasible(f.model, f.cs, f.cfg, zero, x, u, 0));
}

TEST_CASE("max exploration covariance", "[chance]") {
  PendulumFixture f;
  Vector x(2), u(1);
  x << std::numbers::pi, 0.0;
  u << 0.0;
  const Matrix base = Matrix::Identity(1, 1);

  // safety budget allows s >> 1, so the cap binds
  Matrix sigma = max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x, u, 0, base, 1.0);
  CHECK(sigma(0, 0) == Catch::Approx(1.0));

  // s_max = 0 collapses exploration entirely
  sigma = max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x, u, 0, base, 0.0);
  CHECK(sigma(0, 0) == 0.0);

  // radius^2 == |h^T Sigma_w^(1/2)|^2 exactly (both zero): s collapses to 0.
  // delta_bar consumes the whole margin, disturbance covariance is zero,
  // so the boundary equality is exact in floating point.
  const GaussianNoise zero = GaussianNoise::zero(2);
  const double margin = 6.0 - 0.0;  // row 1 at x = [pi, 0] with zero mu_w
  SafetyConfig tight(0.95, 0.9998, 2, 100, Vector::Constant(2, margin),
                     Vector::Constant(2, 1.47));
  sigma = max_exploration_cov(f.model, f.cs, tight, zero, x, u, 0, base, 10.0);
  CHECK(sigma(0, 0) == 0.0);

  // infeasible state -> precondition error
  Vector x_out(2);
  x_out << 0.0, 5.9;
  CHECK_THROWS_AS(max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x_out, u, 0, base, 1.0),
                  std::domain_error);

  // constraint rows blind to the input leave s uncapped at s_max
  Matrix H1(1, 2);
  H1 << 1.0, 0.0;
  // (pendulum H rows see B; use a model whose B misses the row instead)
  Matrix B2(2, 1);
  B2 << 0.0, 0.15;
  Matrix A2 = Matrix::Identity(2, 2);
  const LinearModel model2(A2, B2);
  const ConstraintSet cs1(H1, Vector::Constant(1, 6.0));
  SafetyConfig cfg1(0.95, 0.9998, 2, 100, Vector::Constant(1, 0.1), Vector::Constant(1, 0.2));
  Vector x2 = Vector::Zero(2);
  Matrix cov2 = 0.0001 * Matrix::Identity(2, 2);
  const GaussianNoise noise2(Vector::Zero(2), cov2);
  const Matrix s2 = max_exploration_cov(model2, cs1, cfg1, noise2, x2, u, 0, base, 3.0);
  CHECK(s2(0, 0) == Catch::Approx(9.0));
}

TEST_CASE("check_sigma agrees with the closed-form maximum", "[chance]") {
  PendulumFixture f;
  Rng rng(5);
  Vector u(1);
  int binding_checked = 0;
  for (int t = 0; t < 40; ++t) {
    Vector x(2);
    x << rng.uniform(-3.14, 3.14), rng.uniform(-5.0, 5.0);
    u << rng.uniform(-2.0, 2.0);
    const int k = static_cast<int>(rng.uniform_index(100));
    if (!is_safe(f.cs, x) ||
        !exploration_feasible(f.model, f.cs, f.cfg, f.noise, x, u, k))
      continue;
    const Matrix base = Matrix::Identity(1, 1);
    // huge cap: the safety budget itself binds
    const Matrix sigma =
        max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x, u, k, base, 1e6);
    CHECK(check_sigma(f.model, f.cs, f.cfg, f.noise, x, u, k, sigma));
    if (sigma(0, 0) < 1e6 * 1e6 * 0.999) {
      CHECK_FALSE(check_sigma(f.model, f.cs, f.cfg, f.noise, x, u, k, 1.01 * sigma));
      ++binding_checked;
    }
    // zero covariance is always admissible when exploration is feasible
    CHECK(check_sigma(f.model, f.cs, f.cfg, f.noise, x, u, k, Matrix::Zero(1, 1)));
  }
  CHECK(binding_checked > 0);
  Matrix notpsd(1, 1);
  notpsd << -1.0;
  Vector x(2);
  x << std::numbers::pi, 0.0;
  u << 0.0;
  CHECK_THROWS_AS(check_sigma(f.model, f.cs, f.cfg, f.noise, x, u, 0, notpsd),
                  std::domain_error);
}

TEST_CASE("block norm identity", "[chance]") {
  // |h^T B' blockdiag(S, W)^(1/2)|^2 = |h^T B S^(1/2)|^2 + |h^T W^(1/2)|^2
  Rng rng(11);
  for (int t = 0; t < 25; ++t) {
    const int n = 3, m = 2;
    Matrix A = Matrix::Random(n, n);
    Matrix B = Matrix::Random(n, m);
    Matrix Sroot = Matrix::Random(m, m);
    Matrix S = Sroot * Sroot.transpose();
    Matrix Wroot = Matrix::Random(n, n);
    Matrix W = Wroot * Wroot.transpose();
    Vector h = Vector::Random(n);

    Matrix block = Matrix::Zero(m + n, m + n);
    block.topLeftCorner(m, m) = S;
    block.bottomRightCorner(n, n) = W;
    Matrix bprime(n, m + n);
    bprime << B, Matrix::Identity(n, n);
    const double direct = (h.transpose() * bprime * psd_sqrt(block)).squaredNorm();
    const double split = (h.transpose() * B * psd_sqrt(S)).squaredNorm() +
                         (h.transpose() * psd_sqrt(W)).squaredNorm();
    CHECK(direct == Catch::Approx(split).epsilon(1e-10));
  }
}

TEST_CASE("feasibility consistent with covariance construction", "[chance]") {
  PendulumFixture f;
  Rng rng(17);
  Vector u(1);
  for (int t = 0; t < 200; ++t) {
    Vector x(2);
    x << rng.uniform(-3.14, 3.14), rng.uniform(-6.5, 6.5);
    u << rng.uniform(-3.0, 3.0);
    const int k = static_cast<int>(rng.uniform_index(100));
    if (!is_safe(f.cs, x)) continue;
    const bool feasible = exploration_feasible(f.model, f.cs, f.cfg, f.noise, x, u, k);
    if (feasible) {
      const Matrix sigma = max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x, u, k,
                                               Matrix::Identity(1, 1), 1.0);
      CHECK(sigma(0, 0) >= 0.0);
      CHECK(check_sigma(f.model, f.cs, f.cfg, f.noise, x, u, k, sigma));
    } else {
      CHECK_THROWS_AS(max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x, u, k,
                                          Matrix::Identity(1, 1), 1.0),
                      std::domain_error);
    }
  }
}

TEST_CASE("tightened exploration meets the per-row level on the linear model", "[chance][mc]") {
  // Lemma-style statistical check: at the covariance boundary with the
  // adversarial constant offset, the per-row one-step frequency reaches
  // eta'_k within 3 binomial standard errors.
  PendulumFixture f;
  Rng rng(31);
  Vector x(2), u(1);
  x << std::numbers::pi, 2.0;
  u << 0.5;
  const int k = 3;
  const double level = eta_prime(f.cfg, 2, k);
  REQUIRE(exploration_feasible(f.model, f.cs, f.cfg, f.noise, x, u, k));
  const Matrix sigma =
      max_exploration_cov(f.model, f.cs, f.cfg, f.noise, x, u, k, Matrix::Identity(1, 1), 1e9);
  const GaussianNoise input_noise(u, sigma);
  const LinearModel& model = f.model;
  auto linear_step = [&model](const Vector& xs, const Vector& us, const Vector& ws) {
    return (model.A * xs + model.B * us + ws).eval();
  };
  const int n = 100000;
  auto freq = verify::mc_one_step_safety(
      linear_step, f.cs, x, [&](Rng& r) { return sample_gaussian(input_noise, r); }, f.noise, n,
      rng, f.cfg.delta_bar);
  for (int j = 0; j < 2; ++j) {
    CHECK(freq.per_row[j] >= level - 3.0 * oracle::binomial_se(level, n));
  }
}
