#pragma once

// Construction and verification of conservative inputs: the one-step
// "stay" input keeping a safe state safe, and the tau-step "back"
// sequence returning an unsafe state to the safe set. Both reduce to
// linear feasibility problems after the Gaussian tightening.

#include "safex/chance.hpp"
#include "safex/core.hpp"
#include "safex/lp.hpp"
#include "safex/normal.hpp"

#include <optional>
#include <vector>

namespace safex {

// Stacked tau-step model:
//   x_{k+tau} = A^tau x_k + B_hat U_k + C_hat E_k + C_hat W_k
// with B_hat = [A^(tau-1) B, ..., B], C_hat = [A^(tau-1), ..., I].
struct HorizonModel {
  Matrix A_pow_tau;
  Matrix B_hat;
  Matrix C_hat;
  Vector mu_hat;     // stacked disturbance means
  Matrix cov_block;  // blockdiag(Sigma_w, ..., Sigma_w)
};

inline HorizonModel build_horizon(const LinearModel& model, const GaussianNoise& noise, int tau) {
  require_domain(tau >= 1, "build_horizon: tau must be a positive integer");
  require_shape(noise.dim() == model.state_dim(), "build_horizon: noise dimension");
  const int n = model.state_dim();
  const int m = model.input_dim();

  std::vector<Matrix> a_pow(tau + 1);  // A^0 .. A^tau
  a_pow[0] = Matrix::Identity(n, n);
  for (int i = 1; i <= tau; ++i) a_pow[i] = model.A * a_pow[i - 1];

  HorizonModel h;
  h.A_pow_tau = a_pow[tau];
  h.B_hat.resize(n, m * tau);
  h.C_hat.resize(n, n * tau);
  h.mu_hat.resize(n * tau);
  h.cov_block = Matrix::Zero(n * tau, n * tau);
  for (int i = 0; i < tau; ++i) {
    const Matrix& pw = a_pow[tau - 1 - i];
    h.B_hat.middleCols(i * m, m) = pw * model.B;
    h.C_hat.middleCols(i * n, n) = pw;
    h.mu_hat.segment(i * n, n) = noise.mean;
    h.cov_block.block(i * n, i * n, n, n) = noise.cov;
  }
  return h;
}

namespace detail {

// Both Theorem-style conditions share the shape
//   margin_j(delta) >= Phi^{-1}(q') * noise_norm_j,  q' = 1 - (1-q)/n_c
// over every row and both error signs. `tol` absorbs roundoff so that
// exact-boundary constructions count as satisfied.
constexpr double kConditionTol = 1e-9;

}  // namespace detail

// One-step condition: for all rows j and both signs of the one-step
// error bound,
//   d_j - h_j^T (A x + B u + mu_w) - delta_j >= Phi^{-1}(q') |h_j^T Sigma_w^(1/2)|.
inline bool stay_condition_holds(const LinearModel& model, const ConstraintSet& cs,
                                 const SafetyConfig& cfg, const GaussianNoise& noise,
                                 const Vector& x, const Vector& u, double q) {
  detail::check_chance_dims(model, cs, cfg, noise);
  require_domain(q > 0.5 && q < 1.0, "stay_condition_holds: q must lie in (0.5, 1)");
  const int n_c = cs.num_constraints();
  const double quantile = normal_cdf_inv(1.0 - (1.0 - q) / n_c);
  const Vector mean_next = model.A * x + model.B * u + noise.mean;
  for (int j = 0; j < n_c; ++j) {
    const double margin = cs.d[j] - cs.H.row(j).dot(mean_next);
    const double rhs = quantile * (cs.H.row(j) * noise.sqrt_cov).norm();
    for (double delta : {cfg.delta_bar[j], -cfg.delta_bar[j]})
      if (margin - delta < rhs - detail::kConditionTol) return false;
  }
  return true;
}

// tau-step condition over the stacked input sequence U (length m*tau):
//   d_j - h_j^T (A^tau x + B_hat U + C_hat mu_hat) - Delta_j
//     >= Phi^{-1}(q') |h_j^T C_hat blockdiag(Sigma_w)^(1/2)|.
inline bool back_condition_holds(const LinearModel& model, const ConstraintSet& cs,
                                 const SafetyConfig& cfg, const GaussianNoise& noise,
                                 const Vector& x, const Vector& U, double q) {
  detail::check_chance_dims(model, cs, cfg, noise);
  require_domain(q > 0.5 && q < 1.0, "back_condition_holds: q must lie in (0.5, 1)");
  const HorizonModel h = build_horizon(model, noise, cfg.tau);
  require_shape(U.size() == h.B_hat.cols(), "back_condition_holds: U must have m*tau entries");
  const int n_c = cs.num_constraints();
  const double quantile = normal_cdf_inv(1.0 - (1.0 - q) / n_c);
  const Matrix stacked_sqrt = psd_sqrt(h.cov_block);
  const Vector mean_end = h.A_pow_tau * x + h.B_hat * U + h.C_hat * h.mu_hat;
  for (int j = 0; j < n_c; ++j) {
    const double margin = cs.d[j] - cs.H.row(j).dot(mean_end);
    const double rhs = quantile * (cs.H.row(j) * h.C_hat * stacked_sqrt).norm();
    for (double delta : {cfg.Delta_bar[j], -cfg.Delta_bar[j]})
      if (margin - delta < rhs - detail::kConditionTol) return false;
  }
  return true;
}

// Assemble the one-step condition as G u <= g (2 n_c rows, worst error
// sign per row duplicated for symmetry with the condition checks) and
// hand it to the LP. A returned input always re-passes the exact check.
inline std::optional<Vector> solve_stay_input(const LinearModel& model, const ConstraintSet& cs,
                                              const SafetyConfig& cfg, const GaussianNoise& noise,
                                              const Vector& x, double q) {
  detail::check_chance_dims(model, cs, cfg, noise);
  require_domain(q > 0.5 && q < 1.0, "solve_stay_input: q must lie in (0.5, 1)");
  const int n_c = cs.num_constraints();
  const int m = model.input_dim();
  const double quantile = normal_cdf_inv(1.0 - (1.0 - q) / n_c);
  Matrix G(2 * n_c, m);
  Vector g(2 * n_c);
  for (int j = 0; j < n_c; ++j) {
    const double base = cs.d[j] - cs.H.row(j).dot(model.A * x + noise.mean) -
                        quantile * (cs.H.row(j) * noise.sqrt_cov).norm();
    for (int s = 0; s < 2; ++s) {
      G.row(2 * j + s) = cs.H.row(j) * model.B;
      g[2 * j + s] = base - (s == 0 ? cfg.delta_bar[j] : -cfg.delta_bar[j]);
    }
  }
  auto u = solve_lp_feasible(LinearFeasibilityProblem(G, g));
  if (u && !stay_condition_holds(model, cs, cfg, noise, x, *u, q)) return std::nullopt;
  return u;
}

// Same assembly over the tau-step condition: 2 n_c rows, m*tau variables.
inline std::optional<Vector> solve_back_sequence(const LinearModel& model, const ConstraintSet& cs,
                                                 const SafetyConfig& cfg, const GaussianNoise& noise,
                                                 const Vector& x, double q) {
  detail::check_chance_dims(model, cs, cfg, noise);
  require_domain(q > 0.5 && q < 1.0, "solve_back_sequence: q must lie in (0.5, 1)");
  const HorizonModel h = build_horizon(model, noise, cfg.tau);
  const int n_c = cs.num_constraints();
  const double quantile = normal_cdf_inv(1.0 - (1.0 - q) / n_c);
  const Matrix stacked_sqrt = psd_sqrt(h.cov_block);
  Matrix G(2 * n_c, h.B_hat.cols());
  Vector g(2 * n_c);
  for (int j = 0; j < n_c; ++j) {
    const double base = cs.d[j] - cs.H.row(j).dot(h.A_pow_tau * x + h.C_hat * h.mu_hat) -
                        quantile * (cs.H.row(j) * h.C_hat * stacked_sqrt).norm();
    for (int s = 0; s < 2; ++s) {
      G.row(2 * j + s) = cs.H.row(j) * h.B_hat;
      g[2 * j + s] = base - (s == 0 ? cfg.Delta_bar[j] : -cfg.Delta_bar[j]);
    }
  }
  auto U = solve_lp_feasible(LinearFeasibilityProblem(G, g));
  if (U && !back_condition_holds(model, cs, cfg, noise, x, *U, q)) return std::nullopt;
  return U;
}

}  // namespace safex
