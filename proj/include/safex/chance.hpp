#pragma once

// Deterministic reformulation of the per-step Gaussian chance constraints:
// the probability schedule eta'_k, the tightened per-row radii, the
// exploration feasibility test, and the largest admissible exploration
// covariance of the form s^2 * Sigma_base.

#include "safex/core.hpp"
#include "safex/normal.hpp"

#include <vector>

namespace safex {

// Target level for x_{k+1} staying safe when leaving state k:
// (eta / xi^k)^(1/tau). Strictly greater than eta for k >= 0.
inline double q_stay(const SafetyConfig& cfg, int k) {
  require_domain(k >= 0 && k <= cfg.horizon, "q_stay: timestep outside horizon");
  return std::pow(cfg.eta / std::pow(cfg.xi, k), 1.0 / cfg.tau);
}

// Per-row level eta'_k = 1 - (1 - (eta/xi^k)^(1/tau)) / n_c compensating
// the union bound over constraint rows. Lies in (0.5, 1).
inline double eta_prime(const SafetyConfig& cfg, int n_c, int k) {
  require_domain(n_c >= 1, "eta_prime: need at least one constraint");
  return 1.0 - (1.0 - q_stay(cfg, k)) / n_c;
}

// RHS of the tightened inequality for one (row, error-sign) pair:
// radius = (d_j - h_j^T x_hat - delta) / Phi^{-1}(q). Negative radius
// means the exploratory case is infeasible on this pair.
struct TightenedBound {
  int j;
  double delta;
  double radius;
};

namespace detail {

inline void check_chance_dims(const LinearModel& model, const ConstraintSet& cs,
                              const SafetyConfig& cfg, const GaussianNoise& noise) {
  require_shape(cs.state_dim() == model.state_dim(), "constraints vs model state dimension");
  require_shape(noise.dim() == model.state_dim(), "noise vs model state dimension");
  require_shape(cfg.delta_bar.size() == cs.num_constraints(), "delta_bar length vs constraint rows");
  require_shape(cfg.Delta_bar.size() == cs.num_constraints(), "Delta_bar length vs constraint rows");
}

}  // namespace detail

inline std::vector<TightenedBound> tightened_radii(const LinearModel& model, const ConstraintSet& cs,
                                                   const SafetyConfig& cfg, const GaussianNoise& noise,
                                                   const Vector& x, const Vector& u_mean, double q) {
  detail::check_chance_dims(model, cs, cfg, noise);
  require_domain(q > 0.5 && q < 1.0, "tightened_radii: q must lie in (0.5, 1)");
  const Vector x_hat = predict_mean_next(model, noise, x, u_mean);
  const double inv_quantile = 1.0 / normal_cdf_inv(q);
  std::vector<TightenedBound> out;
  out.reserve(2 * cs.num_constraints());
  for (int j = 0; j < cs.num_constraints(); ++j) {
    const double margin = cs.d[j] - cs.H.row(j).dot(x_hat);
    for (double delta : {cfg.delta_bar[j], -cfg.delta_bar[j]}) {
      out.push_back({j, delta, (margin - delta) * inv_quantile});
      if (cfg.delta_bar[j] == 0.0) break;  // avoid duplicating the zero-bound pair
    }
  }
  return out;
}

// Case-(i) guard: the disturbance alone must fit inside every tightened
// radius at level eta'_k. (The caller separately checks x in X_s.)
inline bool exploration_feasible(const LinearModel& model, const ConstraintSet& cs,
                                 const SafetyConfig& cfg, const GaussianNoise& noise,
                                 const Vector& x, const Vector& u_mean, int k) {
  const double q = eta_prime(cfg, cs.num_constraints(), k);
  for (const TightenedBound& tb : tightened_radii(model, cs, cfg, noise, x, u_mean, q)) {
    const double noise_norm = (cs.H.row(tb.j) * noise.sqrt_cov).norm();
    if (noise_norm > tb.radius) return false;
  }
  return true;
}

// Largest Sigma_k = s^2 * sigma_base, s in [0, s_max], satisfying the
// covariance condition for every (row, error-sign) pair. Uses the norm
// split  | [h^T B Sigma_k^(1/2), h^T Sigma_w^(1/2)] |^2
//      = |h^T B Sigma_k^(1/2)|^2 + |h^T Sigma_w^(1/2)|^2.
inline Matrix max_exploration_cov(const LinearModel& model, const ConstraintSet& cs,
                                  const SafetyConfig& cfg, const GaussianNoise& noise,
                                  const Vector& x, const Vector& u_mean, int k,
                                  const Matrix& sigma_base, double s_max) {
  require_shape(sigma_base.rows() == model.input_dim() && sigma_base.cols() == model.input_dim(),
                "max_exploration_cov: sigma_base must be m x m");
  require_domain(s_max >= 0.0, "max_exploration_cov: s_max must be nonnegative");
  if (!exploration_feasible(model, cs, cfg, noise, x, u_mean, k))
    throw std::domain_error("max_exploration_cov: exploratory case infeasible at this state");
  const Matrix base_sqrt = psd_sqrt(sigma_base);
  const double q = eta_prime(cfg, cs.num_constraints(), k);
  double s = s_max;
  for (const TightenedBound& tb : tightened_radii(model, cs, cfg, noise, x, u_mean, q)) {
    const double gain = (cs.H.row(tb.j) * model.B * base_sqrt).norm();
    if (gain == 0.0) continue;  // this row does not see the exploration term
    const double noise_sq = (cs.H.row(tb.j) * noise.sqrt_cov).squaredNorm();
    const double budget = tb.radius * tb.radius - noise_sq;
    s = std::min(s, std::sqrt(std::max(0.0, budget)) / gain);
  }
  return (s * s) * sigma_base;
}

// Direct verification of the covariance condition with B' = [B, I] and the
// block-diagonal square root computed exactly (no norm split), so it is an
// independent check on max_exploration_cov.
inline bool check_sigma(const LinearModel& model, const ConstraintSet& cs,
                        const SafetyConfig& cfg, const GaussianNoise& noise,
                        const Vector& x, const Vector& u_mean, int k, const Matrix& sigma) {
  const int n = model.state_dim();
  const int m = model.input_dim();
  require_shape(sigma.rows() == m && sigma.cols() == m, "check_sigma: sigma must be m x m");
  Matrix block = Matrix::Zero(m + n, m + n);
  block.topLeftCorner(m, m) = sigma;
  block.bottomRightCorner(n, n) = noise.cov;
  const Matrix block_sqrt = psd_sqrt(block);  // rejects non-PSD sigma
  Matrix b_prime(n, m + n);
  b_prime << model.B, Matrix::Identity(n, n);
  const double q = eta_prime(cfg, cs.num_constraints(), k);
  for (const TightenedBound& tb : tightened_radii(model, cs, cfg, noise, x, u_mean, q)) {
    const double lhs = (cs.H.row(tb.j) * b_prime * block_sqrt).norm();
    if (lhs > tb.radius + 1e-9) return false;
  }
  return true;
}

}  // namespace safex
