#pragma once

// Monte Carlo and exact oracles used to test the safety guarantees as
// statistical/structural properties: the recovery Markov chain, one- and
// tau-step safety frequency estimators, and per-step frequency reports.

#include "safex/core.hpp"
#include "safex/normal.hpp"
#include "safex/random.hpp"

#include <functional>
#include <vector>

namespace safex::verify {

// Recovery chain on states {1, ..., tau+2}: state 1 is "safe", state i+1
// means "unsafe for the last i steps". From state i the chain returns to
// 1 with probability rho_i, otherwise moves to min(i+1, tau+2).
struct MarkovChainSpec {
  Vector rho;  // tau + 2 return probabilities
  int tau;
  int horizon;

  MarkovChainSpec(Vector rho_, int tau_, int horizon_)
      : rho(std::move(rho_)), tau(tau_), horizon(horizon_) {
    require_domain(tau >= 1, "MarkovChainSpec: tau must be positive");
    require_shape(rho.size() == tau + 2, "MarkovChainSpec: need tau + 2 return probabilities");
    require_domain(horizon >= 1, "MarkovChainSpec: horizon must be positive");
    // (0, 1] so that degenerate always-return chains remain expressible
    for (Eigen::Index i = 0; i < rho.size(); ++i)
      require_domain(rho[i] > 0.0 && rho[i] <= 1.0, "MarkovChainSpec: rho_i must lie in (0, 1]");
  }

  // Composite return condition guaranteeing recovery within tau steps
  // with probability >= xi:  rho_2 + sum_i rho_i prod_j (1 - rho_j) >= xi.
  double composite_return_probability() const {
    double total = rho[1];
    double stay_unsafe = 1.0;
    for (int i = 2; i <= tau; ++i) {
      stay_unsafe *= 1.0 - rho[i - 1];
      total += rho[i] * stay_unsafe;
    }
    return total;
  }
};

// Exact forward recursion; returns p_k^{(1)} for k = 0..horizon with the
// chain started in state 1.
inline std::vector<double> markov_exact(const MarkovChainSpec& spec) {
  const int states = spec.tau + 2;
  Vector p = Vector::Zero(states);
  p[0] = 1.0;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(spec.horizon) + 1);
  out.push_back(p[0]);
  for (int k = 1; k <= spec.horizon; ++k) {
    Vector next = Vector::Zero(states);
    for (int i = 0; i < states; ++i) next[0] += spec.rho[i] * p[i];
    for (int i = 1; i < states - 1; ++i) next[i] = (1.0 - spec.rho[i - 1]) * p[i - 1];
    next[states - 1] = (1.0 - spec.rho[states - 2]) * p[states - 2] +
                       (1.0 - spec.rho[states - 1]) * p[states - 1];
    p = next;
    out.push_back(p[0]);
  }
  return out;
}

// Empirical counterpart over independently simulated chains.
inline std::vector<double> markov_simulate(const MarkovChainSpec& spec, int n_chains, Rng& rng) {
  require_domain(n_chains >= 1, "markov_simulate: need at least one chain");
  std::vector<long> in_safe(static_cast<std::size_t>(spec.horizon) + 1, 0);
  const int last = spec.tau + 1;  // 0-based index of state tau+2
  for (int c = 0; c < n_chains; ++c) {
    int state = 0;
    in_safe[0]++;
    for (int k = 1; k <= spec.horizon; ++k) {
      state = (rng.uniform() < spec.rho[state]) ? 0 : std::min(state + 1, last);
      if (state == 0) in_safe[static_cast<std::size_t>(k)]++;
    }
  }
  std::vector<double> out(in_safe.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = static_cast<double>(in_safe[k]) / n_chains;
  return out;
}

using StepFn = std::function<Vector(const Vector&, const Vector&, const Vector&)>;
using InputSampler = std::function<Vector(Rng&)>;

struct SafetyFrequency {
  Vector per_row;  // empirical Pr{ h_j^T x' + offset_j <= d_j }
  double joint;    // all rows simultaneously
  int samples;
};

// One-step safety frequency: x' = step(x, u, w) with u from the input
// sampler and w ~ noise, independently per trial. `row_offsets` (when
// nonempty) adds the adversarial constant offsets of the linear-route
// oracles to h_j^T x'.
inline SafetyFrequency mc_one_step_safety(const StepFn& step, const ConstraintSet& cs,
                                          const Vector& x, const InputSampler& input,
                                          const GaussianNoise& noise, int n, Rng& rng,
                                          const Vector& row_offsets = Vector()) {
  require_domain(n >= 1000, "mc_one_step_safety: need at least 1e3 samples");
  const int n_c = cs.num_constraints();
  Vector offsets = row_offsets.size() == 0 ? Vector::Zero(n_c) : row_offsets;
  require_shape(offsets.size() == n_c, "mc_one_step_safety: offsets per constraint row");
  Eigen::VectorXi row_hits = Eigen::VectorXi::Zero(n_c);
  int joint_hits = 0;
  for (int t = 0; t < n; ++t) {
    const Vector u = input(rng);
    const Vector w = sample_gaussian(noise, rng);
    const Vector xn = step(x, u, w);
    bool all_ok = true;
    for (int j = 0; j < n_c; ++j) {
      const bool ok = cs.H.row(j).dot(xn) + offsets[j] <= cs.d[j];
      if (ok) row_hits[j]++;
      else all_ok = false;
    }
    if (all_ok) joint_hits++;
  }
  SafetyFrequency f;
  f.per_row = row_hits.cast<double>() / n;
  f.joint = static_cast<double>(joint_hits) / n;
  f.samples = n;
  return f;
}

// tau-step variant: applies the given input sequence in order with a
// fresh disturbance draw per step; offsets act on the terminal state.
inline SafetyFrequency mc_tau_step_safety(const StepFn& step, const ConstraintSet& cs,
                                          const Vector& x, const std::vector<Vector>& inputs,
                                          const GaussianNoise& noise, int n, Rng& rng,
                                          const Vector& row_offsets = Vector()) {
  require_domain(n >= 1000, "mc_tau_step_safety: need at least 1e3 samples");
  require_domain(!inputs.empty(), "mc_tau_step_safety: empty input sequence");
  const int n_c = cs.num_constraints();
  Vector offsets = row_offsets.size() == 0 ? Vector::Zero(n_c) : row_offsets;
  require_shape(offsets.size() == n_c, "mc_tau_step_safety: offsets per constraint row");
  Eigen::VectorXi row_hits = Eigen::VectorXi::Zero(n_c);
  int joint_hits = 0;
  for (int t = 0; t < n; ++t) {
    Vector xs = x;
    for (const Vector& u : inputs) xs = step(xs, u, sample_gaussian(noise, rng));
    bool all_ok = true;
    for (int j = 0; j < n_c; ++j) {
      const bool ok = cs.H.row(j).dot(xs) + offsets[j] <= cs.d[j];
      if (ok) row_hits[j]++;
      else all_ok = false;
    }
    if (all_ok) joint_hits++;
  }
  SafetyFrequency f;
  f.per_row = row_hits.cast<double>() / n;
  f.joint = static_cast<double>(joint_hits) / n;
  f.samples = n;
  return f;
}

inline double binomial_se(double p, int n) { return std::sqrt(p * (1.0 - p) / n); }

// Per-timestep constraint-satisfaction frequencies over episodes, with
// Wilson 99% bounds. Passing the band criterion means
//   min_k frequency_k >= eta - 3 sqrt(eta (1-eta) / n).
struct FrequencyReport {
  int episodes = 0;
  int steps = 0;
  double eta = 0.0;
  double band_threshold = 0.0;
  std::vector<int> safe_count;
  std::vector<double> frequency;
  std::vector<double> wilson_lower;
  std::vector<double> wilson_upper;
  double min_frequency = 0.0;
  double mean_frequency = 0.0;
  bool pass_band = false;
  bool pass_strict = false;
};

inline FrequencyReport frequency_report(const std::vector<std::vector<char>>& safe_flags,
                                        double eta) {
  require_domain(!safe_flags.empty(), "frequency_report: no episodes");
  require_domain(eta > 0.0 && eta < 1.0, "frequency_report: eta must lie in (0, 1)");
  FrequencyReport rep;
  rep.episodes = static_cast<int>(safe_flags.size());
  rep.steps = static_cast<int>(safe_flags.front().size());
  for (const auto& ep : safe_flags)
    require_shape(static_cast<int>(ep.size()) == rep.steps, "frequency_report: ragged episodes");
  rep.eta = eta;
  rep.band_threshold = eta - 3.0 * binomial_se(eta, rep.episodes);
  const double z = normal_cdf_inv(0.995);
  rep.safe_count.assign(static_cast<std::size_t>(rep.steps), 0);
  for (const auto& ep : safe_flags)
    for (int k = 0; k < rep.steps; ++k)
      if (ep[static_cast<std::size_t>(k)]) rep.safe_count[static_cast<std::size_t>(k)]++;
  rep.min_frequency = 1.0;
  double freq_sum = 0.0;
  for (int k = 0; k < rep.steps; ++k) {
    const double n = rep.episodes;
    const double p = rep.safe_count[static_cast<std::size_t>(k)] / n;
    rep.frequency.push_back(p);
    const double denom = 1.0 + z * z / n;
    const double center = p + z * z / (2.0 * n);
    const double spread = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
    rep.wilson_lower.push_back((center - spread) / denom);
    rep.wilson_upper.push_back((center + spread) / denom);
    rep.min_frequency = std::min(rep.min_frequency, p);
    freq_sum += p;
  }
  rep.mean_frequency = freq_sum / rep.steps;
  rep.pass_band = rep.min_frequency >= rep.band_threshold;
  rep.pass_strict = rep.min_frequency >= eta;
  return rep;
}

}  // namespace safex::verify
