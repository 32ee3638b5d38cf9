#pragma once

// Named verification suites: statistical tests of the safety lemmas and
// theorems against both the linear-route oracles (the quantity the
// proofs bound) and the true nonlinear plants. Shared by the CLI verify
// subcommand and the acceptance suite.

#include "safex/chance.hpp"
#include "safex/conservative.hpp"
#include "safex/envs.hpp"
#include "safex/explorer.hpp"
#include "safex/verify.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace safex::suites {

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::string detail;

  void fail(const std::string& line) {
    pass = false;
    detail += "  FAIL " + line + "\n";
  }
  void note(const std::string& line) { detail += "  " + line + "\n"; }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Uniform state sampler honoring axis-aligned constraint rows: bounded
// coordinates are drawn inside their (optionally shrunk) box, free ones
// from [-pi, pi].
inline Vector sample_state(const envs::Environment& env, Rng& rng, double shrink = 1.0) {
  Vector x(env.state_dim);
  for (int i = 0; i < env.state_dim; ++i) {
    double lo = -std::numbers::pi, hi = std::numbers::pi;
    for (int j = 0; j < env.constraints.num_constraints(); ++j) {
      const Vector row = env.constraints.H.row(j).transpose();
      const bool single_axis =
          row[i] != 0.0 && row.cwiseAbs().sum() <= std::abs(row[i]) * (1.0 + 1e-12);
      if (!single_axis) continue;
      const double bound = env.constraints.d[j] / row[i] * shrink;
      if (row[i] > 0.0) hi = bound;
      else lo = bound;
    }
    x[i] = rng.uniform(std::min(lo, hi), std::max(lo, hi));
  }
  return x;
}

inline verify::StepFn linear_step(const LinearModel& model) {
  return [model](const Vector& x, const Vector& u, const Vector& w) {
    return (model.A * x + model.B * u + w).eval();
  };
}

}  // namespace detail

// Exploratory inputs at the covariance boundary keep every constraint
// row satisfied with probability eta'_k, on the offset linear model and
// on the true plant.
inline SuiteResult lemma1(const envs::Environment& env, int n_states, int n_samples,
                          std::uint64_t seed) {
  SuiteResult res{"lemma1-" + env.name};
  Rng rng(seed);
  const int n_c = env.constraints.num_constraints();
  int tested = 0;
  int attempts = 0;
  while (tested < n_states && attempts < 100 * n_states) {
    ++attempts;
    const Vector x = detail::sample_state(env, rng);
    Vector u_mean(env.input_dim);
    for (int i = 0; i < env.input_dim; ++i) u_mean[i] = rng.uniform(-1, 1);
    const int k = static_cast<int>(rng.uniform_index(env.safety.horizon));
    if (!is_safe(env.constraints, x) ||
        !exploration_feasible(env.model, env.constraints, env.safety, env.safety_noise, x,
                              u_mean, k))
      continue;
    ++tested;
    const double level = eta_prime(env.safety, n_c, k);
    const Matrix sigma =
        max_exploration_cov(env.model, env.constraints, env.safety, env.safety_noise, x, u_mean,
                            k, Matrix::Identity(env.input_dim, env.input_dim), 1e9);
    const GaussianNoise input_noise(u_mean, sigma);
    auto sampler = [&input_noise](Rng& r) { return sample_gaussian(input_noise, r); };
    const double band = level - 3.0 * verify::binomial_se(level, n_samples);

    const auto lin =
        verify::mc_one_step_safety(detail::linear_step(env.model), env.constraints, x, sampler,
                                   env.safety_noise, n_samples, rng, env.safety.delta_bar);
    for (int j = 0; j < n_c; ++j)
      if (lin.per_row[j] < band)
        res.fail("linear row " + std::to_string(j) + " freq " + detail::fmt(lin.per_row[j]) +
                 " < " + detail::fmt(band) + " at k=" + std::to_string(k));

    const auto plant = verify::mc_one_step_safety(env.step, env.constraints, x, sampler,
                                                  env.plant_noise, n_samples, rng);
    for (int j = 0; j < n_c; ++j)
      if (plant.per_row[j] < band)
        res.fail("plant row " + std::to_string(j) + " freq " + detail::fmt(plant.per_row[j]) +
                 " < " + detail::fmt(band) + " at k=" + std::to_string(k));
    const double joint_level = q_stay(env.safety, k);
    const double joint_band = joint_level - 3.0 * verify::binomial_se(joint_level, n_samples);
    if (plant.joint < joint_band)
      res.fail("plant joint freq " + detail::fmt(plant.joint) + " < " + detail::fmt(joint_band));
  }
  if (tested < n_states) res.fail("could not find enough feasible exploration states");
  res.note(std::to_string(tested) + " states x " + std::to_string(n_samples) + " samples");
  return res;
}

// Exact recovery-chain recursion dominates xi^k rho_1^tau for randomized
// specs meeting the composite return condition.
inline SuiteResult lemma2(int n_specs, int horizon, std::uint64_t seed) {
  SuiteResult res{"lemma2"};
  Rng rng(seed);
  int produced = 0;
  long violations = 0;
  while (produced < n_specs) {
    const int tau = 1 + static_cast<int>(rng.uniform_index(3));
    const double xi = rng.uniform(0.99, 0.9999);
    Vector rho(tau + 2);
    rho[0] = rng.uniform(0.5, 0.999);
    for (int i = 1; i < tau + 2; ++i) rho[i] = 1.0 - rng.uniform(0.0, 1.0 - xi);
    verify::MarkovChainSpec spec(rho, tau, horizon);
    if (spec.composite_return_probability() < xi) continue;
    ++produced;
    const auto p = verify::markov_exact(spec);
    for (int k = 1; k <= horizon; ++k)
      if (!(p[static_cast<std::size_t>(k)] > std::pow(xi, k) * std::pow(rho[0], tau)))
        ++violations;
  }
  if (violations > 0) res.fail(std::to_string(violations) + " bound violations");
  res.note(std::to_string(produced) + " specs x horizon " + std::to_string(horizon) +
           ", violations: " + std::to_string(violations));
  return res;
}

// Closed-form and LP-solved stay inputs pass the exact one-step
// inequality and reach q_stay(k) empirically.
inline SuiteResult theorem1_stay(const envs::Environment& env, int n_samples,
                                 std::uint64_t seed) {
  SuiteResult res{"theorem1-stay-" + env.name};
  Rng rng(seed);
  std::vector<std::pair<Vector, int>> cases = {{env.x0, 0}};
  for (int i = 0; i < 4; ++i)
    cases.emplace_back(detail::sample_state(env, rng, 0.9),
                       static_cast<int>(rng.uniform_index(env.safety.horizon)));
  for (const auto& [x, k] : cases) {
    const double q = q_stay(env.safety, k);
    std::vector<std::pair<std::string, Vector>> inputs;
    if (env.stay_closed_form) inputs.emplace_back("closed-form", env.stay_closed_form(x));
    auto lp = solve_stay_input(env.model, env.constraints, env.safety, env.safety_noise, x, q);
    if (!lp) {
      res.fail("LP stay infeasible at k=" + std::to_string(k));
      continue;
    }
    inputs.emplace_back("lp", *lp);
    for (const auto& [label, u] : inputs) {
      if (!stay_condition_holds(env.model, env.constraints, env.safety, env.safety_noise, x, u, q))
        res.fail(label + " input fails the exact one-step inequality at k=" + std::to_string(k));
      auto fixed = [&u](Rng&) { return u; };
      const double band = q - 3.0 * verify::binomial_se(q, n_samples);
      const auto lin =
          verify::mc_one_step_safety(detail::linear_step(env.model), env.constraints, x, fixed,
                                     env.safety_noise, n_samples, rng, env.safety.delta_bar);
      if (lin.joint < band)
        res.fail(label + " linear joint freq " + detail::fmt(lin.joint) + " < " +
                 detail::fmt(band));
      const auto plant = verify::mc_one_step_safety(env.step, env.constraints, x, fixed,
                                                    env.plant_noise, n_samples, rng);
      if (plant.joint < band)
        res.fail(label + " plant joint freq " + detail::fmt(plant.joint) + " < " +
                 detail::fmt(band));
    }
  }
  res.note(std::to_string(cases.size()) + " states x " + std::to_string(n_samples) + " samples");
  return res;
}

// Same for the tau-step back sequences at level xi from unsafe states.
inline SuiteResult theorem1_back(const envs::Environment& env, int n_samples,
                                 std::uint64_t seed) {
  SuiteResult res{"theorem1-back-" + env.name};
  Rng rng(seed);
  const double q = env.safety.xi;
  std::vector<Vector> cases;
  for (int i = 0; i < 5; ++i) {
    Vector x = detail::sample_state(env, rng);
    // push one bounded coordinate outside its box
    const int j = static_cast<int>(rng.uniform_index(env.constraints.num_constraints()));
    const Vector row = env.constraints.H.row(j).transpose();
    for (int c = 0; c < env.state_dim; ++c)
      if (row[c] != 0.0) x[c] = (env.constraints.d[j] / row[c]) * rng.uniform(1.01, 1.4);
    if (!is_safe(env.constraints, x)) cases.push_back(x);
  }
  if (cases.empty()) {
    res.fail("no unsafe states generated");
    return res;
  }
  for (const Vector& x : cases) {
    std::vector<std::pair<std::string, std::vector<Vector>>> sequences;
    if (env.back_closed_form) sequences.emplace_back("closed-form", env.back_closed_form(x));
    auto lp = solve_back_sequence(env.model, env.constraints, env.safety, env.safety_noise, x, q);
    if (!lp) {
      res.fail("LP back sequence infeasible");
      continue;
    }
    std::vector<Vector> lp_seq;
    for (int i = 0; i < env.safety.tau; ++i)
      lp_seq.push_back(lp->segment(i * env.input_dim, env.input_dim));
    sequences.emplace_back("lp", lp_seq);
    for (const auto& [label, seq] : sequences) {
      Vector stacked(env.input_dim * env.safety.tau);
      for (int i = 0; i < env.safety.tau; ++i)
        stacked.segment(i * env.input_dim, env.input_dim) = seq[static_cast<std::size_t>(i)];
      if (!back_condition_holds(env.model, env.constraints, env.safety, env.safety_noise, x,
                                stacked, q))
        res.fail(label + " sequence fails the exact tau-step inequality");
      const double band = q - 3.0 * verify::binomial_se(q, n_samples);
      const auto lin =
          verify::mc_tau_step_safety(detail::linear_step(env.model), env.constraints, x, seq,
                                     env.safety_noise, n_samples, rng, env.safety.Delta_bar);
      if (lin.joint < band)
        res.fail(label + " linear joint freq " + detail::fmt(lin.joint) + " < " +
                 detail::fmt(band));
      const auto plant = verify::mc_tau_step_safety(env.step, env.constraints, x, seq,
                                                    env.plant_noise, n_samples, rng);
      if (plant.joint < band)
        res.fail(label + " plant joint freq " + detail::fmt(plant.joint) + " < " +
                 detail::fmt(band));
    }
  }
  res.note(std::to_string(cases.size()) + " states x " + std::to_string(n_samples) + " samples");
  return res;
}

// Full switching loop with a fixed zero base policy: the per-step
// empirical constraint-satisfaction frequency stays above the
// 3-standard-error band around eta at every step.
inline SuiteResult theorem2(const envs::Environment& env, int episodes, std::uint64_t seed) {
  SuiteResult res{"theorem2-" + env.name};
  Rng rng(seed);
  const Vector zero_mean = Vector::Zero(env.input_dim);
  std::vector<std::vector<char>> safe_flags;
  safe_flags.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    SafeExplorer explorer({env.model, env.constraints, env.safety, env.safety_noise,
                           Matrix::Identity(env.input_dim, env.input_dim), 1.0,
                           env.stay_closed_form, env.back_closed_form, false});
    Vector x = env.x0;
    std::vector<char> flags;
    flags.reserve(static_cast<std::size_t>(env.safety.horizon));
    for (int k = 0; k < env.safety.horizon; ++k) {
      const Decision d = explorer.decide(x, zero_mean, rng);
      x = env.step(x, d.input, sample_gaussian(env.plant_noise, rng));
      flags.push_back(is_safe(env.constraints, x) ? 1 : 0);
      explorer.advance();
    }
    safe_flags.push_back(std::move(flags));
  }
  const auto report = verify::frequency_report(safe_flags, env.safety.eta);
  if (!report.pass_band)
    res.fail("min frequency " + detail::fmt(report.min_frequency) + " below band " +
             detail::fmt(report.band_threshold));
  res.note("episodes: " + std::to_string(episodes) +
           ", min freq: " + detail::fmt(report.min_frequency) +
           ", band: " + detail::fmt(report.band_threshold));
  return res;
}

}  // namespace safex::suites
