#pragma once

// Configuration-driven experiment runner: the switching rule wrapped
// around a learning DDPG agent on the true nonlinear plant, with
// deterministic seed-split parallelism across runs and CSV artifacts.

#include "safex/envs.hpp"
#include "safex/explorer.hpp"
#include "safex/rl.hpp"
#include "safex/verify.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace safex::sim {

struct ExperimentConfig {
  std::string environment = "pendulum";  // pendulum | manipulator
  std::string method = "proposed";       // proposed | baseline
  int runs = 10;
  int episodes = 100;
  int steps = 100;
  std::uint64_t seed = 1;
  std::string outdir = "safex-out";
  int threads = 0;  // 0: hardware concurrency

  // probability schedule
  double eta = 0.95;
  double xi = 0.9998;
  int tau = 2;

  // plant parameters (paper defaults baked into the param records)
  envs::PendulumParams pendulum;
  envs::ManipulatorParams manipulator;
  double state_bound = 6.0;  // velocity box half-width, both plants
  bool pendulum_paper_stated_Delta = false;

  // disturbance overrides; empty means the paper values
  std::vector<double> mu_w;
  std::vector<double> sigma_w_std;
  std::vector<double> x0;

  // exploration shaping
  double explore_std = 1.0;
  double s_max = 1.0;
  bool resolve_back_each_step = false;
  bool use_closed_form = true;

  // DDPG
  int hidden = 64;
  double actor_lr = 1e-3;
  double critic_lr = 2e-3;
  double gamma = 0.99;
  double soft_tau = 5e-3;
  int batch = 64;
  double buffer_capacity = 5e5;
  double action_bound = 0.0;  // 0: environment default (2 torque / 10 volts)
  bool store_conservative = true;

  std::vector<std::string> validate() const {
    std::vector<std::string> bad;
    auto expect = [&bad](bool ok, const std::string& what) {
      if (!ok) bad.push_back(what);
    };
    expect(environment == "pendulum" || environment == "manipulator",
           "environment must be 'pendulum' or 'manipulator'");
    expect(method == "proposed" || method == "baseline",
           "method must be 'proposed' or 'baseline'");
    expect(runs >= 1, "runs must be >= 1");
    expect(episodes >= 1, "episodes must be >= 1");
    expect(steps >= 1, "steps must be >= 1");
    expect(eta > 0.5 && eta < 1.0, "eta must lie in (0.5, 1)");
    if (steps >= 1 && eta > 0.0 && eta < 1.0)
      expect(xi > std::pow(eta, 1.0 / steps) && xi < 1.0,
             "xi must satisfy eta^(1/steps) < xi < 1");
    expect(tau >= 1, "tau must be >= 1");
    expect(state_bound > 0.0, "state-bound must be positive");
    expect(explore_std > 0.0, "explore-std must be positive");
    expect(s_max >= 0.0, "s-max must be nonnegative");
    expect(hidden >= 1, "hidden must be >= 1");
    expect(actor_lr >= 0.0 && critic_lr >= 0.0, "learning rates must be nonnegative");
    expect(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
    expect(soft_tau >= 0.0 && soft_tau <= 1.0, "soft-tau must lie in [0, 1]");
    expect(batch >= 1, "batch must be >= 1");
    expect(buffer_capacity >= batch, "buffer capacity must hold at least one minibatch");
    expect(action_bound >= 0.0, "action-bound must be nonnegative");
    const std::size_t n = environment == "manipulator" ? 4 : 2;
    expect(mu_w.empty() || mu_w.size() == n, "mu-w must have one entry per state dimension");
    expect(sigma_w_std.empty() || sigma_w_std.size() == n,
           "sigma-w-std must have one entry per state dimension");
    expect(x0.empty() || x0.size() == n, "x0 must have one entry per state dimension");
    return bad;
  }
};

inline envs::Environment build_environment(const ExperimentConfig& cfg) {
  const bool baseline = cfg.method == "baseline";
  auto to_vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  if (cfg.environment == "manipulator") {
    envs::ManipulatorOptions opt;
    opt.params = cfg.manipulator;
    opt.safety = {cfg.eta, cfg.xi, cfg.tau, cfg.steps};
    opt.omega_max = cfg.state_bound;
    opt.baseline = baseline;
    opt.use_closed_form = cfg.use_closed_form;
    if (!cfg.mu_w.empty()) opt.mu_w = to_vec(cfg.mu_w);
    if (!cfg.sigma_w_std.empty()) opt.sigma_w_std = to_vec(cfg.sigma_w_std);
    if (!cfg.x0.empty()) opt.x0 = to_vec(cfg.x0);
    return envs::make_manipulator(opt);
  }
  envs::PendulumOptions opt;
  opt.params = cfg.pendulum;
  opt.safety = {cfg.eta, cfg.xi, cfg.tau, cfg.steps};
  opt.zeta_max = cfg.state_bound;
  opt.paper_stated_Delta = cfg.pendulum_paper_stated_Delta;
  opt.baseline = baseline;
  opt.use_closed_form = cfg.use_closed_form;
  if (!cfg.mu_w.empty()) opt.mu_w = to_vec(cfg.mu_w);
  if (!cfg.sigma_w_std.empty()) opt.sigma_w_std = to_vec(cfg.sigma_w_std);
  if (!cfg.x0.empty()) opt.x0 = to_vec(cfg.x0);
  return envs::make_pendulum(opt);
}

struct StepRow {
  int run;
  int episode;
  int step;      // 1-based: state AFTER applying the step's input
  Vector state;  // x_{k+1}
  Vector input;  // u_k
  CaseTag tag;
  bool safe;
  double cost;  // c_{k+1} = c(x_k, u_k)
};

struct ExperimentResult {
  int state_dim = 0;
  int input_dim = 0;
  std::vector<StepRow> rows;                 // ordered by (run, episode, step)
  Matrix episode_cost;                       // runs x episodes, undiscounted
  std::vector<std::vector<char>> safe_flags; // one row per (run, episode)
  verify::FrequencyReport report;
};

namespace detail {

struct RunOutput {
  std::vector<StepRow> rows;
  std::vector<double> episode_costs;
  std::vector<std::vector<char>> safe_flags;
};

inline RunOutput simulate_run(const ExperimentConfig& cfg, int run) {
  const envs::Environment env = build_environment(cfg);
  rl::DdpgConfig dcfg;
  dcfg.hidden = cfg.hidden;
  dcfg.actor_lr = cfg.actor_lr;
  dcfg.critic_lr = cfg.critic_lr;
  dcfg.gamma = cfg.gamma;
  dcfg.soft_tau = cfg.soft_tau;
  dcfg.batch = cfg.batch;
  dcfg.capacity = static_cast<std::size_t>(cfg.buffer_capacity);
  dcfg.action_bound = cfg.action_bound > 0.0
                          ? cfg.action_bound
                          : (cfg.environment == "manipulator" ? 10.0 : 2.0);

  const std::uint64_t run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
  rl::DdpgAgent agent(env.state_dim, env.input_dim, dcfg, derive_seed(run_seed, 1));
  Rng rng(derive_seed(run_seed, 2));
  rl::ReplayBuffer buffer(dcfg.capacity);

  const Matrix sigma_base =
      (cfg.explore_std * cfg.explore_std) * Matrix::Identity(env.input_dim, env.input_dim);

  RunOutput out;
  out.rows.reserve(static_cast<std::size_t>(cfg.episodes) * cfg.steps);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    SafeExplorer explorer({env.model, env.constraints, env.safety, env.safety_noise, sigma_base,
                           cfg.s_max, env.stay_closed_form, env.back_closed_form,
                           cfg.resolve_back_each_step});
    Vector x = env.x0;
    std::vector<char> flags;
    flags.reserve(static_cast<std::size_t>(cfg.steps));
    double cost_sum = 0.0;
    for (int k = 0; k < cfg.steps; ++k) {
      const Vector policy = agent.policy_mean(x);
      Decision dec;
      try {
        dec = explorer.decide(x, policy, rng);
      } catch (const SafetyInfeasibleError& e) {
        throw SafetyInfeasibleError(e.timestep,
                                    std::string(e.what()) + " (run " + std::to_string(run) +
                                        ", episode " + std::to_string(ep) + ")");
      }
      const Vector w = sample_gaussian(env.plant_noise, rng);
      const Vector xn = env.step(x, dec.input, w);
      const double c = env.cost(x, dec.input);
      cost_sum += c;
      if (cfg.store_conservative || dec.case_tag == CaseTag::Exploratory)
        buffer.store({x, dec.input, c, xn});
      agent.train_step(buffer, rng);
      const bool safe = is_safe(env.constraints, xn);
      out.rows.push_back({run, ep, k + 1, xn, dec.input, dec.case_tag, safe, c});
      flags.push_back(safe ? 1 : 0);
      explorer.advance();
      x = xn;
    }
    out.episode_costs.push_back(cost_sum);
    out.safe_flags.push_back(std::move(flags));
  }
  return out;
}

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_csv_artifacts(const ExperimentConfig& cfg, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.outdir);

  {
    std::ofstream f(fs::path(cfg.outdir) / "steps.csv");
    f << "run,episode,step";
    for (int i = 0; i < result.state_dim; ++i) f << ",x" << i;
    for (int i = 0; i < result.input_dim; ++i) f << ",u" << i;
    f << ",case,safe,cost\n";
    for (const StepRow& r : result.rows) {
      f << r.run << "," << r.episode << "," << r.step;
      for (int i = 0; i < result.state_dim; ++i) f << "," << detail::num(r.state[i]);
      for (int i = 0; i < result.input_dim; ++i) f << "," << detail::num(r.input[i]);
      f << "," << case_tag_name(r.tag) << "," << (r.safe ? 1 : 0) << "," << detail::num(r.cost)
        << "\n";
    }
  }
  {
    std::ofstream f(fs::path(cfg.outdir) / "episodes.csv");
    f << "run,episode,cost_sum\n";
    for (int r = 0; r < result.episode_cost.rows(); ++r)
      for (int e = 0; e < result.episode_cost.cols(); ++e)
        f << r << "," << e << "," << detail::num(result.episode_cost(r, e)) << "\n";
  }
  {
    std::ofstream f(fs::path(cfg.outdir) / "frequency.csv");
    f << "step,n,safe_count,frequency,wilson_lower,wilson_upper,eta,band_threshold\n";
    const auto& rep = result.report;
    for (int k = 0; k < rep.steps; ++k) {
      f << (k + 1) << "," << rep.episodes << "," << rep.safe_count[static_cast<std::size_t>(k)]
        << "," << detail::num(rep.frequency[static_cast<std::size_t>(k)]) << ","
        << detail::num(rep.wilson_lower[static_cast<std::size_t>(k)]) << ","
        << detail::num(rep.wilson_upper[static_cast<std::size_t>(k)]) << ","
        << detail::num(rep.eta) << "," << detail::num(rep.band_threshold) << "\n";
    }
  }
}

// Runs the configured experiment, optionally writing the CSV artifacts.
// Runs are independent (seed-split) and execute on a small thread pool;
// outputs are assembled in run order so results do not depend on
// scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files = true) {
  const auto violations = cfg.validate();
  if (!violations.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw std::invalid_argument(msg);
  }

  std::vector<detail::RunOutput> outputs(static_cast<std::size_t>(cfg.runs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.runs));
  unsigned pool = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                  : std::max(1u, std::thread::hardware_concurrency());
  pool = std::min<unsigned>(pool, static_cast<unsigned>(cfg.runs));
  std::atomic<int> next_run{0};
  auto worker = [&]() {
    for (;;) {
      const int run = next_run.fetch_add(1);
      if (run >= cfg.runs) return;
      try {
        outputs[static_cast<std::size_t>(run)] = detail::simulate_run(cfg, run);
      } catch (...) {
        errors[static_cast<std::size_t>(run)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < pool; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  const envs::Environment env = build_environment(cfg);
  result.state_dim = env.state_dim;
  result.input_dim = env.input_dim;
  result.episode_cost.resize(cfg.runs, cfg.episodes);
  for (int r = 0; r < cfg.runs; ++r) {
    auto& out = outputs[static_cast<std::size_t>(r)];
    for (int e = 0; e < cfg.episodes; ++e)
      result.episode_cost(r, e) = out.episode_costs[static_cast<std::size_t>(e)];
    result.rows.insert(result.rows.end(), out.rows.begin(), out.rows.end());
    for (auto& f : out.safe_flags) result.safe_flags.push_back(std::move(f));
  }
  result.report = verify::frequency_report(result.safe_flags, cfg.eta);
  if (write_files) write_csv_artifacts(cfg, result);
  return result;
}

}  // namespace safex::sim
