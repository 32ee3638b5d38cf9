// Command-line front end: configuration-driven experiment runner, the
// verification suites, and offline SVG plotting.
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 safety infeasibility,
// 4 verification failure.

#include "safex/plot.hpp"
#include "safex/sim.hpp"
#include "safex/suites.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSafety = 3;
constexpr int kExitVerification = 4;

void add_experiment_options(CLI::App* sub, safex::sim::ExperimentConfig& cfg) {
  sub->add_option("--environment,-e", cfg.environment, "pendulum | manipulator")
      ->capture_default_str();
  sub->add_option("--method", cfg.method, "proposed | baseline")->capture_default_str();
  sub->add_option("--runs", cfg.runs, "independent learning runs")->capture_default_str();
  sub->add_option("--episodes", cfg.episodes, "episodes per run")->capture_default_str();
  sub->add_option("--steps", cfg.steps, "timesteps per episode")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  sub->add_option("--outdir,-o", cfg.outdir, "output directory (env SAFEX_OUTDIR)")
      ->capture_default_str();
  sub->add_option("--threads", cfg.threads, "worker threads, 0 = hardware")->capture_default_str();

  sub->add_option("--eta", cfg.eta, "chance-constraint level")->capture_default_str();
  sub->add_option("--xi", cfg.xi, "recovery probability level")->capture_default_str();
  sub->add_option("--tau", cfg.tau, "recovery budget in steps")->capture_default_str();
  sub->add_option("--state-bound", cfg.state_bound, "velocity box half-width")
      ->capture_default_str();

  sub->add_option("--pendulum-mass", cfg.pendulum.m, "pendulum mass [kg]")->capture_default_str();
  sub->add_option("--pendulum-length", cfg.pendulum.l, "pendulum length [m]")
      ->capture_default_str();
  sub->add_option("--gravity", cfg.pendulum.g, "gravity [m/s^2]")->capture_default_str();
  sub->add_option("--sampling-period", cfg.pendulum.Ts, "sampling period [s], both plants")
      ->capture_default_str();
  sub->add_flag("--paper-stated-Delta", cfg.pendulum_paper_stated_Delta,
                "use the one-step bound for the two-step pendulum bound as stated in the "
                "experiment text");

  sub->add_option("--m11-hat", cfg.manipulator.m11_hat, "manipulator inertia 1")
      ->capture_default_str();
  sub->add_option("--m22-hat", cfg.manipulator.m22_hat, "manipulator inertia 2")
      ->capture_default_str();
  sub->add_option("--d11-hat", cfg.manipulator.d11_hat, "manipulator damping 1")
      ->capture_default_str();
  sub->add_option("--d22-hat", cfg.manipulator.d22_hat, "manipulator damping 2")
      ->capture_default_str();
  sub->add_option("--V1", cfg.manipulator.V1, "manipulator gravity coefficient 1")
      ->capture_default_str();
  sub->add_option("--V2", cfg.manipulator.V2, "manipulator gravity coefficient 2")
      ->capture_default_str();
  sub->add_option("--alpha", cfg.manipulator.alpha, "manipulator input gain")
      ->capture_default_str();

  sub->add_option("--mu-w", cfg.mu_w, "disturbance mean override (n entries)")->expected(-1);
  sub->add_option("--sigma-w-std", cfg.sigma_w_std,
                  "disturbance per-coordinate standard deviations (n entries)")
      ->expected(-1);
  sub->add_option("--x0", cfg.x0, "initial state override (n entries)")->expected(-1);

  sub->add_option("--explore-std", cfg.explore_std, "exploration base standard deviation")
      ->capture_default_str();
  sub->add_option("--s-max", cfg.s_max, "cap on the exploration scaling factor")
      ->capture_default_str();
  sub->add_flag("--resolve-back-each-step", cfg.resolve_back_each_step,
                "re-solve the back sequence at every unsafe step instead of replaying");
  sub->add_flag("!--no-closed-form", cfg.use_closed_form,
                "force the LP fallback instead of the closed-form conservative inputs");

  sub->add_option("--hidden", cfg.hidden, "hidden width of both networks")->capture_default_str();
  sub->add_option("--actor-lr", cfg.actor_lr, "actor learning rate")->capture_default_str();
  sub->add_option("--critic-lr", cfg.critic_lr, "critic learning rate")->capture_default_str();
  sub->add_option("--gamma", cfg.gamma, "discount factor")->capture_default_str();
  sub->add_option("--soft-tau", cfg.soft_tau, "soft target update factor")->capture_default_str();
  sub->add_option("--batch", cfg.batch, "minibatch size")->capture_default_str();
  sub->add_option("--buffer-capacity", cfg.buffer_capacity, "replay buffer capacity")
      ->capture_default_str();
  sub->add_option("--action-bound", cfg.action_bound,
                  "actor output bound, 0 = environment default (2 torque / 10 volts)")
      ->capture_default_str();
  sub->add_flag("!--exclude-conservative", cfg.store_conservative,
                "keep conservative-case transitions out of the replay buffer");
}

int do_run(const safex::sim::ExperimentConfig& cfg, CLI::App* sub) {
  const auto violations = cfg.validate();
  if (!violations.empty()) {
    std::cerr << "invalid configuration:\n";
    for (const auto& v : violations) std::cerr << "  - " << v << "\n";
    return kExitValidation;
  }
  try {
    const auto result = safex::sim::run_experiment(cfg);
    std::filesystem::create_directories(cfg.outdir);
    std::ofstream echo(std::filesystem::path(cfg.outdir) / "config-resolved.toml");
    echo << sub->config_to_str(true, true);

    const auto& rep = result.report;
    std::printf("experiment: %s / %s, %d runs x %d episodes x %d steps (seed %llu)\n",
                cfg.environment.c_str(), cfg.method.c_str(), cfg.runs, cfg.episodes, cfg.steps,
                static_cast<unsigned long long>(cfg.seed));
    std::printf("  per-step safety frequency: min %.4f, mean %.4f (eta %.4f, band %.4f)\n",
                rep.min_frequency, rep.mean_frequency, rep.eta, rep.band_threshold);
    std::printf("  band criterion (min freq >= eta - 3SE): %s\n",
                rep.pass_band ? "PASS" : "FAIL");
    const int e = static_cast<int>(result.episode_cost.cols());
    const int head = std::min(10, e);
    const double first = result.episode_cost.leftCols(head).mean();
    const double last = result.episode_cost.rightCols(head).mean();
    std::printf("  mean cumulative cost: first %d episodes %.2f, last %d episodes %.2f\n", head,
                first, head, last);
    std::printf("  artifacts: %s/{steps,episodes,frequency}.csv\n", cfg.outdir.c_str());
    return 0;
  } catch (const safex::SafetyInfeasibleError& e) {
    std::cerr << "safety infeasibility: " << e.what() << "\n";
    return kExitSafety;
  }
}

int do_verify(const safex::sim::ExperimentConfig& cfg, const std::string& suite, int states,
              int samples, int specs, int episodes, std::uint64_t seed) {
  using namespace safex::suites;
  const auto violations = cfg.validate();
  if (!violations.empty()) {
    std::cerr << "invalid configuration:\n";
    for (const auto& v : violations) std::cerr << "  - " << v << "\n";
    return kExitValidation;
  }
  SuiteResult res;
  if (suite == "lemma2") {
    res = lemma2(specs, 100, seed);
  } else {
    const safex::envs::Environment env = safex::sim::build_environment(cfg);
    if (suite == "lemma1") res = lemma1(env, states, samples, seed);
    else if (suite == "theorem1-stay") res = theorem1_stay(env, samples, seed);
    else if (suite == "theorem1-back") res = theorem1_back(env, samples, seed);
    else res = theorem2(env, episodes, seed);
  }
  std::printf("%s: %s\n%s", res.name.c_str(), res.pass ? "PASS" : "FAIL", res.detail.c_str());
  return res.pass ? 0 : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safex: safe exploration for reinforcement learning under Gaussian disturbance"};
  app.require_subcommand(1);

  safex::sim::ExperimentConfig cfg;
  if (const char* d = std::getenv("SAFEX_OUTDIR")) cfg.outdir = d;

  auto* run = app.add_subcommand("run", "run a learning experiment and write CSV artifacts");
  add_experiment_options(run, cfg);
  run->set_config("--config", "", "read options from a key=value configuration file");

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  safex::sim::ExperimentConfig vcfg;
  std::string suite;
  int states = 20, samples = 100000, specs = 200, episodes = 1000;
  std::uint64_t vseed = 1;
  verify->add_option("--suite", suite, "lemma1 | lemma2 | theorem1-stay | theorem1-back | theorem2")
      ->required()
      ->check(CLI::IsMember({"lemma1", "lemma2", "theorem1-stay", "theorem1-back", "theorem2"}));
  add_experiment_options(verify, vcfg);
  verify->add_option("--states", states, "sampled states (lemma1)")->capture_default_str();
  verify->add_option("--samples", samples, "Monte Carlo samples per state")->capture_default_str();
  verify->add_option("--specs", specs, "randomized chain specs (lemma2)")->capture_default_str();
  verify->add_option("--suite-episodes", episodes, "episodes (theorem2)")->capture_default_str();
  verify->add_option("--suite-seed", vseed, "suite seed")->capture_default_str();

  auto* plot = app.add_subcommand("plot", "render SVG charts from CSV artifacts");
  std::string episodes_csv, frequency_csv, plot_outdir = cfg.outdir;
  plot->add_option("--episodes-csv", episodes_csv, "path to episodes.csv")->required();
  plot->add_option("--frequency-csv", frequency_csv, "path to frequency.csv")->required();
  plot->add_option("--outdir,-o", plot_outdir, "output directory")->capture_default_str();

  auto* print_config = app.add_subcommand("print-config", "print the fully resolved configuration");
  safex::sim::ExperimentConfig pcfg;
  add_experiment_options(print_config, pcfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (run->parsed()) return do_run(cfg, run);
    if (verify->parsed()) return do_verify(vcfg, suite, states, samples, specs, episodes, vseed);
    if (plot->parsed()) {
      try {
        safex::plot::plot_emit(episodes_csv, frequency_csv, plot_outdir);
        std::printf("wrote %s/costs.svg and %s/frequency.svg\n", plot_outdir.c_str(),
                    plot_outdir.c_str());
        return 0;
      } catch (const std::runtime_error& e) {
        std::cerr << "plot: " << e.what() << "\n";
        return kExitValidation;
      }
    }
    if (print_config->parsed()) {
      std::cout << print_config->config_to_str(true, true);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
