#pragma once

// Per-step switching rule between tightened exploratory inputs and the
// two kinds of conservative inputs, with an audit record per decision.

#include "safex/chance.hpp"
#include "safex/conservative.hpp"
#include "safex/core.hpp"
#include "safex/random.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace safex {

enum class CaseTag { Exploratory, Stay, Back };

inline const char* case_tag_name(CaseTag t) {
  switch (t) {
    case CaseTag::Exploratory: return "explore";
    case CaseTag::Stay: return "stay";
    case CaseTag::Back: return "back";
  }
  return "?";
}

// Audit record for one applied input.
struct Decision {
  CaseTag case_tag;
  Vector input;
  Matrix sigma_used;  // zero for Stay/Back
  Vector epsilon;     // sampled exploration term, zero for Stay/Back
  int back_index;     // position within the active back sequence, -1 otherwise
};

// Raised when a conservative input is required but none exists and no
// closed form is registered; the episode cannot continue safely.
struct SafetyInfeasibleError : std::runtime_error {
  int timestep;
  explicit SafetyInfeasibleError(int k, const std::string& what)
      : std::runtime_error(what), timestep(k) {}
};

struct ExplorerSetup {
  LinearModel model;
  ConstraintSet constraints;
  SafetyConfig safety;
  GaussianNoise noise;  // disturbance model as known to the controller
  Matrix sigma_base;    // exploration covariance shape, scaled by s^2
  double s_max = 1.0;
  // Optional environment-specific conservative inputs; the LP is the
  // generic fallback.
  std::function<Vector(const Vector&)> stay_closed_form;
  std::function<std::vector<Vector>(const Vector&)> back_closed_form;
  bool resolve_back_each_step = false;
};

// One explorer per episode. decide() picks the case for the current
// state; advance() moves the timestep and back-sequence cursor.
class SafeExplorer {
 public:
  explicit SafeExplorer(ExplorerSetup setup) : setup_(std::move(setup)) {
    require_shape(setup_.sigma_base.rows() == setup_.model.input_dim() &&
                      setup_.sigma_base.cols() == setup_.model.input_dim(),
                  "SafeExplorer: sigma_base must be m x m");
    require_domain(setup_.constraints.actuation_condition_holds(setup_.model),
                   "SafeExplorer: h_j^T B = 0 for some constraint row");
  }

  int timestep() const { return k_; }
  const ExplorerSetup& setup() const { return setup_; }

  void reset() {
    k_ = 0;
    pending_.clear();
    cursor_ = 0;
    last_case_.reset();
  }

  Decision decide(const Vector& x, const Vector& policy_mean, Rng& rng) {
    require_domain(k_ < setup_.safety.horizon, "SafeExplorer: episode horizon exhausted");
    const int m = setup_.model.input_dim();
    Decision dec{CaseTag::Exploratory, Vector::Zero(m), Matrix::Zero(m, m), Vector::Zero(m), -1};

    if (is_safe(setup_.constraints, x)) {
      pending_.clear();
      cursor_ = 0;
      if (exploration_feasible(setup_.model, setup_.constraints, setup_.safety, setup_.noise,
                               x, policy_mean, k_)) {
        dec.case_tag = CaseTag::Exploratory;
        dec.sigma_used = max_exploration_cov(setup_.model, setup_.constraints, setup_.safety,
                                             setup_.noise, x, policy_mean, k_,
                                             setup_.sigma_base, setup_.s_max);
        dec.epsilon = sample_gaussian(GaussianNoise(Vector::Zero(m), dec.sigma_used), rng);
        dec.input = policy_mean + dec.epsilon;
      } else {
        dec.case_tag = CaseTag::Stay;
        dec.input = stay_input(x);
      }
    } else {
      dec.case_tag = CaseTag::Back;
      if (pending_.empty() || setup_.resolve_back_each_step) {
        pending_ = back_sequence(x);
        cursor_ = 0;
      }
      dec.back_index = cursor_;
      dec.input = pending_[static_cast<std::size_t>(cursor_)];
    }
    last_case_ = dec.case_tag;
    return dec;
  }

  void advance() {
    ++k_;
    if (last_case_ && *last_case_ == CaseTag::Back) {
      ++cursor_;
      if (cursor_ >= static_cast<int>(pending_.size())) {
        // sequence exhausted; a still-unsafe state triggers a fresh solve
        pending_.clear();
        cursor_ = 0;
      }
    }
    last_case_.reset();
  }

 private:
  Vector stay_input(const Vector& x) const {
    if (setup_.stay_closed_form) return setup_.stay_closed_form(x);
    auto u = solve_stay_input(setup_.model, setup_.constraints, setup_.safety, setup_.noise,
                              x, q_stay(setup_.safety, k_));
    if (!u)
      throw SafetyInfeasibleError(k_, "no conservative stay input exists at timestep " +
                                          std::to_string(k_));
    return *u;
  }

  std::vector<Vector> back_sequence(const Vector& x) const {
    if (setup_.back_closed_form) return setup_.back_closed_form(x);
    auto U = solve_back_sequence(setup_.model, setup_.constraints, setup_.safety, setup_.noise,
                                 x, setup_.safety.xi);
    if (!U)
      throw SafetyInfeasibleError(k_, "no conservative back sequence exists at timestep " +
                                          std::to_string(k_));
    const int m = setup_.model.input_dim();
    std::vector<Vector> seq;
    seq.reserve(static_cast<std::size_t>(setup_.safety.tau));
    for (int i = 0; i < setup_.safety.tau; ++i) seq.push_back(U->segment(i * m, m));
    return seq;
  }

  ExplorerSetup setup_;
  int k_ = 0;
  std::vector<Vector> pending_;
  int cursor_ = 0;
  std::optional<CaseTag> last_case_;
};

}  // namespace safex
