#pragma once

#include <optional>
#include <vector>

#include "boars/dataset.hpp"
#include "boars/ssim.hpp"

namespace boars {

/// Operator rating of a spectrum: 0 = Bad, 1 = Good, 2 = Very Good.
class Vote {
 public:
  explicit Vote(int value) : value_(value) {
    require(value >= 0 && value <= 2, ErrorCode::InvalidArgument,
            "vote must be 0, 1 or 2, got " + std::to_string(value));
  }
  int value() const { return value_; }
  friend bool operator==(const Vote&, const Vote&) = default;

 private:
  int value_;
};

/// Weight in [0, 1] given to a new spectrum when blending it into the target.
class Preference {
 public:
  explicit Preference(double value) : value_(value) {
    require(value >= 0.0 && value <= 1.0, ErrorCode::InvalidArgument,
            "preference must lie in [0, 1], got " + std::to_string(value));
  }
  double value() const { return value_; }
  friend bool operator==(const Preference&, const Preference&) = default;

 private:
  double value_;
};

enum class Phase { Collecting, HumanAugmented, Automated };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Collecting: return "collecting";
    case Phase::HumanAugmented: return "human_augmented";
    case Phase::Automated: return "automated";
  }
  return "unknown";
}

struct VoteRecord {
  GridIndex index;
  Vote vote;
  Preference preference;
  std::optional<Vector> target_after;
};

struct TargetState {
  std::optional<Vector> target;
  double vote_weight = 0.0;
  Phase phase = Phase::Collecting;
  std::vector<VoteRecord> history;
};

/// The weighted blend before renormalization:
/// ((1-p) W T + p v s) / ((1-p) W + p v).
inline Vector blend_target(const Vector& target, double weight, const Vector& spectrum, int vote,
                           double pref) {
  require(target.size() == spectrum.size(), ErrorCode::DimensionMismatch,
          "target and spectrum lengths differ");
  const double old_w = (1.0 - pref) * weight;
  const double new_w = pref * static_cast<double>(vote);
  const double denom = old_w + new_w;
  require(denom > 0.0, ErrorCode::InvalidState, "target blend has zero total weight");
  return (old_w * target + new_w * spectrum) / denom;
}

/// Applies one vote. A zero vote never touches the target or the weight.
inline TargetState record_vote(TargetState state, GridIndex idx, const Vector& spectrum, Vote vote,
                               Preference pref) {
  require(state.phase != Phase::Automated, ErrorCode::InvalidState,
          "target is frozen; votes are no longer accepted");
  const Vector s = normalize_values(spectrum);
  if (vote.value() > 0) {
    if (!state.target) {
      state.target = s;
      state.vote_weight = vote.value();
      state.phase = Phase::HumanAugmented;
    } else {
      require(state.target->size() == s.size(), ErrorCode::DimensionMismatch,
              "spectrum length differs from target length");
      state.target =
          normalize_values(blend_target(*state.target, state.vote_weight, s, vote.value(), pref.value()));
      state.vote_weight += vote.value();
    }
  }
  state.history.push_back({idx, vote, pref, state.target});
  return state;
}

struct SatisfactionOutcome {
  TargetState state;
  bool recompute = false;
};

/// Freezing is one-way: once satisfied, the phase stays Automated.
inline SatisfactionOutcome answer_satisfaction(TargetState state, bool satisfied) {
  require(state.phase != Phase::Automated, ErrorCode::InvalidState, "target is already frozen");
  require(state.target.has_value(), ErrorCode::InvalidState,
          "no target exists yet; cannot ask for satisfaction");
  if (!satisfied) return {std::move(state), false};
  state.phase = Phase::Automated;
  return {std::move(state), true};
}

inline std::optional<Vector> current_target(const TargetState& state) { return state.target; }

/// Rescores every stored sample against the frozen target, dropping the
/// reward term. Inputs and order are untouched.
inline Dataset recompute_objectives(const TargetState& state, Dataset data,
                                    const SsimParams& params = {}) {
  require(state.phase == Phase::Automated && state.target.has_value(), ErrorCode::InvalidState,
          "objectives can only be recomputed after the target is frozen");
  require(data.spectra.size() == data.size() && data.outputs.size() == data.size(),
          ErrorCode::InvalidState, "dataset is missing stored spectra");
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data.spectra[i].size() > 0, ErrorCode::InvalidState,
            "missing stored spectrum for sample " + to_string(data.indices[i]));
    data.outputs[i] = auto_objective(*state.target, data.spectra[i], params);
  }
  return data;
}

/// Automated-phase objective, guarded by the phase check.
inline double auto_objective(const TargetState& state, const Vector& spectrum,
                             const SsimParams& params = {}) {
  require(state.phase == Phase::Automated && state.target.has_value(), ErrorCode::InvalidState,
          "automated objective used before the target was frozen");
  return auto_objective(*state.target, spectrum, params);
}

}  // namespace boars
