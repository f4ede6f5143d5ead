#pragma once

// Synthetic campaigns: a generated roster drives the real campaign service
// end to end with a scripted violator backend and simulated annotators.

#include <array>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rtc/service/campaign.hpp"

namespace rtc {

/// Per-rating probabilities (ratings 1..4) a simulated annotator uses.
using RatingDistribution = std::array<double, 4>;

struct AnnotatorModel {
  RatingDistribution violative{0.05, 0.10, 0.35, 0.50};
  RatingDistribution benign{0.45, 0.35, 0.15, 0.05};
};

/// Probability that the headline verdict binarizes to "broken" given
/// independent annotators and an arbitrator drawn from `dist`.
double headline_break_probability(const RatingDistribution& dist, int arbitration_threshold, ConsensusRule rule);

struct SyntheticRosterOptions {
  /// Participants per race x gender combination.
  std::size_t per_combination = 6;
  /// Extra participants who disclose nothing.
  std::size_t undisclosed = 4;
};

/// Every participant holds every role; expertise cycles medical,
/// fact_checking, none. Tokens are "tok-<id>".
std::vector<ParticipantProfile> synthetic_roster(const SyntheticRosterOptions& options = {});

struct SimulationOptions {
  std::size_t dialogues = 200;
  std::uint64_t seed = 7;
  /// Probability that a dialogue plants the violator trigger.
  double planted_rate = 0.3;
  std::size_t min_turns = 6;
  std::size_t max_turns = 18;
  AnnotatorModel annotators;
  SyntheticRosterOptions roster;
  /// Participants online when a dialogue needs annotators or an
  /// arbitrator; selection runs over this random subset.
  std::size_t online = 12;
  WorkflowOptions workflow;
  /// Defaults to an in-memory log.
  std::shared_ptr<EventStore> store;
};

struct InvariantReport {
  std::size_t never_twice_violations = 0;
  std::size_t arbitration_mismatches = 0;
  std::size_t split_violations = 0;
  std::size_t not_finalized = 0;
  std::size_t dialogues = 0;
  std::size_t arbitrated = 0;
  std::size_t in_group_annotations = 0;
  std::size_t classified_annotations = 0;
  std::vector<std::string> details;

  bool ok() const noexcept {
    return never_twice_violations == 0 && arbitration_mismatches == 0 && split_violations == 0 && not_finalized == 0;
  }
};

/// Re-checks a finished campaign from its dialogues and coverage. Targets in
/// `exempt_targets` (keys) and under-served targets are skipped for the
/// split check.
InvariantReport check_pipeline_invariants(const Campaign& campaign, const std::set<std::string>& exempt_targets);

struct SimulationResult {
  std::unique_ptr<Campaign> campaign;
  InvariantReport invariants;
  std::size_t violative_dialogues = 0;
  std::size_t headline_breaks = 0;
  /// Analytic expectation of the headline break rate given the realised
  /// number of violative dialogues, with its binomial sigma.
  double expected_break_rate = 0.0;
  double break_rate_sigma = 0.0;
  /// Targets that needed out-group fill to keep issuing.
  std::set<std::string> fill_targets;
  double elapsed_seconds = 0.0;

  double observed_break_rate() const noexcept {
    const auto n = invariants.dialogues;
    return n == 0 ? 0.0 : static_cast<double>(headline_breaks) / static_cast<double>(n);
  }
};

SimulationResult run_simulation(const SimulationOptions& options);

/// Setup used by run_simulation: default policy, default axes and pairing,
/// quota ceil(dialogues / cells).
CampaignSetup simulation_setup(const SimulationOptions& options);

inline constexpr std::string_view kPlantTrigger = "[[plant]]";

}  // namespace rtc
