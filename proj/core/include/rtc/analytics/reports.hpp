#pragma once

// Campaign-level analyses built on the statistical primitives: the in/out
// group annotation table, attack success by attacker relation, per-group odds
// ratios and the race x gender interaction analysis. Each has a TextTable
// emitter for CSV or aligned output.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtc/analytics/cluster.hpp"
#include "rtc/analytics/hypothesis.hpp"
#include "rtc/analytics/logistic.hpp"
#include "rtc/analytics/reliability.hpp"
#include "rtc/table.hpp"
#include "rtc/workflow.hpp"

namespace rtc {

inline constexpr std::string_view kPooledRow = "Both";

/// Ratings of every finalized dialogue, one item per dialogue (2 or 3 values).
std::vector<std::vector<int>> rating_items(std::span<const Dialogue> dialogues);

ReliabilityReport dialogue_alpha(std::span<const Dialogue> dialogues, AlphaMetric metric, RatingScale scale);

// --- in-group vs out-group annotations -------------------------------------

struct InOutObservation {
  std::string rule_id;
  GroupRelation relation = GroupRelation::unknown;
  bool broken = false;
};

/// One observation per annotation on a finalized targeting-rule dialogue.
std::vector<InOutObservation> annotation_observations(std::span<const Dialogue> dialogues);

struct InOutRow {
  std::string rule_id;
  std::uint64_t in_n = 0, in_broken = 0;
  std::uint64_t out_n = 0, out_broken = 0;
  std::optional<ProportionTestResult> test;
  /// Set when an arm is empty; the row then carries no test.
  std::string flag;
};

struct InOutReport {
  /// Per rule in rule_id order, then the pooled row.
  std::vector<InOutRow> rows;
  std::size_t excluded = 0;
};

/// Observations with relation unknown or not_applicable are excluded and
/// counted. Throws validation "no_classifiable_annotations" when nothing is
/// left and "empty_stratum" when the pooled in- or out-group arm is empty.
InOutReport in_out_group_report(std::span<const InOutObservation> observations);
TextTable in_out_table(const InOutReport& report);

// --- attack success by attacker relation -----------------------------------

struct AttackObservation {
  std::string rule_id;
  GroupRelation attacker_relation = GroupRelation::unknown;
  /// Headline verdict on the targeted rule.
  bool targeted_break = false;
  /// Targeted break, or any other rule flagged in the pre-annotation.
  bool any_break = false;
};

std::vector<AttackObservation> attack_observations(std::span<const Dialogue> dialogues, ConsensusRule rule);

struct AttackSuccessRow {
  std::string outcome;  // "Both" (any rule break) or "Targeted"
  std::uint64_t in_n = 0, in_success = 0;
  std::uint64_t out_n = 0, out_success = 0;
  std::optional<ProportionTestResult> test;
  std::string flag;
};

std::vector<AttackSuccessRow> attack_success_report(std::span<const AttackObservation> observations);
TextTable attack_success_table(std::span<const AttackSuccessRow> rows);

// --- odds ratios per targeted group ----------------------------------------

struct GroupOddsRow {
  std::string axis;
  std::string label;
  OddsRatioResult result;
};

/// For every (axis, label) appearing in a target: success odds of dialogues
/// whose target includes that label against all other targeted dialogues.
std::vector<GroupOddsRow> group_odds_ratios(std::span<const Dialogue> dialogues, ConsensusRule rule);
TextTable group_odds_table(std::span<const GroupOddsRow> rows);

// --- race x gender interaction ---------------------------------------------

struct InteractionObservation {
  std::string rule_id;
  std::string first_label;
  std::string second_label;
  bool broken = false;
};

struct InteractionOptions {
  std::string first_axis = "race";
  std::string second_axis = "gender";
  /// Cells with fewer observations are flagged in the report.
  std::size_t min_cell_count = 5;
  LogisticOptions fit;
};

/// Finalized dialogues whose target names both axes.
std::vector<InteractionObservation> interaction_observations(std::span<const Dialogue> dialogues,
                                                             const InteractionOptions& options,
                                                             ConsensusRule rule);

struct TermEstimate {
  std::string term;
  double coefficient = 0.0;
  double std_error = 0.0;
  double odds_ratio = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct InteractionCell {
  std::string first_label;
  std::string second_label;
  std::uint64_t n = 0;
  std::uint64_t broken = 0;
  bool insufficient = false;
};

struct RuleInteraction {
  std::string rule_id;
  std::size_t n = 0;
  std::string first_reference;
  std::string second_reference;
  std::vector<InteractionCell> cells;
  /// Interaction terms that could not be estimated because their cell is
  /// empty; reported, never silently dropped.
  std::vector<std::string> omitted_terms;
  std::optional<LogisticModel> additive;
  std::optional<LogisticModel> full;
  std::optional<LRTestResult> lr;
  std::vector<TermEstimate> terms;
  /// Why the models could not be compared (separation, rank deficiency...).
  std::string failure;
};

struct InteractionReport {
  std::vector<RuleInteraction> rules;
};

/// Reference-cell dummy coding; the lexicographically first label of each
/// axis is the reference. Term names look like race[T.b], gender[T.m] and
/// race[T.b]:gender[T.m]. Throws validation "no_observations" on empty input.
InteractionReport interaction_analysis(std::span<const InteractionObservation> observations,
                                       const InteractionOptions& options = {});
TextTable interaction_summary_table(const InteractionReport& report);
TextTable interaction_terms_table(const InteractionReport& report);

/// Builds the additive (with_interaction = false) or full design for one
/// set of observations, with the same coding interaction_analysis uses.
DesignMatrix interaction_design(std::span<const InteractionObservation> observations, bool with_interaction,
                                const InteractionOptions& options = {},
                                std::vector<std::string>* omitted_terms = nullptr);

// --- other emitters ---------------------------------------------------------

TextTable reliability_table(std::span<const ReliabilityReport> reports);
/// Table 1 layout: cluster, one column per dataset, total; plus a totals row.
TextTable contingency_table(const ClusterContingency& table);

}  // namespace rtc
