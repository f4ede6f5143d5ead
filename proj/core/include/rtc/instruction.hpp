#pragma once

// Procedural generation of red-team instruction cards over the campaign's
// parameter space, with per-cell quotas and a per-target in/out-group split.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rtc/matching.hpp"
#include "rtc/policy.hpp"

namespace rtc {

enum class TopicSource { free_text, suggested_repository };

std::string_view to_string(TopicSource source);
TopicSource parse_topic_source(std::string_view text);

inline const std::vector<std::string>& default_use_cases() {
  static const std::vector<std::string> cases{"information search", "entertainment", "advice",
                                              "creative writing"};
  return cases;
}

/// Which two axes to intersect and which labels of each take part.
struct PairingSpec {
  std::string first_axis;
  std::vector<std::string> first_labels;
  std::string second_axis;
  std::vector<std::string> second_labels;
};

/// All one-way targets (axis order, then label order) followed by the
/// requested two-way products. Throws on unknown axes or labels.
std::vector<DemographicTarget> enumerate_targets(std::span<const DemographicAxis> axes,
                                                 const std::optional<PairingSpec>& pairing);

struct Cell {
  std::string rule_id;
  Adversariality adversariality = Adversariality::low;
  std::string use_case;
  std::optional<DemographicTarget> target;

  std::string key() const;
};

class ParameterSpace {
 public:
  ParameterSpace(std::vector<Rule> rules, std::vector<std::string> use_cases,
                 std::vector<DemographicTarget> targets, TopicSource topic_source,
                 std::vector<std::string> topics = {});

  std::span<const Rule> rules() const noexcept { return rules_; }
  std::span<const std::string> use_cases() const noexcept { return use_cases_; }
  std::span<const DemographicTarget> targets() const noexcept { return targets_; }
  TopicSource topic_source() const noexcept { return topic_source_; }
  std::span<const std::string> topics() const noexcept { return topics_; }

  /// rules x adversariality x use cases x (targets for targeting rules, no
  /// target otherwise), in deterministic order.
  const std::vector<Cell>& cells() const noexcept { return cells_; }
  const Rule& rule(std::string_view rule_id) const;

 private:
  std::vector<Rule> rules_;
  std::vector<std::string> use_cases_;
  std::vector<DemographicTarget> targets_;
  TopicSource topic_source_;
  std::vector<std::string> topics_;
  std::vector<Cell> cells_;
};

struct InstructionCard {
  std::string instruction_id;
  std::string participant_id;
  std::string rule_id;
  Adversariality adversariality = Adversariality::low;
  std::string use_case;
  /// Empty until the red teamer commits one for free-text campaigns.
  std::string topic;
  std::optional<DemographicTarget> target;
  GroupRelation attacker_group_relation = GroupRelation::not_applicable;

  Cell cell() const { return Cell{rule_id, adversariality, use_case, target}; }
};

struct CellCounter {
  std::uint64_t issued = 0;
  std::uint64_t completed = 0;
};

struct SplitCounter {
  std::uint64_t in_group = 0;
  std::uint64_t out_group = 0;
};

class QuotaState {
 public:
  QuotaState(const ParameterSpace& space, std::uint64_t quota_per_cell);

  std::uint64_t quota_per_cell() const noexcept { return quota_per_cell_; }
  std::uint64_t total_issued() const noexcept { return total_issued_; }

  const CellCounter& cell(const std::string& cell_key) const;
  SplitCounter split(const std::string& target_key) const;
  const std::map<std::string, CellCounter>& cells() const noexcept { return cells_; }
  const std::map<std::string, SplitCounter>& splits() const noexcept { return splits_; }

  void record_issue(const InstructionCard& card);
  /// Throws if completed would exceed issued.
  void record_completion(const Cell& cell);

  void mark_under_served(const std::string& target_key) { under_served_.insert(target_key); }
  const std::set<std::string>& under_served() const noexcept { return under_served_; }

 private:
  std::uint64_t quota_per_cell_;
  std::uint64_t total_issued_ = 0;
  std::map<std::string, CellCounter> cells_;
  std::map<std::string, SplitCounter> splits_;
  std::set<std::string> under_served_;
};

struct IssueOptions {
  /// Lets out-group attackers take a targeting cell even when that pushes
  /// the split past one in favour of out-group attacks.
  bool allow_out_group_fill = false;
};

/// Chooses the card the participant would receive without touching the quota.
/// Least-filled eligible cell wins; ties go to a seeded draw. A targeting cell
/// is eligible only if the participant's relation keeps |in - out| <= 1.
InstructionCard select_instruction(const ParameterSpace& space, const QuotaState& quota,
                                   const ParticipantProfile& participant, std::uint64_t rng_seed,
                                   IssueOptions options = {});

/// select_instruction followed by quota.record_issue.
InstructionCard next_instruction(const ParameterSpace& space, QuotaState& quota,
                                 const ParticipantProfile& participant, std::uint64_t rng_seed,
                                 IssueOptions options = {});

std::string suggest_topic(std::uint64_t rng_seed, std::span<const std::string> topic_repository);
/// Newline-delimited, blank lines skipped.
std::vector<std::string> parse_topic_repository(std::string_view text);

/// Flags every target whose active red-teamer pool has no in-group member.
void mark_under_served_targets(const ParameterSpace& space, QuotaState& quota,
                               std::span<const ParticipantProfile> roster);

struct CoverageRow {
  Cell cell;
  CellCounter counts;
  bool under_served = false;
};

struct SplitRow {
  DemographicTarget target;
  SplitCounter counts;
  bool under_served = false;
};

struct CoverageReport {
  std::vector<CoverageRow> cells;
  std::vector<SplitRow> splits;
  std::uint64_t total_completed = 0;
  std::uint64_t max_completed = 0;
  std::uint64_t min_completed = 0;
  /// max/min completed counts; nullopt when min is zero but max is not.
  std::optional<double> max_min_ratio;
  /// Goodness of fit of completed counts against a uniform spread.
  double chi_square = 0.0;
};

CoverageReport coverage_report(const ParameterSpace& space, const QuotaState& quota);

struct Evenness {
  std::uint64_t total = 0;
  std::uint64_t max = 0;
  std::uint64_t min = 0;
  std::optional<double> max_min_ratio;
  double chi_square = 0.0;
};

/// Evenness of a count vector against the uniform spread. An all-zero vector
/// reports ratio 0 and chi-square 0.
Evenness evenness(std::span<const std::uint64_t> counts);

/// One row per cell.
void write_coverage_csv(std::ostream& out, const CoverageReport& report);
void write_split_csv(std::ostream& out, const CoverageReport& report);
void write_coverage_text(std::ostream& out, const CoverageReport& report);

}  // namespace rtc
