#include "rtc/instruction.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "rtc/error.hpp"
#include "rtc/rng.hpp"
#include "rtc/table.hpp"

namespace rtc {

std::string_view to_string(TopicSource source) {
  return source == TopicSource::free_text ? "free_text" : "suggested_repository";
}

TopicSource parse_topic_source(std::string_view text) {
  if (text == "free_text") return TopicSource::free_text;
  if (text == "suggested_repository") return TopicSource::suggested_repository;
  fail(ErrorKind::validation, "unknown_topic_source", "unknown topic_source '" + std::string(text) + "'");
}

namespace {

const DemographicAxis& find_axis(std::span<const DemographicAxis> axes, const std::string& name) {
  for (const auto& axis : axes) {
    if (axis.name == name) return axis;
  }
  fail(ErrorKind::validation, "unknown_axis", "pairing references unknown axis '" + name + "'");
}

void check_labels(const DemographicAxis& axis, const std::vector<std::string>& labels) {
  for (const auto& label : labels) {
    if (!axis.has_label(label)) {
      fail(ErrorKind::validation, "unknown_label",
           "pairing references unknown label '" + label + "' on axis '" + axis.name + "'");
    }
  }
}

}  // namespace

std::vector<DemographicTarget> enumerate_targets(std::span<const DemographicAxis> axes,
                                                 const std::optional<PairingSpec>& pairing) {
  std::vector<DemographicTarget> targets;
  for (const auto& axis : axes) {
    validate_axis(axis);
    for (const auto& label : axis.labels) targets.emplace_back(std::vector{TargetComponent{axis.name, label}});
  }
  if (pairing) {
    if (pairing->first_axis == pairing->second_axis) {
      fail(ErrorKind::validation, "invalid_pairing", "pairing needs two distinct axes");
    }
    const auto& first = find_axis(axes, pairing->first_axis);
    const auto& second = find_axis(axes, pairing->second_axis);
    check_labels(first, pairing->first_labels);
    check_labels(second, pairing->second_labels);
    for (const auto& a : pairing->first_labels) {
      for (const auto& b : pairing->second_labels) {
        targets.emplace_back(std::vector{TargetComponent{first.name, a}, TargetComponent{second.name, b}});
      }
    }
  }
  return targets;
}

std::string Cell::key() const {
  std::string out = rule_id;
  out += '|';
  out += to_string(adversariality);
  out += '|';
  out += use_case;
  out += '|';
  out += target ? target->key() : std::string("-");
  return out;
}

ParameterSpace::ParameterSpace(std::vector<Rule> rules, std::vector<std::string> use_cases,
                               std::vector<DemographicTarget> targets, TopicSource topic_source,
                               std::vector<std::string> topics)
    : rules_(std::move(rules)),
      use_cases_(std::move(use_cases)),
      targets_(std::move(targets)),
      topic_source_(topic_source),
      topics_(std::move(topics)) {
  if (rules_.empty()) fail(ErrorKind::validation, "empty_space", "parameter space has no rules");
  if (use_cases_.empty()) fail(ErrorKind::validation, "empty_space", "parameter space has no use cases");
  if (topic_source_ == TopicSource::suggested_repository && topics_.empty()) {
    fail(ErrorKind::validation, "empty_repository", "suggested topics need a non-empty repository");
  }
  for (const auto& rule : rules_) {
    if (rule.demographic_targeting && targets_.empty()) {
      fail(ErrorKind::validation, "empty_space",
           "targeting rule '" + rule.rule_id + "' but no demographic targets configured");
    }
    for (Adversariality level : kAdversarialityLevels) {
      for (const auto& use_case : use_cases_) {
        if (rule.demographic_targeting) {
          for (const auto& target : targets_) cells_.push_back({rule.rule_id, level, use_case, target});
        } else {
          cells_.push_back({rule.rule_id, level, use_case, std::nullopt});
        }
      }
    }
  }
}

const Rule& ParameterSpace::rule(std::string_view rule_id) const {
  for (const auto& r : rules_) {
    if (r.rule_id == rule_id) return r;
  }
  fail(ErrorKind::not_found, "unknown_rule", "rule '" + std::string(rule_id) + "' not in parameter space");
}

QuotaState::QuotaState(const ParameterSpace& space, std::uint64_t quota_per_cell)
    : quota_per_cell_(quota_per_cell) {
  if (quota_per_cell_ == 0) fail(ErrorKind::validation, "invalid_quota", "quota per cell must be >= 1");
  for (const auto& cell : space.cells()) cells_.emplace(cell.key(), CellCounter{});
  for (const auto& target : space.targets()) splits_.emplace(target.key(), SplitCounter{});
}

const CellCounter& QuotaState::cell(const std::string& cell_key) const {
  auto it = cells_.find(cell_key);
  if (it == cells_.end()) fail(ErrorKind::not_found, "unknown_cell", "unknown cell '" + cell_key + "'");
  return it->second;
}

SplitCounter QuotaState::split(const std::string& target_key) const {
  auto it = splits_.find(target_key);
  return it == splits_.end() ? SplitCounter{} : it->second;
}

void QuotaState::record_issue(const InstructionCard& card) {
  auto it = cells_.find(card.cell().key());
  if (it == cells_.end()) {
    fail(ErrorKind::not_found, "unknown_cell", "card '" + card.instruction_id + "' names an unknown cell");
  }
  ++it->second.issued;
  ++total_issued_;
  if (card.target) {
    auto& split = splits_[card.target->key()];
    if (card.attacker_group_relation == GroupRelation::in_group) ++split.in_group;
    if (card.attacker_group_relation == GroupRelation::out_group) ++split.out_group;
  }
}

void QuotaState::record_completion(const Cell& cell) {
  auto it = cells_.find(cell.key());
  if (it == cells_.end()) fail(ErrorKind::not_found, "unknown_cell", "unknown cell '" + cell.key() + "'");
  if (it->second.completed >= it->second.issued) {
    fail(ErrorKind::state, "completion_exceeds_issue", "cell '" + cell.key() + "' has no open issue");
  }
  ++it->second.completed;
}

InstructionCard select_instruction(const ParameterSpace& space, const QuotaState& quota,
                                   const ParticipantProfile& participant, std::uint64_t rng_seed,
                                   IssueOptions options) {
  if (!participant.active) {
    fail(ErrorKind::eligibility, "inactive", "participant '" + participant.participant_id + "' is inactive");
  }
  if (!participant.can(Role::red_teamer)) {
    fail(ErrorKind::eligibility, "role", "participant '" + participant.participant_id + "' is not a red teamer");
  }

  struct Candidate {
    const Cell* cell;
    GroupRelation relation;
  };
  std::vector<Candidate> best;
  std::uint64_t best_issued = std::numeric_limits<std::uint64_t>::max();
  bool any_open = false;

  for (const auto& cell : space.cells()) {
    const auto& counter = quota.cell(cell.key());
    if (counter.issued >= quota.quota_per_cell()) continue;
    any_open = true;

    GroupRelation relation = GroupRelation::not_applicable;
    if (cell.target) {
      relation = is_in_group(participant, *cell.target);
      const SplitCounter split = quota.split(cell.target->key());
      if (relation == GroupRelation::unknown) continue;
      if (relation == GroupRelation::in_group && split.in_group > split.out_group) continue;
      if (relation == GroupRelation::out_group && split.out_group > split.in_group &&
          !options.allow_out_group_fill) {
        continue;
      }
    }
    if (counter.issued < best_issued) {
      best.clear();
      best_issued = counter.issued;
    }
    if (counter.issued == best_issued) best.push_back({&cell, relation});
  }

  if (!any_open) fail(ErrorKind::state, "quota_exhausted", "quota exhausted: every cell is at quota");
  if (best.empty()) {
    fail(ErrorKind::eligibility, "no_eligible_cell",
         "no eligible cell for participant '" + participant.participant_id + "'");
  }

  Rng rng(rng_seed);
  const Candidate& pick = best[uniform_index(rng, best.size())];

  InstructionCard card;
  char id[32];
  std::snprintf(id, sizeof id, "ins-%06llu", static_cast<unsigned long long>(quota.total_issued() + 1));
  card.instruction_id = id;
  card.participant_id = participant.participant_id;
  card.rule_id = pick.cell->rule_id;
  card.adversariality = pick.cell->adversariality;
  card.use_case = pick.cell->use_case;
  card.target = pick.cell->target;
  card.attacker_group_relation = pick.relation;
  if (space.topic_source() == TopicSource::suggested_repository) {
    card.topic = suggest_topic(mix_seed(rng_seed, 1), space.topics());
  }
  return card;
}

InstructionCard next_instruction(const ParameterSpace& space, QuotaState& quota,
                                 const ParticipantProfile& participant, std::uint64_t rng_seed,
                                 IssueOptions options) {
  InstructionCard card = select_instruction(space, quota, participant, rng_seed, options);
  quota.record_issue(card);
  return card;
}

std::string suggest_topic(std::uint64_t rng_seed, std::span<const std::string> topic_repository) {
  if (topic_repository.empty()) fail(ErrorKind::validation, "empty_repository", "topic repository is empty");
  Rng rng(rng_seed);
  return topic_repository[uniform_index(rng, topic_repository.size())];
}

std::vector<std::string> parse_topic_repository(std::string_view text) {
  std::vector<std::string> topics;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    topics.push_back(line.substr(first, last - first + 1));
  }
  return topics;
}

void mark_under_served_targets(const ParameterSpace& space, QuotaState& quota,
                               std::span<const ParticipantProfile> roster) {
  for (const auto& target : space.targets()) {
    const bool has_in_group = std::any_of(roster.begin(), roster.end(), [&](const ParticipantProfile& p) {
      return p.active && p.can(Role::red_teamer) && is_in_group(p, target) == GroupRelation::in_group;
    });
    if (!has_in_group) quota.mark_under_served(target.key());
  }
}

Evenness evenness(std::span<const std::uint64_t> counts) {
  Evenness e;
  if (counts.empty()) return e;
  e.max = *std::max_element(counts.begin(), counts.end());
  e.min = *std::min_element(counts.begin(), counts.end());
  for (auto c : counts) e.total += c;
  if (e.total == 0) {
    e.max_min_ratio = 0.0;
    return e;
  }
  if (e.min > 0) e.max_min_ratio = static_cast<double>(e.max) / static_cast<double>(e.min);
  const double expected = static_cast<double>(e.total) / static_cast<double>(counts.size());
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    e.chi_square += diff * diff / expected;
  }
  return e;
}

CoverageReport coverage_report(const ParameterSpace& space, const QuotaState& quota) {
  CoverageReport report;
  std::vector<std::uint64_t> completed;
  for (const auto& cell : space.cells()) {
    const auto& counts = quota.cell(cell.key());
    const bool under = cell.target && quota.under_served().contains(cell.target->key());
    report.cells.push_back({cell, counts, under});
    completed.push_back(counts.completed);
  }
  for (const auto& target : space.targets()) {
    report.splits.push_back({target, quota.split(target.key()), quota.under_served().contains(target.key())});
  }
  const Evenness e = evenness(completed);
  report.total_completed = e.total;
  report.max_completed = e.max;
  report.min_completed = e.min;
  report.max_min_ratio = e.max_min_ratio;
  report.chi_square = e.chi_square;
  return report;
}

void write_coverage_csv(std::ostream& out, const CoverageReport& report) {
  TextTable table;
  table.header = {"rule_id", "adversariality", "use_case", "target", "issued", "completed", "under_served"};
  for (const auto& row : report.cells) {
    table.add_row({row.cell.rule_id, std::string(to_string(row.cell.adversariality)), row.cell.use_case,
                   row.cell.target ? row.cell.target->display() : "", std::to_string(row.counts.issued),
                   std::to_string(row.counts.completed), row.under_served ? "true" : "false"});
  }
  write_csv(out, table);
}

void write_split_csv(std::ostream& out, const CoverageReport& report) {
  TextTable table;
  table.header = {"target", "in_group_attacks", "out_group_attacks", "under_served"};
  for (const auto& row : report.splits) {
    table.add_row({row.target.display(), std::to_string(row.counts.in_group),
                   std::to_string(row.counts.out_group), row.under_served ? "true" : "false"});
  }
  write_csv(out, table);
}

void write_coverage_text(std::ostream& out, const CoverageReport& report) {
  TextTable summary;
  summary.header = {"metric", "value"};
  summary.add_row({"cells", std::to_string(report.cells.size())});
  summary.add_row({"completed", std::to_string(report.total_completed)});
  summary.add_row({"max_completed", std::to_string(report.max_completed)});
  summary.add_row({"min_completed", std::to_string(report.min_completed)});
  summary.add_row({"max_min_ratio",
                   report.max_min_ratio ? format_fixed(*report.max_min_ratio, 3) : std::string("undefined")});
  summary.add_row({"chi_square", format_fixed(report.chi_square, 3)});
  write_aligned(out, summary);
  out << '\n';

  TextTable splits;
  splits.header = {"target", "in_group", "out_group", "flag"};
  for (const auto& row : report.splits) {
    splits.add_row({row.target.display(), std::to_string(row.counts.in_group),
                    std::to_string(row.counts.out_group), row.under_served ? "under-served" : ""});
  }
  write_aligned(out, splits);
}

}  // namespace rtc
