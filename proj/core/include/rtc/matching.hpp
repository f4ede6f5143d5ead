#pragma once

// Eligibility rules: in-/out-group relations, expert matching, and the
// never-twice constraint that keeps a participant to one role per dialogue.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtc/policy.hpp"

namespace rtc {

/// not_applicable marks assignments on rules without a demographic target.
enum class GroupRelation { in_group, out_group, unknown, not_applicable };

std::string_view to_string(GroupRelation relation);
GroupRelation parse_group_relation(std::string_view text);

/// in_group iff every component label is in the profile's set for that axis
/// (conjunctive for two-way targets); unknown if a required axis is
/// undisclosed; out_group otherwise.
GroupRelation is_in_group(const ParticipantProfile& profile, const DemographicTarget& target);

struct AssignmentRecord {
  std::string dialogue_id;
  std::string participant_id;
  Role role = Role::red_teamer;
  GroupRelation relation = GroupRelation::not_applicable;
  std::int64_t timestamp = 0;

  bool operator==(const AssignmentRecord&) const = default;
};

/// Every (dialogue, participant) pair appears at most once across all roles.
class AssignmentLedger {
 public:
  /// Throws conflict "never_twice" when the participant already touched the
  /// dialogue in any role.
  void record(AssignmentRecord record);

  bool touched(std::string_view dialogue_id, std::string_view participant_id) const;
  std::span<const AssignmentRecord> for_dialogue(std::string_view dialogue_id) const;
  std::vector<AssignmentRecord> all() const;
  std::size_t size() const noexcept { return count_; }

 private:
  std::map<std::string, std::vector<AssignmentRecord>, std::less<>> by_dialogue_;
  std::size_t count_ = 0;
};

/// What matching needs to know about a dialogue.
struct DialogueSubject {
  std::string dialogue_id;
  Rule rule;
  std::optional<DemographicTarget> target;
};

struct Eligibility {
  bool eligible = false;
  /// "already assigned", "expertise", "inactive", "role"; empty when eligible.
  std::string reason;
  GroupRelation relation = GroupRelation::not_applicable;
};

/// Eligibility as annotator; arbitration uses the same rules with
/// Role::arbitrator.
Eligibility annotator_eligibility(const DialogueSubject& dialogue, const AssignmentLedger& ledger,
                                  const ParticipantProfile& profile,
                                  Role role = Role::annotator);

struct Selection {
  std::string participant_id;
  GroupRelation relation = GroupRelation::not_applicable;

  bool operator==(const Selection&) const = default;
};

/// Picks k annotators. With in_group_priority on a targeting rule the
/// in-group tier is drained first and the out-group tier (which also holds
/// unknown relations) fills the rest. Within a tier the order is a seeded
/// shuffle. Throws eligibility "annotator_shortfall" if fewer than k qualify.
std::vector<Selection> select_annotators(const DialogueSubject& dialogue,
                                         const AssignmentLedger& ledger,
                                         std::span<const ParticipantProfile> pool, std::size_t k,
                                         bool in_group_priority, std::uint64_t rng_seed);

/// Same matching logic as annotators; the ledger excludes everyone who has
/// already touched the dialogue. Throws "expertise" if the only obstacle was
/// missing expertise, otherwise "no_eligible_arbitrator".
Selection select_arbitrator(const DialogueSubject& dialogue, const AssignmentLedger& ledger,
                            std::span<const ParticipantProfile> pool, std::uint64_t rng_seed,
                            bool in_group_priority = true);

}  // namespace rtc
