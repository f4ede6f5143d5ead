#include "rtc/matching.hpp"

#include <algorithm>

#include "rtc/error.hpp"
#include "rtc/rng.hpp"

namespace rtc {

std::string_view to_string(GroupRelation relation) {
  switch (relation) {
    case GroupRelation::in_group: return "in_group";
    case GroupRelation::out_group: return "out_group";
    case GroupRelation::unknown: return "unknown";
    case GroupRelation::not_applicable: return "not_applicable";
  }
  return "?";
}

GroupRelation parse_group_relation(std::string_view text) {
  if (text == "in_group") return GroupRelation::in_group;
  if (text == "out_group") return GroupRelation::out_group;
  if (text == "unknown") return GroupRelation::unknown;
  if (text == "not_applicable") return GroupRelation::not_applicable;
  fail(ErrorKind::validation, "unknown_relation", "unknown group relation '" + std::string(text) + "'");
}

GroupRelation is_in_group(const ParticipantProfile& profile, const DemographicTarget& target) {
  bool all_match = true;
  for (const auto& component : target.components()) {
    const auto* labels = profile.labels(component.axis);
    if (labels == nullptr) return GroupRelation::unknown;
    if (!labels->contains(component.label)) all_match = false;
  }
  return all_match ? GroupRelation::in_group : GroupRelation::out_group;
}

void AssignmentLedger::record(AssignmentRecord record) {
  if (touched(record.dialogue_id, record.participant_id)) {
    fail(ErrorKind::conflict, "never_twice",
         "participant '" + record.participant_id + "' already assigned to dialogue '" +
             record.dialogue_id + "'");
  }
  by_dialogue_[record.dialogue_id].push_back(std::move(record));
  ++count_;
}

bool AssignmentLedger::touched(std::string_view dialogue_id, std::string_view participant_id) const {
  auto it = by_dialogue_.find(dialogue_id);
  if (it == by_dialogue_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const AssignmentRecord& r) { return r.participant_id == participant_id; });
}

std::span<const AssignmentRecord> AssignmentLedger::for_dialogue(std::string_view dialogue_id) const {
  auto it = by_dialogue_.find(dialogue_id);
  if (it == by_dialogue_.end()) return {};
  return it->second;
}

std::vector<AssignmentRecord> AssignmentLedger::all() const {
  std::vector<AssignmentRecord> out;
  out.reserve(count_);
  for (const auto& [id, records] : by_dialogue_) out.insert(out.end(), records.begin(), records.end());
  return out;
}

Eligibility annotator_eligibility(const DialogueSubject& dialogue, const AssignmentLedger& ledger,
                                  const ParticipantProfile& profile, Role role) {
  if (ledger.touched(dialogue.dialogue_id, profile.participant_id)) {
    return {false, "already assigned", GroupRelation::not_applicable};
  }
  if (!profile.active) return {false, "inactive", GroupRelation::not_applicable};
  if (!profile.can(role)) return {false, "role", GroupRelation::not_applicable};
  if (!profile.has_expertise(dialogue.rule.expertise_required)) {
    return {false, "expertise", GroupRelation::not_applicable};
  }
  if (dialogue.rule.demographic_targeting && dialogue.target) {
    return {true, "", is_in_group(profile, *dialogue.target)};
  }
  return {true, "", GroupRelation::not_applicable};
}

namespace {

struct Tiers {
  std::vector<Selection> preferred;
  std::vector<Selection> fallback;
  std::size_t expertise_rejections = 0;
  std::size_t other_rejections = 0;
};

Tiers build_tiers(const DialogueSubject& dialogue, const AssignmentLedger& ledger,
                  std::span<const ParticipantProfile> pool, bool in_group_priority, Role role) {
  Tiers tiers;
  const bool tiered = in_group_priority && dialogue.rule.demographic_targeting && dialogue.target;
  for (const auto& profile : pool) {
    const Eligibility e = annotator_eligibility(dialogue, ledger, profile, role);
    if (!e.eligible) {
      (e.reason == "expertise" ? tiers.expertise_rejections : tiers.other_rejections)++;
      continue;
    }
    Selection s{profile.participant_id, e.relation};
    if (!tiered || e.relation == GroupRelation::in_group) {
      tiers.preferred.push_back(std::move(s));
    } else {
      tiers.fallback.push_back(std::move(s));
    }
  }
  return tiers;
}

}  // namespace

std::vector<Selection> select_annotators(const DialogueSubject& dialogue,
                                         const AssignmentLedger& ledger,
                                         std::span<const ParticipantProfile> pool, std::size_t k,
                                         bool in_group_priority, std::uint64_t rng_seed) {
  Tiers tiers = build_tiers(dialogue, ledger, pool, in_group_priority, Role::annotator);
  const std::size_t available = tiers.preferred.size() + tiers.fallback.size();
  if (available < k) {
    fail(ErrorKind::eligibility, "annotator_shortfall",
         "dialogue '" + dialogue.dialogue_id + "' needs " + std::to_string(k) +
             " annotators, only " + std::to_string(available) + " eligible");
  }
  Rng rng(rng_seed);
  shuffle_in_place(tiers.preferred, rng);
  shuffle_in_place(tiers.fallback, rng);

  std::vector<Selection> chosen;
  chosen.reserve(k);
  for (auto* tier : {&tiers.preferred, &tiers.fallback}) {
    for (auto& s : *tier) {
      if (chosen.size() == k) break;
      chosen.push_back(std::move(s));
    }
  }
  return chosen;
}

Selection select_arbitrator(const DialogueSubject& dialogue, const AssignmentLedger& ledger,
                            std::span<const ParticipantProfile> pool, std::uint64_t rng_seed,
                            bool in_group_priority) {
  Tiers tiers = build_tiers(dialogue, ledger, pool, in_group_priority, Role::arbitrator);
  if (tiers.preferred.empty() && tiers.fallback.empty()) {
    if (tiers.expertise_rejections > 0) {
      fail(ErrorKind::eligibility, "expertise",
           "no arbitrator with " + std::string(to_string(dialogue.rule.expertise_required)) +
               " expertise available for dialogue '" + dialogue.dialogue_id + "'");
    }
    fail(ErrorKind::eligibility, "no_eligible_arbitrator",
         "no eligible arbitrator for dialogue '" + dialogue.dialogue_id + "'");
  }
  Rng rng(rng_seed);
  auto& tier = tiers.preferred.empty() ? tiers.fallback : tiers.preferred;
  return tier[uniform_index(rng, tier.size())];
}

}  // namespace rtc
