#pragma once

// A running campaign. Every mutation is validated, appended to the event log
// and only then applied, so replaying the log through the same mutators
// rebuilds the state exactly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "rtc/datastore.hpp"
#include "rtc/gateway.hpp"
#include "rtc/instruction.hpp"
#include "rtc/matching.hpp"
#include "rtc/policy.hpp"
#include "rtc/service/config.hpp"
#include "rtc/workflow.hpp"

namespace rtc {

struct CampaignSetup {
  explicit CampaignSetup(ContentPolicy p) : policy(std::move(p)) {}

  ContentPolicy policy;
  std::vector<ParticipantProfile> roster;
  std::vector<DemographicAxis> axes = default_axes();
  std::optional<PairingSpec> pairing = default_pairing();
  std::vector<std::string> use_cases = default_use_cases();
  TopicSource topic_source = TopicSource::free_text;
  std::vector<std::string> topics;
  std::uint64_t quota_per_cell = 1;
  bool in_group_priority = true;
  IssueOptions issue;
  WorkflowOptions workflow;
  bool reveal_ratings = false;
  /// Assign annotators on close and the arbitrator on divergence. When off,
  /// work is handed out only through next_task, claim and assign_from.
  bool auto_assign = true;
  std::uint64_t seed = 0;
};

/// Reads the policy, roster and topic files a config points at.
CampaignSetup setup_from_config(const CampaignConfig& config);

std::unique_ptr<ChatBackend> backend_from_config(const CampaignConfig& config);

enum class TaskKind { none, red_team, annotate, arbitrate };
std::string_view to_string(TaskKind kind);

struct Task {
  TaskKind kind = TaskKind::none;
  /// red_team: the card (fresh or still unstarted).
  std::optional<InstructionCard> card;
  /// red_team with a dialogue in progress, annotate, arbitrate.
  std::optional<std::string> dialogue_id;
  /// Why nothing was handed out, for TaskKind::none.
  std::string reason;
};

struct MessageResult {
  Turn attacker;
  Turn model;
  std::optional<std::string> advisory;
  bool violative = false;
};

using Clock = std::function<std::int64_t()>;

/// Wall clock in epoch milliseconds.
std::int64_t system_clock_ms();

struct CampaignOptions {
  Clock clock;
  /// Replay starts from this snapshot when given.
  std::optional<Snapshot> snapshot;
  /// Write a snapshot here every snapshot_every events (0 = never).
  std::optional<std::filesystem::path> snapshot_path;
  std::uint64_t snapshot_every = 0;
};

class Campaign {
 public:
  /// Restores from options.snapshot (if any) and replays the remaining
  /// events of the store.
  Campaign(CampaignSetup setup, std::shared_ptr<EventStore> store, std::shared_ptr<const ChatBackend> backend,
           CampaignOptions options = {});

  Campaign(const Campaign&) = delete;
  Campaign& operator=(const Campaign&) = delete;

  const CampaignSetup& setup() const noexcept { return setup_; }
  const ParameterSpace& space() const noexcept { return space_; }

  /// Participant id for a bearer token; nullopt when no roster entry has it.
  std::optional<std::string> authenticate(std::string_view token) const;
  ParticipantProfile participant(std::string_view participant_id) const;

  InstructionCard issue_instruction(const std::string& participant_id,
                                    std::optional<IssueOptions> override_options = std::nullopt);
  /// Pull model: pending work first, then new matching work.
  Task next_task(const std::string& participant_id);

  /// topic is required for free-text campaigns and optional otherwise.
  Dialogue start_dialogue(const std::string& participant_id, const std::string& instruction_id,
                          std::optional<std::string> topic = std::nullopt);
  /// Sends the attacker message through the gateway and records both turns.
  MessageResult send_message(const std::string& participant_id, const std::string& dialogue_id,
                             const std::string& text);
  CloseResult close_dialogue(const std::string& participant_id, const std::string& dialogue_id,
                             PreAnnotation pre);

  /// Claims a dialogue for annotation or arbitration. Throws eligibility with
  /// the matching reason ("already assigned", "inactive", "role",
  /// "expertise") when the participant may not take it.
  Selection claim(const std::string& participant_id, const std::string& dialogue_id, Role role);

  DialogueState submit_annotation(const std::string& participant_id, const std::string& dialogue_id,
                                  LikertRating rating, const std::string& reasoning);
  VerdictRecord submit_arbitration(const std::string& participant_id, const std::string& dialogue_id,
                                   LikertRating rating, const std::string& reasoning);

  void opt_out(const std::string& participant_id);

  /// Runs annotator (or arbitrator) selection over the given subset of the
  /// roster, e.g. the participants currently online. Fills the open slots
  /// and throws eligibility on shortfall without assigning anyone.
  std::vector<Selection> assign_from(const std::string& dialogue_id, Role role,
                                     const std::set<std::string>& available);

  Dialogue dialogue(std::string_view dialogue_id) const;
  std::vector<Dialogue> dialogues() const;
  std::vector<InstructionCard> pending_cards() const;
  AssignmentLedger ledger() const;
  CoverageReport coverage() const;
  void export_jsonl(std::ostream& out, const ExportFilter& filter) const;

  /// Canonical JSON of the whole campaign state.
  Json state() const;
  std::string state_dump() const;
  Snapshot snapshot() const;
  std::uint64_t last_sequence() const;

 private:
  void apply(const EventRecord& event);
  void restore(const Json& state);
  Json state_unlocked() const;
  std::uint64_t commit(std::string entity_id, std::string_view kind, Json payload);
  void auto_assign_annotators(const std::string& dialogue_id);
  void auto_assign_arbitrator(const std::string& dialogue_id);
  DialogueSubject subject_of(const Dialogue& d) const;
  ParticipantProfile& mutable_participant(std::string_view participant_id);
  const ParticipantProfile& participant_ref(std::string_view participant_id) const;
  std::vector<ParticipantProfile> roster_vector() const;
  void append_turn_events(const std::string& dialogue_id, const std::string& attacker_text, const ModelReply& reply,
                          MessageResult& result, bool attacker_already_recorded);

  CampaignSetup setup_;
  ParameterSpace space_;
  std::shared_ptr<EventStore> store_;
  std::shared_ptr<const ChatBackend> backend_;
  CampaignOptions options_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, ParticipantProfile, std::less<>> participants_;
  std::map<std::string, std::string, std::less<>> tokens_;
  QuotaState quota_;
  Workflow workflow_;
  AssignmentLedger ledger_;
  std::map<std::string, InstructionCard, std::less<>> pending_;
  std::uint64_t applied_sequence_ = 0;
};

}  // namespace rtc
