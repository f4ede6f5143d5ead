#include "rtc/service/campaign.hpp"
#include "rtc/service/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>

#include "rtc/error.hpp"
#include "rtc/rng.hpp"

namespace rtc {

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::none: return "none";
    case TaskKind::red_team: return "red_team";
    case TaskKind::annotate: return "annotate";
    case TaskKind::arbitrate: return "arbitrate";
  }
  return "?";
}

CampaignSetup setup_from_config(const CampaignConfig& config) {
  CampaignSetup s{load_policy(read_text_file(config.policy_path.string()))};
  s.roster = load_roster(read_text_file(config.roster_path.string()));
  s.axes = config.axes;
  s.pairing = config.pairing;
  s.use_cases = config.use_cases;
  s.topic_source = config.topic_source;
  if (config.topic_repository_path) {
    s.topics = parse_topic_repository(read_text_file(config.topic_repository_path->string()));
  }
  s.quota_per_cell = config.quota_per_cell;
  s.in_group_priority = config.in_group_priority;
  s.issue.allow_out_group_fill = config.allow_out_group_fill;
  s.workflow.arbitration_threshold = config.arbitration_threshold;
  s.workflow.consensus = config.consensus;
  s.reveal_ratings = config.reveal_ratings;
  s.seed = config.seed;
  return s;
}

std::unique_ptr<ChatBackend> backend_from_config(const CampaignConfig& config) {
  switch (config.backend) {
    case BackendKind::echo: return std::make_unique<EchoBackend>();
    case BackendKind::scripted_violator: {
      ViolatorScript script;
      script.entries.push_back({std::string(kPlantTrigger), "Sure. Here is exactly what you asked for.", true});
      return scripted_violator(std::move(script));
    }
    case BackendKind::remote: return std::make_unique<RemoteBackend>(*config.chat_endpoint, make_http_transport());
  }
  return std::make_unique<EchoBackend>();
}

namespace {

ParameterSpace build_space(const CampaignSetup& s) {
  return ParameterSpace(std::vector<Rule>(s.policy.rules().begin(), s.policy.rules().end()), s.use_cases,
                        enumerate_targets(s.axes, s.pairing), s.topic_source, s.topics);
}

const std::string& str(const Json& payload, const char* key) { return payload.at(key).get_ref<const std::string&>(); }

bool awaiting_annotator(const Dialogue& d) {
  return (d.state == DialogueState::AwaitingAnnotation || d.state == DialogueState::PartiallyAnnotated) &&
         d.assigned_annotators.size() < 2;
}

bool has_annotated(const Dialogue& d, std::string_view pid) {
  return std::any_of(d.annotations.begin(), d.annotations.end(),
                     [&](const Annotation& a) { return a.annotator_id == pid; });
}

bool is_closed(DialogueState s) { return s != DialogueState::Assigned && s != DialogueState::InProgress; }

}  // namespace

Campaign::Campaign(CampaignSetup setup, std::shared_ptr<EventStore> store, std::shared_ptr<const ChatBackend> backend,
                   CampaignOptions options)
    : setup_(std::move(setup)),
      space_(build_space(setup_)),
      store_(std::move(store)),
      backend_(std::move(backend)),
      options_(std::move(options)),
      quota_(space_, setup_.quota_per_cell),
      workflow_(setup_.workflow) {
  if (!store_) fail(ErrorKind::validation, "missing_store", "campaign needs an event store");
  if (!backend_) fail(ErrorKind::validation, "missing_backend", "campaign needs a chat backend");
  if (!options_.clock) options_.clock = system_clock_ms;
  for (const auto& p : setup_.roster) {
    if (!p.token.empty() && !tokens_.emplace(p.token, p.participant_id).second) {
      fail(ErrorKind::validation, "duplicate_token", "two participants share a bearer token");
    }
    participants_.emplace(p.participant_id, p);
  }
  mark_under_served_targets(space_, quota_, setup_.roster);

  if (options_.snapshot) {
    restore(options_.snapshot->state);
    applied_sequence_ = options_.snapshot->sequence_number;
  }
  for (const auto& event : store_->read_after(applied_sequence_)) apply(event);
}

std::optional<std::string> Campaign::authenticate(std::string_view token) const {
  if (token.empty()) return std::nullopt;
  auto it = tokens_.find(token);
  if (it == tokens_.end()) return std::nullopt;
  return it->second;
}

const ParticipantProfile& Campaign::participant_ref(std::string_view participant_id) const {
  auto it = participants_.find(participant_id);
  if (it == participants_.end()) {
    fail(ErrorKind::not_found, "unknown_participant", "unknown participant '" + std::string(participant_id) + "'");
  }
  return it->second;
}

ParticipantProfile& Campaign::mutable_participant(std::string_view participant_id) {
  return const_cast<ParticipantProfile&>(participant_ref(participant_id));
}

ParticipantProfile Campaign::participant(std::string_view participant_id) const {
  std::shared_lock lock(mutex_);
  return participant_ref(participant_id);
}

std::vector<ParticipantProfile> Campaign::roster_vector() const {
  std::vector<ParticipantProfile> out;
  out.reserve(participants_.size());
  for (const auto& [id, p] : participants_) out.push_back(p);
  return out;
}

DialogueSubject Campaign::subject_of(const Dialogue& d) const {
  return {d.dialogue_id, space_.rule(d.instruction.rule_id), d.instruction.target};
}

// --- event application -----------------------------------------------------

void Campaign::apply(const EventRecord& event) {
  const Json& p = event.payload;
  const std::string& kind = event.event_kind;
  const std::int64_t ts = event.timestamp;

  if (kind == event_kind::instruction_issued) {
    InstructionCard card = card_from_json(p.at("card"));
    quota_.record_issue(card);
    pending_.emplace(card.instruction_id, std::move(card));
  } else if (kind == event_kind::dialogue_started) {
    auto it = pending_.find(str(p, "instruction_id"));
    if (it == pending_.end()) {
      fail(ErrorKind::state, "unknown_instruction", "instruction '" + str(p, "instruction_id") + "' is not pending");
    }
    InstructionCard card = it->second;
    card.topic = str(p, "topic");
    const std::string& did = str(p, "dialogue_id");
    const std::string& rt = str(p, "red_teamer_id");
    const GroupRelation relation = card.attacker_group_relation;
    workflow_.start(did, std::move(card), rt, ts);
    pending_.erase(it);
    ledger_.record({did, rt, Role::red_teamer, relation, ts});
  } else if (kind == event_kind::turn_appended) {
    workflow_.append_turn(str(p, "dialogue_id"), parse_author(str(p, "author")), str(p, "text"), ts);
  } else if (kind == event_kind::dialogue_closed) {
    const std::string& did = str(p, "dialogue_id");
    workflow_.close(did, pre_annotation_from_json(p.at("pre_annotation")), ts);
    quota_.record_completion(workflow_.dialogue(did).instruction.cell());
  } else if (kind == event_kind::annotator_assigned) {
    Selection s{str(p, "participant_id"), parse_group_relation(str(p, "relation"))};
    workflow_.assign_annotator(str(p, "dialogue_id"), s);
    ledger_.record({str(p, "dialogue_id"), s.participant_id, Role::annotator, s.relation, ts});
  } else if (kind == event_kind::annotation_submitted) {
    workflow_.submit_annotation(str(p, "dialogue_id"), str(p, "annotator_id"), LikertRating(p.at("rating").get<int>()),
                                str(p, "reasoning"), ts);
  } else if (kind == event_kind::arbitrator_assigned) {
    Selection s{str(p, "participant_id"), parse_group_relation(str(p, "relation"))};
    workflow_.assign_arbitrator(str(p, "dialogue_id"), s);
    ledger_.record({str(p, "dialogue_id"), s.participant_id, Role::arbitrator, s.relation, ts});
  } else if (kind == event_kind::arbitration_submitted) {
    workflow_.submit_arbitration(str(p, "dialogue_id"), str(p, "arbitrator_id"),
                                 LikertRating(p.at("rating").get<int>()), str(p, "reasoning"), ts);
  } else if (kind == event_kind::participant_opted_out) {
    mutable_participant(str(p, "participant_id")).active = false;
  } else {
    fail(ErrorKind::validation, "schema_violation", "unknown event kind '" + kind + "'");
  }
  applied_sequence_ = event.sequence_number;
}

std::uint64_t Campaign::commit(std::string entity_id, std::string_view kind, Json payload) {
  EventRecord event{0, std::move(entity_id), std::string(kind), std::move(payload), options_.clock()};
  event.sequence_number = store_->append(event);
  apply(event);
  if (options_.snapshot_every > 0 && options_.snapshot_path && event.sequence_number % options_.snapshot_every == 0) {
    write_snapshot(*options_.snapshot_path, Snapshot{applied_sequence_, state_unlocked()});
  }
  return event.sequence_number;
}

// --- operations ------------------------------------------------------------

InstructionCard Campaign::issue_instruction(const std::string& participant_id,
                                            std::optional<IssueOptions> override_options) {
  std::unique_lock lock(mutex_);
  const ParticipantProfile& p = participant_ref(participant_id);
  const IssueOptions opts = override_options.value_or(setup_.issue);
  InstructionCard card = select_instruction(space_, quota_, p, mix_seed(setup_.seed, quota_.total_issued()), opts);
  commit(card.instruction_id, event_kind::instruction_issued, Json{{"card", card_to_json(card)}});
  return card;
}

Task Campaign::next_task(const std::string& participant_id) {
  {
    std::shared_lock lock(mutex_);
    const ParticipantProfile& p = participant_ref(participant_id);
    if (!p.active) return Task{TaskKind::none, std::nullopt, std::nullopt, "inactive"};
    for (const auto& [id, d] : workflow_.dialogues()) {
      if (d.state == DialogueState::AwaitingArbitration && d.assigned_arbitrator &&
          d.assigned_arbitrator->participant_id == participant_id) {
        return Task{TaskKind::arbitrate, std::nullopt, id, ""};
      }
    }
    for (const auto& [id, d] : workflow_.dialogues()) {
      if ((d.state == DialogueState::AwaitingAnnotation || d.state == DialogueState::PartiallyAnnotated) &&
          !has_annotated(d, participant_id) &&
          std::any_of(d.assigned_annotators.begin(), d.assigned_annotators.end(),
                      [&](const Selection& s) { return s.participant_id == participant_id; })) {
        return Task{TaskKind::annotate, std::nullopt, id, ""};
      }
    }
  }

  // New matching work: arbitration, then annotation, in-group first when the
  // campaign prioritises it.
  std::unique_lock lock(mutex_);
  const ParticipantProfile& p = participant_ref(participant_id);
  auto pick = [&](Role role, auto&& wanted) -> std::optional<std::pair<std::string, GroupRelation>> {
    std::optional<std::pair<std::string, GroupRelation>> fallback;
    for (const auto& [id, d] : workflow_.dialogues()) {
      if (!wanted(d)) continue;
      const Eligibility e = annotator_eligibility(subject_of(d), ledger_, p, role);
      if (!e.eligible) continue;
      if (!setup_.in_group_priority || e.relation != GroupRelation::out_group) return std::pair{id, e.relation};
      if (!fallback) fallback = std::pair{id, e.relation};
    }
    return fallback;
  };
  if (p.can(Role::arbitrator)) {
    auto found = pick(Role::arbitrator, [](const Dialogue& d) {
      return d.state == DialogueState::AwaitingArbitration && !d.assigned_arbitrator;
    });
    if (found) {
      commit(found->first, event_kind::arbitrator_assigned,
             Json{{"dialogue_id", found->first}, {"participant_id", participant_id},
                  {"relation", to_string(found->second)}});
      return Task{TaskKind::arbitrate, std::nullopt, found->first, ""};
    }
  }
  if (p.can(Role::annotator)) {
    auto found = pick(Role::annotator, awaiting_annotator);
    if (found) {
      commit(found->first, event_kind::annotator_assigned,
             Json{{"dialogue_id", found->first}, {"participant_id", participant_id},
                  {"relation", to_string(found->second)}});
      return Task{TaskKind::annotate, std::nullopt, found->first, ""};
    }
  }
  if (p.can(Role::red_teamer)) {
    for (const auto& [id, d] : workflow_.dialogues()) {
      if (d.red_teamer_id == participant_id && d.state == DialogueState::InProgress) {
        return Task{TaskKind::red_team, d.instruction, id, ""};
      }
    }
    for (const auto& [id, card] : pending_) {
      if (card.participant_id == participant_id) return Task{TaskKind::red_team, card, std::nullopt, ""};
    }
    try {
      InstructionCard card =
          select_instruction(space_, quota_, p, mix_seed(setup_.seed, quota_.total_issued()), setup_.issue);
      commit(card.instruction_id, event_kind::instruction_issued, Json{{"card", card_to_json(card)}});
      return Task{TaskKind::red_team, card, std::nullopt, ""};
    } catch (const Error& e) {
      return Task{TaskKind::none, std::nullopt, std::nullopt, e.code()};
    }
  }
  return Task{TaskKind::none, std::nullopt, std::nullopt, "no_work"};
}

Dialogue Campaign::start_dialogue(const std::string& participant_id, const std::string& instruction_id,
                                  std::optional<std::string> topic) {
  std::unique_lock lock(mutex_);
  const ParticipantProfile& p = participant_ref(participant_id);
  if (!p.active) fail(ErrorKind::eligibility, "inactive", "participant '" + participant_id + "' is inactive");
  if (workflow_.card_consumed(instruction_id)) {
    fail(ErrorKind::conflict, "card_consumed", "instruction '" + instruction_id + "' already consumed");
  }
  auto it = pending_.find(instruction_id);
  if (it == pending_.end()) fail(ErrorKind::not_found, "unknown_instruction", "unknown instruction '" + instruction_id + "'");
  InstructionCard card = it->second;
  if (topic) card.topic = *topic;

  char id[32];
  std::snprintf(id, sizeof id, "dlg-%06zu", workflow_.dialogues().size() + 1);
  const std::string dialogue_id = id;
  workflow_.check_start(dialogue_id, card, participant_id);
  commit(dialogue_id, event_kind::dialogue_started,
         Json{{"dialogue_id", dialogue_id},
              {"instruction_id", instruction_id},
              {"red_teamer_id", participant_id},
              {"topic", card.topic}});
  return workflow_.dialogue(dialogue_id);
}

void Campaign::append_turn_events(const std::string& dialogue_id, const std::string& attacker_text,
                                  const ModelReply& reply, MessageResult& result, bool attacker_already_recorded) {
  if (!attacker_already_recorded) {
    workflow_.check_append_turn(dialogue_id, Author::attacker, attacker_text);
    commit(dialogue_id, event_kind::turn_appended,
           Json{{"dialogue_id", dialogue_id}, {"author", "attacker"}, {"text", attacker_text}});
  }
  std::string text = reply.text;
  // Blank replies would fail validation; record an explicit placeholder.
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) text = "[empty reply]";
  commit(dialogue_id, event_kind::turn_appended, Json{{"dialogue_id", dialogue_id}, {"author", "model"}, {"text", text}});
  const Dialogue& d = workflow_.dialogue(dialogue_id);
  result.attacker = d.turns[d.turns.size() - 2];
  result.model = d.turns.back();
  result.violative = reply.violative;
  if (d.attacker_turns() > workflow_.options().encouraged_max_turns) result.advisory = std::string(kAdvisoryAboveRange);
}

MessageResult Campaign::send_message(const std::string& participant_id, const std::string& dialogue_id,
                                     const std::string& text) {
  if (!is_valid_utf8(text)) fail(ErrorKind::validation, "invalid_utf8", "message is not valid UTF-8");
  std::vector<Turn> history;
  std::size_t observed_turns = 0;
  {
    std::shared_lock lock(mutex_);
    const Dialogue& d = workflow_.dialogue(dialogue_id);
    if (d.red_teamer_id != participant_id) {
      fail(ErrorKind::eligibility, "not_owner", "dialogue '" + dialogue_id + "' belongs to another red teamer");
    }
    observed_turns = d.turns.size();
    history = d.turns;
    if (history.size() % 2 == 1) {
      // A crash between the two turn events left an unanswered attacker
      // turn; answer it before taking the new message.
      const Turn dangling = history.back();
      history.pop_back();
      lock.unlock();
      const ModelReply reply = converse(history, dangling.text, *backend_);
      std::unique_lock write(mutex_);
      if (workflow_.dialogue(dialogue_id).turns.size() != observed_turns) {
        fail(ErrorKind::conflict, "concurrent_turn", "dialogue '" + dialogue_id + "' changed concurrently");
      }
      MessageResult ignored;
      append_turn_events(dialogue_id, dangling.text, reply, ignored, true);
      history = workflow_.dialogue(dialogue_id).turns;
      observed_turns = history.size();
    } else {
      workflow_.check_append_turn(dialogue_id, Author::attacker, text);
    }
  }
  // The gateway call runs outside the lock.
  const ModelReply reply = converse(history, text, *backend_);

  std::unique_lock lock(mutex_);
  if (workflow_.dialogue(dialogue_id).turns.size() != observed_turns) {
    fail(ErrorKind::conflict, "concurrent_turn", "dialogue '" + dialogue_id + "' changed concurrently");
  }
  MessageResult result;
  append_turn_events(dialogue_id, text, reply, result, false);
  return result;
}

CloseResult Campaign::close_dialogue(const std::string& participant_id, const std::string& dialogue_id,
                                     PreAnnotation pre) {
  std::unique_lock lock(mutex_);
  const Dialogue& d = workflow_.dialogue(dialogue_id);
  if (d.red_teamer_id != participant_id) {
    fail(ErrorKind::eligibility, "not_owner", "dialogue '" + dialogue_id + "' belongs to another red teamer");
  }
  workflow_.check_close(dialogue_id, pre);
  commit(dialogue_id, event_kind::dialogue_closed,
         Json{{"dialogue_id", dialogue_id}, {"pre_annotation", pre_annotation_to_json(pre)}});
  const Dialogue& closed = workflow_.dialogue(dialogue_id);
  CloseResult result{closed.state, std::nullopt};
  if (closed.attacker_turns() < workflow_.options().encouraged_min_turns) {
    result.advisory = std::string(kAdvisoryBelowRange);
  }
  if (setup_.auto_assign) auto_assign_annotators(dialogue_id);
  return result;
}

void Campaign::auto_assign_annotators(const std::string& dialogue_id) {
  const Dialogue& d = workflow_.dialogue(dialogue_id);
  const std::size_t missing = 2 - d.assigned_annotators.size();
  if (missing == 0) return;
  const auto pool = roster_vector();
  std::vector<Selection> chosen;
  try {
    chosen = select_annotators(subject_of(d), ledger_, pool, missing, setup_.in_group_priority,
                               mix_seed(setup_.seed, store_->last_sequence()));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::eligibility) throw;
    return;  // left for the pull path once the pool allows it
  }
  for (const auto& s : chosen) {
    commit(dialogue_id, event_kind::annotator_assigned,
           Json{{"dialogue_id", dialogue_id}, {"participant_id", s.participant_id}, {"relation", to_string(s.relation)}});
  }
}

void Campaign::auto_assign_arbitrator(const std::string& dialogue_id) {
  const Dialogue& d = workflow_.dialogue(dialogue_id);
  if (d.state != DialogueState::AwaitingArbitration || d.assigned_arbitrator) return;
  const auto pool = roster_vector();
  Selection s;
  try {
    s = select_arbitrator(subject_of(d), ledger_, pool, mix_seed(setup_.seed, store_->last_sequence()),
                          setup_.in_group_priority);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::eligibility) throw;
    return;
  }
  commit(dialogue_id, event_kind::arbitrator_assigned,
         Json{{"dialogue_id", dialogue_id}, {"participant_id", s.participant_id}, {"relation", to_string(s.relation)}});
}

Selection Campaign::claim(const std::string& participant_id, const std::string& dialogue_id, Role role) {
  if (role == Role::red_teamer) fail(ErrorKind::validation, "invalid_role", "claims are for annotator or arbitrator");
  std::unique_lock lock(mutex_);
  const ParticipantProfile& p = participant_ref(participant_id);
  const Dialogue& d = workflow_.dialogue(dialogue_id);
  const Eligibility e = annotator_eligibility(subject_of(d), ledger_, p, role);
  if (!e.eligible) {
    std::string code = e.reason;
    std::replace(code.begin(), code.end(), ' ', '_');
    fail(ErrorKind::eligibility, code, e.reason);
  }
  const Selection s{participant_id, e.relation};
  if (role == Role::annotator) {
    workflow_.check_assign_annotator(dialogue_id, s);
    commit(dialogue_id, event_kind::annotator_assigned,
           Json{{"dialogue_id", dialogue_id}, {"participant_id", participant_id}, {"relation", to_string(e.relation)}});
  } else {
    workflow_.check_assign_arbitrator(dialogue_id, s);
    commit(dialogue_id, event_kind::arbitrator_assigned,
           Json{{"dialogue_id", dialogue_id}, {"participant_id", participant_id}, {"relation", to_string(e.relation)}});
  }
  return s;
}

DialogueState Campaign::submit_annotation(const std::string& participant_id, const std::string& dialogue_id,
                                          LikertRating rating, const std::string& reasoning) {
  if (!is_valid_utf8(reasoning)) fail(ErrorKind::validation, "invalid_utf8", "reasoning is not valid UTF-8");
  std::unique_lock lock(mutex_);
  workflow_.check_submit_annotation(dialogue_id, participant_id, reasoning);
  commit(dialogue_id, event_kind::annotation_submitted,
         Json{{"dialogue_id", dialogue_id},
              {"annotator_id", participant_id},
              {"rating", rating.value()},
              {"reasoning", reasoning}});
  const DialogueState state = workflow_.dialogue(dialogue_id).state;
  if (state == DialogueState::AwaitingArbitration && setup_.auto_assign) auto_assign_arbitrator(dialogue_id);
  return state;
}

VerdictRecord Campaign::submit_arbitration(const std::string& participant_id, const std::string& dialogue_id,
                                           LikertRating rating, const std::string& reasoning) {
  if (!is_valid_utf8(reasoning)) fail(ErrorKind::validation, "invalid_utf8", "reasoning is not valid UTF-8");
  std::unique_lock lock(mutex_);
  workflow_.check_submit_arbitration(dialogue_id, participant_id, reasoning);
  commit(dialogue_id, event_kind::arbitration_submitted,
         Json{{"dialogue_id", dialogue_id},
              {"arbitrator_id", participant_id},
              {"rating", rating.value()},
              {"reasoning", reasoning}});
  return workflow_.verdict(dialogue_id);
}

std::vector<Selection> Campaign::assign_from(const std::string& dialogue_id, Role role,
                                             const std::set<std::string>& available) {
  if (role == Role::red_teamer) fail(ErrorKind::validation, "invalid_role", "assignment is for annotator or arbitrator");
  std::unique_lock lock(mutex_);
  const Dialogue& d = workflow_.dialogue(dialogue_id);
  std::vector<ParticipantProfile> pool;
  for (const auto& [id, p] : participants_) {
    if (available.contains(id)) pool.push_back(p);
  }
  const std::uint64_t seed = mix_seed(setup_.seed, store_->last_sequence());
  std::vector<Selection> chosen;
  if (role == Role::annotator) {
    if (d.state != DialogueState::AwaitingAnnotation && d.state != DialogueState::PartiallyAnnotated) {
      fail(ErrorKind::state, "invalid_transition", "dialogue '" + dialogue_id + "' is not awaiting annotation");
    }
    const std::size_t missing = 2 - d.assigned_annotators.size();
    if (missing == 0) return {};
    chosen = select_annotators(subject_of(d), ledger_, pool, missing, setup_.in_group_priority, seed);
  } else {
    if (d.state != DialogueState::AwaitingArbitration) {
      fail(ErrorKind::state, "invalid_transition", "dialogue '" + dialogue_id + "' is not awaiting arbitration");
    }
    if (d.assigned_arbitrator) return {};
    chosen.push_back(select_arbitrator(subject_of(d), ledger_, pool, seed, setup_.in_group_priority));
  }
  const auto kind = role == Role::annotator ? event_kind::annotator_assigned : event_kind::arbitrator_assigned;
  for (const auto& s : chosen) {
    commit(dialogue_id, kind,
           Json{{"dialogue_id", dialogue_id}, {"participant_id", s.participant_id}, {"relation", to_string(s.relation)}});
  }
  return chosen;
}

void Campaign::opt_out(const std::string& participant_id) {
  std::unique_lock lock(mutex_);
  if (!participant_ref(participant_id).active) return;
  commit(participant_id, event_kind::participant_opted_out, Json{{"participant_id", participant_id}});
}

// --- reads -----------------------------------------------------------------

Dialogue Campaign::dialogue(std::string_view dialogue_id) const {
  std::shared_lock lock(mutex_);
  return workflow_.dialogue(dialogue_id);
}

std::vector<Dialogue> Campaign::dialogues() const {
  std::shared_lock lock(mutex_);
  std::vector<Dialogue> out;
  out.reserve(workflow_.dialogues().size());
  for (const auto& [id, d] : workflow_.dialogues()) out.push_back(d);
  return out;
}

std::vector<InstructionCard> Campaign::pending_cards() const {
  std::shared_lock lock(mutex_);
  std::vector<InstructionCard> out;
  for (const auto& [id, c] : pending_) out.push_back(c);
  return out;
}

AssignmentLedger Campaign::ledger() const {
  std::shared_lock lock(mutex_);
  return ledger_;
}

CoverageReport Campaign::coverage() const {
  std::shared_lock lock(mutex_);
  return coverage_report(space_, quota_);
}

void Campaign::export_jsonl(std::ostream& out, const ExportFilter& filter) const {
  const auto all = dialogues();
  export_dialogues(out, all, filter, setup_.workflow.consensus);
}

std::uint64_t Campaign::last_sequence() const {
  std::shared_lock lock(mutex_);
  return applied_sequence_;
}

Json Campaign::state() const {
  std::shared_lock lock(mutex_);
  return state_unlocked();
}

Json Campaign::state_unlocked() const {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["sequence"] = applied_sequence_;
  Json inactive = Json::array();
  for (const auto& [id, p] : participants_) {
    if (!p.active) inactive.push_back(id);
  }
  j["inactive_participants"] = std::move(inactive);
  Json pending = Json::array();
  for (const auto& [id, c] : pending_) pending.push_back(card_to_json(c));
  j["pending_cards"] = std::move(pending);
  Json dialogues = Json::array();
  for (const auto& [id, d] : workflow_.dialogues()) dialogues.push_back(dialogue_state_to_json(d));
  j["dialogues"] = std::move(dialogues);
  Json cells = Json::array();
  for (const auto& [key, c] : quota_.cells()) {
    cells.push_back({{"cell", key}, {"issued", c.issued}, {"completed", c.completed}});
  }
  Json splits = Json::array();
  for (const auto& [key, s] : quota_.splits()) {
    splits.push_back({{"target", key}, {"in_group", s.in_group}, {"out_group", s.out_group}});
  }
  j["quota"] = {{"total_issued", quota_.total_issued()}, {"cells", std::move(cells)}, {"splits", std::move(splits)}};
  return j;
}

std::string Campaign::state_dump() const { return state().dump(); }

Snapshot Campaign::snapshot() const {
  std::shared_lock lock(mutex_);
  return Snapshot{applied_sequence_, state_unlocked()};
}

void Campaign::restore(const Json& state) {
  if (state.at("schema_version").get<int>() != kSchemaVersion) {
    fail(ErrorKind::validation, "schema_version", "snapshot has an unsupported schema_version");
  }
  quota_ = QuotaState(space_, setup_.quota_per_cell);
  mark_under_served_targets(space_, quota_, setup_.roster);
  workflow_ = Workflow(setup_.workflow);
  ledger_ = AssignmentLedger();
  pending_.clear();

  for (const auto& id : state.at("inactive_participants")) mutable_participant(id.get<std::string>()).active = false;
  for (const auto& c : state.at("pending_cards")) {
    InstructionCard card = card_from_json(c);
    quota_.record_issue(card);
    pending_.emplace(card.instruction_id, std::move(card));
  }
  for (const auto& dj : state.at("dialogues")) {
    Dialogue d = dialogue_state_from_json(dj);
    quota_.record_issue(d.instruction);
    if (is_closed(d.state)) quota_.record_completion(d.instruction.cell());
    ledger_.record({d.dialogue_id, d.red_teamer_id, Role::red_teamer, d.instruction.attacker_group_relation, d.created_at});
    for (const auto& s : d.assigned_annotators) {
      ledger_.record({d.dialogue_id, s.participant_id, Role::annotator, s.relation, d.created_at});
    }
    if (d.assigned_arbitrator) {
      ledger_.record({d.dialogue_id, d.assigned_arbitrator->participant_id, Role::arbitrator,
                      d.assigned_arbitrator->relation, d.created_at});
    }
    workflow_.restore(std::move(d));
  }
}

}  // namespace rtc
