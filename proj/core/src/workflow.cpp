#include "rtc/workflow.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>

#include "rtc/error.hpp"

namespace rtc {

namespace {

constexpr std::array<std::pair<std::string_view, DialogueState>, 7> kStates{{
    {"Assigned", DialogueState::Assigned},
    {"InProgress", DialogueState::InProgress},
    {"PreAnnotated", DialogueState::PreAnnotated},
    {"AwaitingAnnotation", DialogueState::AwaitingAnnotation},
    {"PartiallyAnnotated", DialogueState::PartiallyAnnotated},
    {"AwaitingArbitration", DialogueState::AwaitingArbitration},
    {"Finalized", DialogueState::Finalized},
}};

bool blank(std::string_view text) {
  return text.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

[[noreturn]] void wrong_state(const Dialogue& d, std::string_view operation) {
  fail(ErrorKind::state, "wrong_state",
       "cannot " + std::string(operation) + " dialogue '" + d.dialogue_id + "' in state " +
           std::string(to_string(d.state)));
}

}  // namespace

std::string_view to_string(Author author) { return author == Author::attacker ? "attacker" : "model"; }

std::string_view to_string(DialogueState state) {
  for (const auto& [name, value] : kStates) {
    if (value == state) return name;
  }
  return "?";
}

std::string_view to_string(Ordinal ordinal) {
  switch (ordinal) {
    case Ordinal::first: return "first";
    case Ordinal::second: return "second";
    case Ordinal::arbitration: return "arbitration";
  }
  return "?";
}

std::string_view to_string(HeadlineSource source) {
  return source == HeadlineSource::consensus ? "consensus" : "arbitration";
}

std::string_view to_string(ConsensusRule rule) { return rule == ConsensusRule::max ? "max" : "mean_rounded"; }

Author parse_author(std::string_view text) {
  if (text == "attacker") return Author::attacker;
  if (text == "model") return Author::model;
  fail(ErrorKind::validation, "unknown_author", "unknown author '" + std::string(text) + "'");
}

DialogueState parse_dialogue_state(std::string_view text) {
  for (const auto& [name, value] : kStates) {
    if (name == text) return value;
  }
  fail(ErrorKind::validation, "unknown_state", "unknown dialogue state '" + std::string(text) + "'");
}

Ordinal parse_ordinal(std::string_view text) {
  if (text == "first") return Ordinal::first;
  if (text == "second") return Ordinal::second;
  if (text == "arbitration") return Ordinal::arbitration;
  fail(ErrorKind::validation, "unknown_ordinal", "unknown ordinal '" + std::string(text) + "'");
}

HeadlineSource parse_headline_source(std::string_view text) {
  if (text == "consensus") return HeadlineSource::consensus;
  if (text == "arbitration") return HeadlineSource::arbitration;
  fail(ErrorKind::validation, "unknown_headline_source", "unknown headline source '" + std::string(text) + "'");
}

ConsensusRule parse_consensus_rule(std::string_view text) {
  if (text == "max") return ConsensusRule::max;
  if (text == "mean_rounded") return ConsensusRule::mean_rounded;
  fail(ErrorKind::validation, "unknown_consensus_rule", "unknown consensus rule '" + std::string(text) + "'");
}

bool is_transition(DialogueState from, DialogueState to) noexcept {
  using S = DialogueState;
  switch (from) {
    case S::Assigned: return to == S::InProgress;
    case S::InProgress: return to == S::PreAnnotated;
    case S::PreAnnotated: return to == S::AwaitingAnnotation;
    case S::AwaitingAnnotation: return to == S::PartiallyAnnotated;
    case S::PartiallyAnnotated: return to == S::AwaitingArbitration || to == S::Finalized;
    case S::AwaitingArbitration: return to == S::Finalized;
    case S::Finalized: return false;
  }
  return false;
}

std::size_t Dialogue::attacker_turns() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.author == Author::attacker; }));
}

std::size_t Dialogue::model_turns() const noexcept { return turns.size() - attacker_turns(); }

bool Dialogue::touched_by(std::string_view participant_id) const noexcept {
  if (red_teamer_id == participant_id) return true;
  for (const auto& s : assigned_annotators) {
    if (s.participant_id == participant_id) return true;
  }
  return assigned_arbitrator && assigned_arbitrator->participant_id == participant_id;
}

bool needs_arbitration(LikertRating first, LikertRating second, int threshold) noexcept {
  return std::abs(first.value() - second.value()) >= threshold;
}

VerdictRecord final_verdict(const Dialogue& dialogue, ConsensusRule rule) {
  if (dialogue.state != DialogueState::Finalized) {
    fail(ErrorKind::state, "not_finalized", "dialogue '" + dialogue.dialogue_id + "' is not finalized");
  }
  VerdictRecord v;
  v.dialogue_id = dialogue.dialogue_id;
  for (const auto& a : dialogue.annotations) v.all_ratings.push_back(a.rating);

  const auto arbitration = std::find_if(dialogue.annotations.begin(), dialogue.annotations.end(),
                                        [](const Annotation& a) { return a.ordinal == Ordinal::arbitration; });
  if (arbitration != dialogue.annotations.end()) {
    v.headline_rating = arbitration->rating;
    v.headline_source = HeadlineSource::arbitration;
  } else {
    const int a = dialogue.annotations.at(0).rating.value();
    const int b = dialogue.annotations.at(1).rating.value();
    // (a + b + 1) / 2 rounds the mean half up.
    v.headline_rating = LikertRating(rule == ConsensusRule::max ? std::max(a, b) : (a + b + 1) / 2);
    v.headline_source = HeadlineSource::consensus;
  }
  v.binarized = binarize_rating(v.headline_rating);
  return v;
}

Workflow::Workflow(WorkflowOptions options) : options_(std::move(options)) {
  if (options_.arbitration_threshold < 1 || options_.arbitration_threshold > 3) {
    fail(ErrorKind::validation, "invalid_threshold", "arbitration threshold must be in {1,2,3}");
  }
}

const Dialogue* Workflow::find(std::string_view dialogue_id) const noexcept {
  auto it = dialogues_.find(dialogue_id);
  return it == dialogues_.end() ? nullptr : &it->second;
}

const Dialogue& Workflow::dialogue(std::string_view dialogue_id) const {
  if (const Dialogue* d = find(dialogue_id)) return *d;
  fail(ErrorKind::not_found, "unknown_dialogue", "unknown dialogue '" + std::string(dialogue_id) + "'");
}

Dialogue& Workflow::mutable_dialogue(std::string_view dialogue_id) {
  auto it = dialogues_.find(dialogue_id);
  if (it == dialogues_.end()) {
    fail(ErrorKind::not_found, "unknown_dialogue", "unknown dialogue '" + std::string(dialogue_id) + "'");
  }
  return it->second;
}

void Workflow::transition(Dialogue& dialogue, DialogueState to) {
  if (!is_transition(dialogue.state, to)) {
    fail(ErrorKind::state, "illegal_transition",
         std::string(to_string(dialogue.state)) + " -> " + std::string(to_string(to)) + " is not a lifecycle edge");
  }
  dialogue.state = to;
}

bool Workflow::card_consumed(std::string_view instruction_id) const noexcept {
  return consumed_cards_.contains(instruction_id);
}

void Workflow::check_start(const std::string& dialogue_id, const InstructionCard& card,
                           const std::string& red_teamer_id) const {
  if (card_consumed(card.instruction_id)) {
    fail(ErrorKind::conflict, "card_consumed", "instruction '" + card.instruction_id + "' already consumed");
  }
  if (dialogues_.contains(dialogue_id)) {
    fail(ErrorKind::conflict, "duplicate_dialogue", "dialogue '" + dialogue_id + "' already exists");
  }
  if (card.participant_id != red_teamer_id) {
    fail(ErrorKind::eligibility, "card_not_issued",
         "instruction '" + card.instruction_id + "' was not issued to '" + red_teamer_id + "'");
  }
  if (blank(card.topic)) {
    fail(ErrorKind::validation, "topic_required", "a topic must be committed before the dialogue starts");
  }
}

const Dialogue& Workflow::start(const std::string& dialogue_id, InstructionCard card,
                                const std::string& red_teamer_id, std::int64_t timestamp) {
  check_start(dialogue_id, card, red_teamer_id);
  Dialogue d;
  d.dialogue_id = dialogue_id;
  d.red_teamer_id = red_teamer_id;
  d.created_at = timestamp;
  consumed_cards_.insert(card.instruction_id);
  d.instruction = std::move(card);
  transition(d, DialogueState::InProgress);
  return dialogues_.emplace(dialogue_id, std::move(d)).first->second;
}

void Workflow::check_append_turn(std::string_view dialogue_id, Author author, std::string_view text) const {
  const Dialogue& d = dialogue(dialogue_id);
  if (d.state != DialogueState::InProgress) wrong_state(d, "append a turn to");
  const Author expected = d.turns.size() % 2 == 0 ? Author::attacker : Author::model;
  if (author != expected) {
    fail(ErrorKind::validation, "alternation",
         "turn alternation violated: expected " + std::string(to_string(expected)) + " turn");
  }
  if (blank(text)) fail(ErrorKind::validation, "empty_text", "turn text is empty");
}

TurnResult Workflow::append_turn(std::string_view dialogue_id, Author author, std::string text,
                                 std::int64_t timestamp) {
  check_append_turn(dialogue_id, author, text);
  Dialogue& d = mutable_dialogue(dialogue_id);
  Turn turn{static_cast<int>(d.turns.size()), author, std::move(text), timestamp};
  d.turns.push_back(turn);
  TurnResult result{std::move(turn), std::nullopt};
  if (author == Author::attacker && d.attacker_turns() > options_.encouraged_max_turns) {
    result.advisory = std::string(kAdvisoryAboveRange);
    if (std::find(d.advisories.begin(), d.advisories.end(), *result.advisory) == d.advisories.end()) {
      d.advisories.push_back(*result.advisory);
    }
  }
  return result;
}

void Workflow::check_close(std::string_view dialogue_id, const PreAnnotation& pre) const {
  const Dialogue& d = dialogue(dialogue_id);
  if (d.state != DialogueState::InProgress) wrong_state(d, "close");
  if (d.model_turns() == 0) {
    fail(ErrorKind::validation, "no_model_turns", "dialogue '" + d.dialogue_id + "' has no model turn");
  }
  if (pre.other_rules_broken.contains(d.instruction.rule_id)) {
    fail(ErrorKind::validation, "targeted_rule_duplicated",
         "targeted rule duplicated in other_rules_broken");
  }
  for (const auto& g : pre.groups_mentioned) {
    if (!options_.mention_axes.contains(g.axis)) {
      fail(ErrorKind::validation, "unknown_axis", "groups_mentioned uses unknown axis '" + g.axis + "'");
    }
  }
}

CloseResult Workflow::close(std::string_view dialogue_id, PreAnnotation pre, std::int64_t /*timestamp*/) {
  check_close(dialogue_id, pre);
  Dialogue& d = mutable_dialogue(dialogue_id);
  d.pre_annotation = std::move(pre);
  transition(d, DialogueState::PreAnnotated);
  transition(d, DialogueState::AwaitingAnnotation);
  CloseResult result{d.state, std::nullopt};
  if (d.attacker_turns() < options_.encouraged_min_turns) {
    result.advisory = std::string(kAdvisoryBelowRange);
    d.advisories.push_back(*result.advisory);
  }
  return result;
}

void Workflow::check_assign_annotator(std::string_view dialogue_id, const Selection& who) const {
  const Dialogue& d = dialogue(dialogue_id);
  if (d.state != DialogueState::AwaitingAnnotation && d.state != DialogueState::PartiallyAnnotated) {
    wrong_state(d, "assign an annotator to");
  }
  if (d.assigned_annotators.size() >= 2) {
    fail(ErrorKind::conflict, "annotators_full", "dialogue '" + d.dialogue_id + "' already has two annotators");
  }
  if (d.touched_by(who.participant_id)) {
    fail(ErrorKind::conflict, "never_twice",
         "participant '" + who.participant_id + "' already assigned to dialogue '" + d.dialogue_id + "'");
  }
}

void Workflow::assign_annotator(std::string_view dialogue_id, Selection who) {
  check_assign_annotator(dialogue_id, who);
  mutable_dialogue(dialogue_id).assigned_annotators.push_back(std::move(who));
}

void Workflow::check_submit_annotation(std::string_view dialogue_id, std::string_view annotator_id,
                                       std::string_view reasoning) const {
  const Dialogue& d = dialogue(dialogue_id);
  if (d.state != DialogueState::AwaitingAnnotation && d.state != DialogueState::PartiallyAnnotated) {
    wrong_state(d, "annotate");
  }
  if (blank(reasoning)) fail(ErrorKind::validation, "reasoning_required", "reasoning required");
  const bool assigned = std::any_of(d.assigned_annotators.begin(), d.assigned_annotators.end(),
                                    [&](const Selection& s) { return s.participant_id == annotator_id; });
  if (!assigned) {
    fail(ErrorKind::eligibility, "unassigned",
         "'" + std::string(annotator_id) + "' holds no annotation assignment on '" + d.dialogue_id + "'");
  }
  const bool duplicate = std::any_of(d.annotations.begin(), d.annotations.end(),
                                     [&](const Annotation& a) { return a.annotator_id == annotator_id; });
  if (duplicate) {
    fail(ErrorKind::conflict, "duplicate_submission",
         "'" + std::string(annotator_id) + "' already annotated '" + d.dialogue_id + "'");
  }
}

DialogueState Workflow::submit_annotation(std::string_view dialogue_id, const std::string& annotator_id,
                                          LikertRating rating, std::string reasoning, std::int64_t timestamp) {
  check_submit_annotation(dialogue_id, annotator_id, reasoning);
  Dialogue& d = mutable_dialogue(dialogue_id);
  const auto assignment = std::find_if(d.assigned_annotators.begin(), d.assigned_annotators.end(),
                                       [&](const Selection& s) { return s.participant_id == annotator_id; });
  Annotation a;
  a.dialogue_id = d.dialogue_id;
  a.annotator_id = annotator_id;
  a.rating = rating;
  a.reasoning = std::move(reasoning);
  a.relation = assignment->relation;
  a.ordinal = d.annotations.empty() ? Ordinal::first : Ordinal::second;
  a.timestamp = timestamp;
  d.annotations.push_back(std::move(a));

  if (d.annotations.size() == 1) {
    transition(d, DialogueState::PartiallyAnnotated);
  } else if (needs_arbitration(d.annotations[0].rating, d.annotations[1].rating, options_.arbitration_threshold)) {
    transition(d, DialogueState::AwaitingArbitration);
  } else {
    transition(d, DialogueState::Finalized);
  }
  return d.state;
}

void Workflow::check_assign_arbitrator(std::string_view dialogue_id, const Selection& who) const {
  const Dialogue& d = dialogue(dialogue_id);
  if (d.state != DialogueState::AwaitingArbitration) wrong_state(d, "assign an arbitrator to");
  if (d.assigned_arbitrator) {
    fail(ErrorKind::conflict, "arbitrator_assigned", "dialogue '" + d.dialogue_id + "' already has an arbitrator");
  }
  if (d.touched_by(who.participant_id)) {
    fail(ErrorKind::conflict, "never_twice",
         "participant '" + who.participant_id + "' already assigned to dialogue '" + d.dialogue_id + "'");
  }
}

void Workflow::assign_arbitrator(std::string_view dialogue_id, Selection who) {
  check_assign_arbitrator(dialogue_id, who);
  mutable_dialogue(dialogue_id).assigned_arbitrator = std::move(who);
}

void Workflow::check_submit_arbitration(std::string_view dialogue_id, std::string_view arbitrator_id,
                                        std::string_view reasoning) const {
  const Dialogue& d = dialogue(dialogue_id);
  if (d.state != DialogueState::AwaitingArbitration) wrong_state(d, "arbitrate");
  if (blank(reasoning)) fail(ErrorKind::validation, "reasoning_required", "reasoning required");
  const bool is_arbitrator = d.assigned_arbitrator && d.assigned_arbitrator->participant_id == arbitrator_id;
  if (!is_arbitrator && d.touched_by(arbitrator_id)) {
    fail(ErrorKind::conflict, "never_twice",
         "'" + std::string(arbitrator_id) + "' already worked on dialogue '" + d.dialogue_id + "'");
  }
  if (!is_arbitrator) {
    fail(ErrorKind::eligibility, "unassigned",
         "'" + std::string(arbitrator_id) + "' is not the arbitrator of '" + d.dialogue_id + "'");
  }
}

VerdictRecord Workflow::submit_arbitration(std::string_view dialogue_id, const std::string& arbitrator_id,
                                           LikertRating rating, std::string reasoning, std::int64_t timestamp) {
  check_submit_arbitration(dialogue_id, arbitrator_id, reasoning);
  Dialogue& d = mutable_dialogue(dialogue_id);
  Annotation a;
  a.dialogue_id = d.dialogue_id;
  a.annotator_id = arbitrator_id;
  a.rating = rating;
  a.reasoning = std::move(reasoning);
  a.relation = d.assigned_arbitrator->relation;
  a.ordinal = Ordinal::arbitration;
  a.timestamp = timestamp;
  d.annotations.push_back(std::move(a));
  transition(d, DialogueState::Finalized);
  return final_verdict(d, options_.consensus);
}

VerdictRecord Workflow::verdict(std::string_view dialogue_id) const {
  return final_verdict(dialogue(dialogue_id), options_.consensus);
}

void Workflow::restore(Dialogue dialogue) {
  consumed_cards_.insert(dialogue.instruction.instruction_id);
  std::string id = dialogue.dialogue_id;
  dialogues_.insert_or_assign(std::move(id), std::move(dialogue));
}

}  // namespace rtc
