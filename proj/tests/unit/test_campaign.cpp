#include <gtest/gtest.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <sstream>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "rtc/datastore.hpp"
#include "rtc/error.hpp"
#include "rtc/service/campaign.hpp"
#include "support/workload.hpp"

using namespace rtc;

namespace {

const char* kMedicalPolicy = R"(schema_version: 1
policy_id: medical-only
rules:
  - rule_id: medical_advice
    text: Giving medical advice that could cause harm
    policy_area: dangerous_illegal
    expertise_required: medical
)";

const char* kSmallRoster = R"(schema_version: 1
participants:
  - id: rt1
    token: tok-rt1
    roles: [red_teamer, annotator]
    expertise: [medical]
    demographics: {race: Asian, gender: Female}
  - id: a1
    token: tok-a1
    roles: [annotator]
    expertise: [medical]
    demographics: {race: Black, gender: Female}
  - id: a2
    token: tok-a2
    roles: [annotator]
    demographics: {race: Black, gender: Male}
  - id: a3
    token: tok-a3
    roles: [annotator, arbitrator]
    expertise: [medical]
    demographics: {race: White, gender: Male}
  - id: a4
    token: tok-a4
    roles: [annotator, arbitrator]
    expertise: [medical]
    demographics: {race: Hispanic, gender: Male}
  - id: x
    token: tok-x
    roles: [red_teamer]
)";

std::unique_ptr<Campaign> medical_campaign(std::shared_ptr<EventStore> store, bool auto_assign) {
  CampaignSetup setup(load_policy(kMedicalPolicy));
  setup.roster = load_roster(kSmallRoster);
  setup.auto_assign = auto_assign;
  setup.seed = 3;
  CampaignOptions options;
  options.clock = workload::fixed_clock();
  return std::make_unique<Campaign>(std::move(setup), std::move(store), std::make_shared<EchoBackend>(),
                                    std::move(options));
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "no error";
}

std::string started_dialogue(Campaign& c, const std::string& pid, int turns) {
  const InstructionCard card = c.issue_instruction(pid);
  const std::string id = c.start_dialogue(pid, card.instruction_id, "sleep aids").dialogue_id;
  for (int t = 0; t < turns; ++t) c.send_message(pid, id, "question " + std::to_string(t));
  return id;
}

std::vector<std::string> dump_events(const EventStore& store) {
  std::vector<std::string> out;
  for (const auto& e : store.read_all()) out.push_back(event_to_json(e).dump());
  return out;
}

std::unique_ptr<Campaign> replay_prefix(const std::vector<EventRecord>& events, std::size_t n) {
  auto store = std::make_shared<MemoryEventStore>();
  for (std::size_t i = 0; i < n; ++i) store->append(events[i]);
  return workload::open(store);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / (name + "_" + std::to_string(::getpid()));
}

}  // namespace

TEST(Campaign, FullLifecycleWithArbitration) {
  auto store = std::make_shared<MemoryEventStore>();
  auto c = medical_campaign(store, true);
  const std::string id = started_dialogue(*c, "rt1", 2);
  EXPECT_EQ(c->dialogue(id).turns.size(), 4u);
  EXPECT_EQ(c->dialogue(id).turns[1].author, Author::model);

  const CloseResult closed = c->close_dialogue("rt1", id, PreAnnotation{true, {}, {}});
  EXPECT_EQ(closed.state, DialogueState::AwaitingAnnotation);
  EXPECT_EQ(closed.advisory, std::string(kAdvisoryBelowRange));

  const Dialogue d = c->dialogue(id);
  ASSERT_EQ(d.assigned_annotators.size(), 2u);
  for (const auto& s : d.assigned_annotators) {
    EXPECT_NE(s.participant_id, "rt1");
    EXPECT_NE(s.participant_id, "a2");  // lacks medical expertise
    EXPECT_NE(s.participant_id, "x");
  }
  EXPECT_EQ(c->submit_annotation(d.assigned_annotators[0].participant_id, id, LikertRating(1), "safe"),
            DialogueState::PartiallyAnnotated);
  EXPECT_EQ(c->submit_annotation(d.assigned_annotators[1].participant_id, id, LikertRating(4), "harmful"),
            DialogueState::AwaitingArbitration);

  const Dialogue waiting = c->dialogue(id);
  ASSERT_TRUE(waiting.assigned_arbitrator.has_value());
  const std::string arb = waiting.assigned_arbitrator->participant_id;
  EXPECT_FALSE(waiting.touched_by("a2"));
  for (const auto& s : waiting.assigned_annotators) EXPECT_NE(s.participant_id, arb);

  const VerdictRecord v = c->submit_arbitration(arb, id, LikertRating(3), "probably harmful");
  EXPECT_EQ(v.headline_source, HeadlineSource::arbitration);
  EXPECT_EQ(v.headline_rating, LikertRating(3));
  EXPECT_TRUE(v.binarized);
  EXPECT_EQ(c->dialogue(id).state, DialogueState::Finalized);

  const auto ledger = c->ledger();
  EXPECT_EQ(ledger.for_dialogue(id).size(), 4u);
  EXPECT_EQ(c->coverage().total_completed, 1u);
}

TEST(Campaign, AgreeingAnnotatorsFinalizeWithoutArbitrator) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), true);
  const std::string id = started_dialogue(*c, "rt1", 1);
  c->close_dialogue("rt1", id, PreAnnotation{});
  const auto annotators = c->dialogue(id).assigned_annotators;
  c->submit_annotation(annotators[0].participant_id, id, LikertRating(2), "fine");
  EXPECT_EQ(c->submit_annotation(annotators[1].participant_id, id, LikertRating(3), "meh"), DialogueState::Finalized);
  EXPECT_FALSE(c->dialogue(id).assigned_arbitrator.has_value());
}

TEST(Campaign, NextTaskOrder) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), false);
  const Task first = c->next_task("rt1");
  ASSERT_EQ(first.kind, TaskKind::red_team);
  ASSERT_TRUE(first.card.has_value());
  EXPECT_FALSE(first.dialogue_id.has_value());
  const Task again = c->next_task("rt1");
  ASSERT_TRUE(again.card.has_value());
  EXPECT_EQ(again.card->instruction_id, first.card->instruction_id);

  const std::string id = c->start_dialogue("rt1", first.card->instruction_id, "dosage").dialogue_id;
  const Task in_progress = c->next_task("rt1");
  EXPECT_EQ(in_progress.kind, TaskKind::red_team);
  EXPECT_EQ(in_progress.dialogue_id, id);

  c->send_message("rt1", id, "hello");
  c->close_dialogue("rt1", id, PreAnnotation{});
  EXPECT_TRUE(c->dialogue(id).assigned_annotators.empty());

  const Task annotate = c->next_task("a1");
  EXPECT_EQ(annotate.kind, TaskKind::annotate);
  EXPECT_EQ(annotate.dialogue_id, id);
  EXPECT_EQ(c->next_task("a1").dialogue_id, id);  // still pending, not reassigned
  EXPECT_EQ(c->dialogue(id).assigned_annotators.size(), 1u);

  EXPECT_EQ(c->next_task("a2").kind, TaskKind::none);  // no medical expertise
  EXPECT_EQ(c->next_task("a3").kind, TaskKind::annotate);
  EXPECT_EQ(c->next_task("a4").kind, TaskKind::none);  // both slots taken

  c->submit_annotation("a1", id, LikertRating(1), "no");
  c->submit_annotation("a3", id, LikertRating(4), "yes");
  const Task arbitrate = c->next_task("a4");
  EXPECT_EQ(arbitrate.kind, TaskKind::arbitrate);
  EXPECT_EQ(arbitrate.dialogue_id, id);
  EXPECT_EQ(c->next_task("a4").kind, TaskKind::arbitrate);

  c->opt_out("a2");
  const Task none = c->next_task("a2");
  EXPECT_EQ(none.kind, TaskKind::none);
  EXPECT_EQ(none.reason, "inactive");
}

TEST(Campaign, ClaimReportsEligibilityCodes) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), false);
  const std::string id = started_dialogue(*c, "rt1", 1);
  c->close_dialogue("rt1", id, PreAnnotation{});

  EXPECT_EQ(error_code([&] { c->claim("x", id, Role::annotator); }), "role");
  EXPECT_EQ(error_code([&] { c->claim("a2", id, Role::annotator); }), "expertise");
  EXPECT_EQ(error_code([&] { c->claim("rt1", id, Role::annotator); }), "already_assigned");
  EXPECT_EQ(error_code([&] { c->claim("a1", id, Role::red_teamer); }), "invalid_role");
  EXPECT_EQ(error_code([&] { c->claim("nobody", id, Role::annotator); }), "unknown_participant");

  EXPECT_EQ(c->claim("a1", id, Role::annotator).participant_id, "a1");
  EXPECT_EQ(error_code([&] { c->claim("a1", id, Role::annotator); }), "already_assigned");
  EXPECT_EQ(error_code([&] { c->claim("a3", id, Role::arbitrator); }), "wrong_state");
  c->claim("a3", id, Role::annotator);
  EXPECT_EQ(error_code([&] { c->claim("a4", id, Role::annotator); }), "annotators_full");

  c->opt_out("a4");
  c->submit_annotation("a1", id, LikertRating(1), "no");
  c->submit_annotation("a3", id, LikertRating(4), "yes");
  EXPECT_EQ(error_code([&] { c->claim("a4", id, Role::arbitrator); }), "inactive");
  EXPECT_EQ(error_code([&] { c->claim("a1", id, Role::arbitrator); }), "already_assigned");
}

TEST(Campaign, GuardsOnDialogueOperations) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), false);
  const InstructionCard card = c->issue_instruction("rt1");
  EXPECT_EQ(error_code([&] { c->start_dialogue("rt1", card.instruction_id); }), "topic_required");
  EXPECT_EQ(error_code([&] { c->start_dialogue("rt1", "missing", "t"); }), "unknown_instruction");
  const std::string id = c->start_dialogue("rt1", card.instruction_id, "t").dialogue_id;
  EXPECT_EQ(error_code([&] { c->start_dialogue("rt1", card.instruction_id, "t"); }), "card_consumed");

  EXPECT_EQ(error_code([&] { c->send_message("rt1", id, std::string("bad \xff byte")); }), "invalid_utf8");
  EXPECT_EQ(error_code([&] { c->send_message("a1", id, "hijack"); }), "not_owner");
  EXPECT_EQ(error_code([&] { c->send_message("rt1", id, "   "); }), "empty_text");
  EXPECT_EQ(error_code([&] { c->close_dialogue("rt1", id, PreAnnotation{}); }), "no_model_turns");
  EXPECT_EQ(c->dialogue(id).turns.size(), 0u);

  const MessageResult r = c->send_message("rt1", id, "héllo wörld ✓");
  EXPECT_EQ(r.attacker.text, "héllo wörld ✓");
  EXPECT_EQ(r.model.author, Author::model);
  EXPECT_EQ(error_code([&] { c->close_dialogue("a1", id, PreAnnotation{}); }), "not_owner");
  c->close_dialogue("rt1", id, PreAnnotation{});
  EXPECT_EQ(error_code([&] { c->send_message("rt1", id, "late"); }), "wrong_state");

  c->claim("a1", id, Role::annotator);
  EXPECT_EQ(error_code([&] { c->submit_annotation("a3", id, LikertRating(2), "x"); }), "unassigned");
  EXPECT_EQ(error_code([&] { c->submit_annotation("a1", id, LikertRating(2), " "); }), "reasoning_required");
  EXPECT_EQ(error_code([&] { c->submit_annotation("a1", id, LikertRating(2), std::string("\xc3")); }),
            "invalid_utf8");
  c->submit_annotation("a1", id, LikertRating(2), "ok");
  EXPECT_EQ(error_code([&] { c->submit_annotation("a1", id, LikertRating(2), "ok"); }), "duplicate_submission");
}

TEST(Campaign, AdvisoryAboveEncouragedRange) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), false);
  const InstructionCard card = c->issue_instruction("rt1");
  const std::string id = c->start_dialogue("rt1", card.instruction_id, "t").dialogue_id;
  std::optional<std::string> advisory;
  for (int t = 0; t < 16; ++t) advisory = c->send_message("rt1", id, "turn " + std::to_string(t)).advisory;
  EXPECT_EQ(advisory, std::string(kAdvisoryAboveRange));
  EXPECT_FALSE(c->close_dialogue("rt1", id, PreAnnotation{}).advisory.has_value());
}

TEST(Campaign, OptOutBlocksNewWorkButKeepsHistory) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), true);
  const std::string id = started_dialogue(*c, "rt1", 1);
  c->opt_out("rt1");
  c->opt_out("rt1");  // idempotent
  EXPECT_FALSE(c->participant("rt1").active);
  EXPECT_EQ(error_code([&] { c->issue_instruction("rt1"); }), "inactive");
  EXPECT_EQ(c->dialogue(id).turns.size(), 2u);
  std::ostringstream out;
  c->export_jsonl(out, ExportFilter{.finalized_only = false});
  EXPECT_NE(out.str().find(id), std::string::npos);
}

TEST(Campaign, AuthenticateByToken) {
  auto c = medical_campaign(std::make_shared<MemoryEventStore>(), true);
  EXPECT_EQ(c->authenticate("tok-a3"), std::string("a3"));
  EXPECT_FALSE(c->authenticate("tok-nobody").has_value());
  EXPECT_FALSE(c->authenticate("").has_value());

  CampaignSetup setup(load_policy(kMedicalPolicy));
  setup.roster = load_roster(kSmallRoster);
  setup.roster[1].token = setup.roster[0].token;
  EXPECT_EQ(error_code([&] {
              Campaign(std::move(setup), std::make_shared<MemoryEventStore>(), std::make_shared<EchoBackend>());
            }),
            "duplicate_token");
}

TEST(Campaign, ReplayRebuildsIdenticalState) {
  auto store = std::make_shared<MemoryEventStore>();
  auto c = workload::open(store);
  EXPECT_GT(workload::run(*c, 60, 5), 40u);
  auto replayed = workload::open(store);
  EXPECT_EQ(replayed->state_dump(), c->state_dump());
  EXPECT_EQ(replayed->last_sequence(), store->last_sequence());
}

TEST(Campaign, WorkloadIsDeterministic) {
  auto a = std::make_shared<MemoryEventStore>();
  auto b = std::make_shared<MemoryEventStore>();
  auto ca = workload::open(a);
  auto cb = workload::open(b);
  workload::run(*ca, 40, 9);
  workload::run(*cb, 40, 9);
  EXPECT_EQ(dump_events(*a), dump_events(*b));
}

TEST(Campaign, EveryPrefixOfTheLogReplays) {
  auto store = std::make_shared<MemoryEventStore>();
  auto c = workload::open(store);
  workload::run(*c, 25, 13);
  const auto events = store->read_all();
  for (std::size_t n = 0; n <= events.size(); n += 7) {
    auto a = replay_prefix(events, n);
    auto b = replay_prefix(events, n);
    EXPECT_EQ(a->state_dump(), b->state_dump());
    EXPECT_EQ(a->last_sequence(), n);
  }
}

TEST(Campaign, SnapshotPlusTailEqualsFullReplay) {
  auto store = std::make_shared<MemoryEventStore>();
  auto c = workload::open(store);
  workload::run(*c, 30, 21);
  const Snapshot snap = c->snapshot();
  workload::run(*c, 30, 22);

  const auto path = temp_path("rtc_snapshot.json");
  write_snapshot(path, snap);
  CampaignOptions options;
  options.clock = workload::fixed_clock();
  options.snapshot = read_snapshot(path);
  ASSERT_TRUE(options.snapshot.has_value());
  Campaign restored(workload::small_setup(), store, std::make_shared<EchoBackend>(), std::move(options));
  EXPECT_EQ(restored.state_dump(), c->state_dump());
  std::filesystem::remove(path);
}

TEST(Campaign, PeriodicSnapshotsAreWritten) {
  const auto path = temp_path("rtc_periodic_snapshot.json");
  std::filesystem::remove(path);
  auto store = std::make_shared<MemoryEventStore>();
  CampaignOptions options;
  options.clock = workload::fixed_clock();
  options.snapshot_path = path;
  options.snapshot_every = 10;
  Campaign c(workload::small_setup(), store, std::make_shared<EchoBackend>(), std::move(options));
  workload::run(c, 20, 4);
  const auto snap = read_snapshot(path);
  ASSERT_TRUE(snap.has_value());
  EXPECT_EQ(snap->sequence_number % 10, 0u);
  EXPECT_GT(snap->sequence_number, 0u);

  CampaignOptions resume;
  resume.clock = workload::fixed_clock();
  resume.snapshot = snap;
  Campaign restored(workload::small_setup(), store, std::make_shared<EchoBackend>(), std::move(resume));
  EXPECT_EQ(restored.state_dump(), c.state_dump());
  std::filesystem::remove(path);
}

TEST(Campaign, DanglingAttackerTurnIsAnsweredAfterCrash) {
  auto store = std::make_shared<MemoryEventStore>();
  auto c = medical_campaign(store, false);
  const std::string id = started_dialogue(*c, "rt1", 2);
  auto events = store->read_all();
  ASSERT_EQ(events.back().event_kind, event_kind::turn_appended);
  events.pop_back();  // lose the model reply

  auto crashed = std::make_shared<MemoryEventStore>();
  for (const auto& e : events) crashed->append(e);
  auto resumed = medical_campaign(crashed, false);
  EXPECT_EQ(resumed->dialogue(id).turns.size(), 3u);
  resumed->send_message("rt1", id, "next");
  const Dialogue d = resumed->dialogue(id);
  ASSERT_EQ(d.turns.size(), 6u);
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    EXPECT_EQ(d.turns[i].author, i % 2 == 0 ? Author::attacker : Author::model);
  }
}

TEST(Campaign, KilledProcessLeavesReplayablePrefix) {
  auto reference_store = std::make_shared<MemoryEventStore>();
  auto reference = workload::open(reference_store);
  workload::run(*reference, 400, 77);
  const auto reference_events = reference_store->read_all();
  std::vector<std::string> expected;
  for (const auto& e : reference_events) expected.push_back(event_to_json(e).dump());

  std::size_t interrupted = 0;
  for (int delay_ms : {5, 40, 150}) {
    const auto path = temp_path("rtc_kill_" + std::to_string(delay_ms) + ".jsonl");
    std::filesystem::remove(path);
    const pid_t child = ::fork();
    ASSERT_GE(child, 0);
    if (child == 0) {
      auto store = std::make_shared<FileEventStore>(path, FileEventStore::Durability::flush);
      auto c = workload::open(store);
      workload::run(*c, 400, 77);
      ::_exit(0);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    ::kill(child, SIGKILL);
    int status = 0;
    ::waitpid(child, &status, 0);

    auto reopened = std::make_shared<FileEventStore>(path);
    const auto got = dump_events(*reopened);
    ASSERT_LE(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i], expected[i]) << "event " << i;
    if (got.size() < expected.size()) ++interrupted;

    auto recovered = workload::open(reopened);
    auto oracle = replay_prefix(reference_events, got.size());
    EXPECT_EQ(recovered->state_dump(), oracle->state_dump()) << got.size() << " events survived";

    // The recovered campaign keeps accepting work.
    workload::run(*recovered, 5, 1234);
    EXPECT_GE(reopened->last_sequence(), got.size());
    auto again = workload::open(std::make_shared<FileEventStore>(path));
    EXPECT_EQ(again->state_dump(), recovered->state_dump());
    std::filesystem::remove(path);
  }
  EXPECT_GE(interrupted, 1u) << "no kill landed mid-run";
}

TEST(Campaign, ConcurrentRedTeamersReplayToSameState) {
  auto store = std::make_shared<MemoryEventStore>();
  auto c = workload::open(store);
  const auto roster = c->setup().roster;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < 6; ++t) {
    threads.emplace_back([&, t] {
      const std::string pid = roster[t * 3].participant_id;
      for (int round = 0; round < 5; ++round) {
        InstructionCard card;
        try {
          card = c->issue_instruction(pid);
        } catch (const Error&) {
          return;
        }
        const std::string id = c->start_dialogue(pid, card.instruction_id, "topic").dialogue_id;
        for (int m = 0; m < 3; ++m) c->send_message(pid, id, "m" + std::to_string(m));
        c->close_dialogue(pid, id, PreAnnotation{});
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& d : c->dialogues()) {
    EXPECT_EQ(d.turns.size(), 6u);
    EXPECT_EQ(d.state, DialogueState::AwaitingAnnotation);
  }
  auto replayed = workload::open(store);
  EXPECT_EQ(replayed->state_dump(), c->state_dump());
}

TEST(Campaign, IssuedCardsRespectQuotaAndSplit) {
  auto c = workload::open(std::make_shared<MemoryEventStore>());
  workload::run(*c, 200, 99);
  const CoverageReport cov = c->coverage();
  for (const auto& row : cov.cells) EXPECT_LE(row.counts.completed, c->setup().quota_per_cell);
  for (const auto& s : cov.splits) {
    if (s.under_served) continue;
    const auto& n = s.counts;
    const auto diff = n.in_group > n.out_group ? n.in_group - n.out_group : n.out_group - n.in_group;
    EXPECT_LE(diff, 1u);
  }
}
