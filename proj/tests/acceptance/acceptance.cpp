// One line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "oracles/alpha_oracle.hpp"
#include "oracles/cluster_oracle.hpp"
#include "oracles/generators.hpp"
#include "rtc/analytics/cluster.hpp"
#include "rtc/analytics/hypothesis.hpp"
#include "rtc/analytics/logistic.hpp"
#include "rtc/analytics/reliability.hpp"
#include "rtc/analytics/reports.hpp"
#include "rtc/datastore.hpp"
#include "rtc/error.hpp"
#include "rtc/service/campaign.hpp"
#include "rtc/service/simulate.hpp"
#include "support/workload.hpp"

using namespace rtc;

namespace {

// Tolerances and thresholds.
constexpr double kPipelineSeconds = 60.0;
constexpr std::size_t kPipelineDialogues = 500;
constexpr std::uint64_t kPipelineSeed = 7;

constexpr std::uint64_t kCoverageQuota = 4;

constexpr double kAlphaTolerance = 1e-9;
constexpr std::size_t kAlphaInstances = 100;
constexpr std::size_t kRandomAlphaItems = 1000;
constexpr double kRandomAlphaBound = 0.05;

constexpr std::uint64_t kArmSize = 500;
constexpr double kInGroupRate = 0.50;
constexpr double kOutGroupRate = 0.41;
constexpr double kSignificance = 0.01;
constexpr std::size_t kAntisymmetryInstances = 1000;

constexpr std::size_t kInteractionN = 2000;
constexpr std::size_t kInteractionSeeds = 100;
constexpr std::size_t kMinDetections = 95;
constexpr double kNullLevel = 0.05;
constexpr std::size_t kMaxNullRejections = 10;
constexpr double kGradientRelTolerance = 1e-4;
constexpr double kInterceptTolerance = 1e-6;

constexpr std::size_t kBlobCount = 20;
constexpr std::size_t kBlobPoints = 4000;
constexpr double kClusterSeconds = 30.0;
constexpr std::size_t kOracleMaxN = 200;

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void note(const std::string& text) {
    if (!detail.empty()) detail += "; ";
    detail += text;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Verdict pipeline_invariants() {
  Verdict v;
  SimulationOptions options;
  options.dialogues = kPipelineDialogues;
  options.seed = kPipelineSeed;
  const auto start = std::chrono::steady_clock::now();
  const SimulationResult r = run_simulation(options);
  const double elapsed = seconds_since(start);
  const auto& iv = r.invariants;
  v.check(iv.dialogues == kPipelineDialogues, "dialogue count " + std::to_string(iv.dialogues));
  v.check(iv.never_twice_violations == 0, "never-twice " + std::to_string(iv.never_twice_violations));
  v.check(iv.arbitration_mismatches == 0, "arbitration " + std::to_string(iv.arbitration_mismatches));
  v.check(iv.split_violations == 0, "split " + std::to_string(iv.split_violations));
  v.check(iv.not_finalized == 0, "not finalized " + std::to_string(iv.not_finalized));
  v.check(elapsed < kPipelineSeconds, "runtime " + fmt(elapsed) + "s");
  v.note(std::to_string(iv.dialogues) + " dialogues, " + std::to_string(iv.arbitrated) + " arbitrated, " +
         fmt(elapsed) + "s");
  return v;
}

Verdict coverage_evenness() {
  Verdict v;
  CampaignSetup setup(load_policy(R"(schema_version: 1
policy_id: coverage
rules:
  - rule_id: hate_speech
    text: Content that promotes hatred against a protected group
    policy_area: dangerous_illegal
    demographic_targeting: true
  - rule_id: stereotypes
    text: Content that promotes discriminatory stereotypes
    policy_area: dangerous_illegal
    demographic_targeting: true
)"));
  setup.roster = synthetic_roster({.per_combination = 4, .undisclosed = 0});
  setup.use_cases = {"information search", "creative writing"};
  setup.quota_per_cell = kCoverageQuota;
  setup.auto_assign = false;
  setup.seed = 2;
  CampaignOptions options;
  options.clock = workload::fixed_clock();
  Campaign campaign(std::move(setup), std::make_shared<MemoryEventStore>(), std::make_shared<EchoBackend>(),
                    std::move(options));

  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& p : campaign.setup().roster) {
      InstructionCard card;
      try {
        card = campaign.issue_instruction(p.participant_id);
      } catch (const Error&) {
        continue;
      }
      const auto id = campaign.start_dialogue(p.participant_id, card.instruction_id, "topic").dialogue_id;
      campaign.send_message(p.participant_id, id, "hello");
      campaign.close_dialogue(p.participant_id, id, PreAnnotation{});
      progress = true;
    }
  }
  const CoverageReport cov = campaign.coverage();
  const std::size_t expected_cells = 2 * 3 * 2 * 15;
  v.check(cov.cells.size() == expected_cells, "cell count " + std::to_string(cov.cells.size()));
  std::size_t exact = 0;
  for (const auto& row : cov.cells) exact += row.counts.completed == kCoverageQuota;
  v.check(exact == cov.cells.size(), std::to_string(exact) + " cells at quota");
  v.check(cov.max_min_ratio && std::fabs(*cov.max_min_ratio - 1.0) == 0.0, "max/min ratio");
  v.note(std::to_string(cov.cells.size()) + " cells, min " + std::to_string(cov.min_completed) + ", max " +
         std::to_string(cov.max_completed) + ", ratio " + (cov.max_min_ratio ? fmt(*cov.max_min_ratio) : "n/a"));
  return v;
}

Verdict alpha_reliability() {
  Verdict v;
  Rng rng(2024);
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t t = 0; t < kAlphaInstances; ++t) {
    std::vector<std::vector<int>> items(2 + uniform_index(rng, 14));
    for (auto& item : items) {
      const std::size_t raters = 1 + uniform_index(rng, 4);
      for (std::size_t r = 0; r < raters; ++r) item.push_back(1 + int(uniform_index(rng, 4)));
    }
    for (auto [metric, name] : {std::pair{AlphaMetric::nominal, "nominal"}, std::pair{AlphaMetric::ordinal, "ordinal"}}) {
      const double expected = oracle::alpha(items, name);
      double got = 0.0;
      try {
        got = krippendorff_alpha(items, metric).alpha;
      } catch (const Error&) {
        got = std::nan("");
      }
      if (std::isnan(expected) && std::isnan(got)) continue;
      ++compared;
      const double err = std::fabs(expected - got);
      worst = std::max(worst, std::isnan(err) ? INFINITY : err);
    }
  }
  v.check(worst <= kAlphaTolerance, "oracle max error " + fmt(worst));
  v.check(compared >= kAlphaInstances, "only " + std::to_string(compared) + " comparable instances");

  std::vector<std::vector<int>> perfect;
  for (int i = 0; i < 50; ++i) perfect.push_back({1 + i % 4, 1 + i % 4, 1 + i % 4});
  const double one = krippendorff_alpha(perfect, AlphaMetric::ordinal).alpha;
  v.check(one == 1.0, "perfect agreement alpha " + fmt(one));

  std::vector<std::vector<int>> noise(kRandomAlphaItems);
  for (auto& item : noise) item = {1 + int(uniform_index(rng, 4)), 1 + int(uniform_index(rng, 4))};
  const double random_nominal = krippendorff_alpha(noise, AlphaMetric::nominal).alpha;
  const double random_ordinal = krippendorff_alpha(noise, AlphaMetric::ordinal).alpha;
  v.check(std::fabs(random_nominal) < kRandomAlphaBound, "random nominal alpha " + fmt(random_nominal));
  v.check(std::fabs(random_ordinal) < kRandomAlphaBound, "random ordinal alpha " + fmt(random_ordinal));
  v.note(std::to_string(compared) + " oracle comparisons, max error " + fmt(worst) + ", random alpha " + fmt(random_nominal) + "/" + fmt(random_ordinal));
  return v;
}

Verdict proportion_contrast() {
  Verdict v;
  const auto in = static_cast<std::uint64_t>(std::llround(kInGroupRate * kArmSize));
  const auto out = static_cast<std::uint64_t>(std::llround(kOutGroupRate * kArmSize));
  const auto table = two_proportion_test(in, kArmSize, out, kArmSize);
  v.check(table.p_value < kSignificance, "paper-rate p " + fmt(table.p_value));
  const auto equal = two_proportion_test(in, kArmSize, in, kArmSize);
  v.check(equal.p_value == 1.0, "equal-rate p " + fmt(equal.p_value));

  Rng rng(4);
  std::size_t broken = 0;
  for (std::size_t i = 0; i < kAntisymmetryInstances; ++i) {
    const std::uint64_t n1 = 1 + uniform_index(rng, 1000), n2 = 1 + uniform_index(rng, 1000);
    const std::uint64_t s1 = uniform_index(rng, n1 + 1), s2 = uniform_index(rng, n2 + 1);
    const auto a = two_proportion_test(s1, n1, s2, n2);
    const auto b = two_proportion_test(s2, n2, s1, n1);
    if (a.z_statistic != -b.z_statistic || a.p_value != b.p_value) ++broken;
  }
  v.check(broken == 0, std::to_string(broken) + " antisymmetry breaks");
  v.note("z " + fmt(table.z_statistic) + ", p " + fmt(table.p_value) + ", antisymmetric on " +
         std::to_string(kAntisymmetryInstances));
  return v;
}

Verdict nested_models() {
  Verdict v;
  gen::InteractionGenerator planted;
  gen::InteractionGenerator null_model;
  null_model.interaction = 0.0;
  std::size_t detected = 0, false_alarms = 0, failures = 0;
  for (std::size_t seed = 0; seed < kInteractionSeeds; ++seed) {
    const auto a = interaction_analysis(gen::interaction_sample(planted, kInteractionN, 10'000 + seed));
    const auto b = interaction_analysis(gen::interaction_sample(null_model, kInteractionN, 20'000 + seed));
    failures += !a.rules[0].lr + !b.rules[0].lr;
    detected += a.rules[0].lr && a.rules[0].lr->p_value < kSignificance;
    false_alarms += b.rules[0].lr && b.rules[0].lr->p_value < kNullLevel;
  }
  v.check(detected >= kMinDetections, "planted detections " + std::to_string(detected));
  v.check(false_alarms <= kMaxNullRejections, "null rejections " + std::to_string(false_alarms));
  v.check(failures == 0, std::to_string(failures) + " fits failed");

  // Gradient against central differences on random problems.
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 120, p = 4;
    DesignMatrix design;
    design.terms = {"(intercept)", "x1", "x2", "x3"};
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row{1.0};
      for (std::size_t j = 1; j < p; ++j) row.push_back(gen::normal(rng));
      design.add_row(row);
      y.push_back(bernoulli(rng, 0.4) ? 1 : 0);
    }
    std::vector<double> beta(p);
    for (auto& b : beta) b = 0.5 * gen::normal(rng);
    const auto g = logistic_gradient(design, y, beta);
    std::vector<double> fd(p);
    double gmax = 0.0, diff = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double h = 1e-6;
      auto up = beta, down = beta;
      up[j] += h;
      down[j] -= h;
      fd[j] = (logistic_log_likelihood(design, y, up) - logistic_log_likelihood(design, y, down)) / (2 * h);
      gmax = std::max(gmax, std::fabs(g[j]));
      diff = std::max(diff, std::fabs(fd[j] - g[j]));
    }
    worst = std::max(worst, diff / std::max(1.0, gmax));
  }
  v.check(worst < kGradientRelTolerance, "gradient relative error " + fmt(worst));

  DesignMatrix intercept;
  intercept.terms = {"(intercept)"};
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    const double one = 1.0;
    intercept.add_row(std::span<const double>(&one, 1));
    y.push_back(i < 75 ? 1 : 0);
  }
  const double b0 = fit_logistic(intercept, y).coefficients[0];
  v.check(std::fabs(b0 - std::log(3.0)) < kInterceptTolerance, "intercept " + fmt(b0, 12));
  v.note(std::to_string(detected) + "/" + std::to_string(kInteractionSeeds) + " planted detected, " +
         std::to_string(false_alarms) + "/" + std::to_string(kInteractionSeeds) + " null rejections, gradient " +
         fmt(worst) + ", intercept error " + fmt(std::fabs(b0 - std::log(3.0))));
  return v;
}

Verdict clustering() {
  Verdict v;
  const auto blobs = gen::blobs(kBlobCount, kBlobPoints, 20.0, 1.0, 5);
  const auto start = std::chrono::steady_clock::now();
  const auto result = agglomerative_cluster(blobs.points, kBlobCount, Linkage::ward);
  const double elapsed = seconds_since(start);
  v.check(result.labels == canonical_labels(blobs.truth), "blob recovery");
  v.check(elapsed < kClusterSeconds, "runtime " + fmt(elapsed) + "s");

  Rng rng(8);
  std::size_t mismatches = 0, instances = 0;
  for (std::size_t n : {2, 3, 5, 10, 25, 50, 100, 150, 200}) {
    if (n > kOracleMaxN) continue;
    std::vector<Point2> pts;
    for (std::size_t i = 0; i < n; ++i) pts.emplace_back(gen::normal(rng) * 5, gen::normal(rng) * 5);
    for (auto [linkage, name] : {std::pair{Linkage::ward, "ward"}, std::pair{Linkage::single, "single"},
                                 std::pair{Linkage::complete, "complete"}, std::pair{Linkage::average, "average"}}) {
      const std::size_t k = 1 + uniform_index(rng, n);
      const auto got = agglomerative_cluster(pts, k, linkage);
      const auto want = oracle::naive_cluster(pts, k, name);
      bool same = got.labels == want.labels && got.merge_history.size() == want.heights.size();
      for (std::size_t i = 0; same && i < want.heights.size(); ++i) {
        same = std::fabs(got.merge_history[i].height - want.heights[i]) <= 1e-9 * std::max(1.0, want.heights[i]);
      }
      mismatches += !same;
      ++instances;
    }
  }
  v.check(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");

  std::vector<std::string> datasets;
  for (std::size_t i = 0; i < kBlobPoints; ++i) datasets.push_back(i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c"));
  const auto table = cluster_contingency(result, datasets);
  std::uint64_t col_sum = 0, row_sum = 0;
  for (auto c : table.column_totals) col_sum += c;
  for (auto r : table.row_totals) row_sum += r;
  v.check(table.column_totals == std::vector<std::uint64_t>{1334, 1333, 1333}, "column totals");
  v.check(col_sum == kBlobPoints && row_sum == kBlobPoints && table.grand_total == kBlobPoints, "grand totals");
  v.note("n " + std::to_string(kBlobPoints) + " in " + fmt(elapsed) + "s, " + std::to_string(instances) +
         " oracle instances");
  return v;
}

Verdict persistence() {
  Verdict v;
  auto reference_store = std::make_shared<MemoryEventStore>();
  auto reference = workload::open(reference_store);
  workload::run(*reference, 400, 77);
  const auto events = reference_store->read_all();

  std::size_t interrupted = 0, mismatched = 0;
  for (int delay_ms : {5, 30, 80, 200}) {
    const auto path = std::filesystem::temp_directory_path() /
                      ("rtc_acceptance_kill_" + std::to_string(::getpid()) + "_" + std::to_string(delay_ms));
    std::filesystem::remove(path);
    const pid_t child = ::fork();
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
    const auto survived = reopened->read_all();
    bool prefix = survived.size() <= events.size();
    for (std::size_t i = 0; prefix && i < survived.size(); ++i) {
      prefix = event_to_json(survived[i]).dump() == event_to_json(events[i]).dump();
    }
    auto oracle_store = std::make_shared<MemoryEventStore>();
    for (std::size_t i = 0; i < survived.size(); ++i) oracle_store->append(events[i]);
    const bool identical = workload::open(reopened)->state_dump() == workload::open(oracle_store)->state_dump();
    mismatched += !(prefix && identical);
    interrupted += survived.size() < events.size();
    std::filesystem::remove(path);
  }
  v.check(mismatched == 0, std::to_string(mismatched) + " kill/replay mismatches");
  v.check(interrupted > 0, "no kill interrupted the writer");

  SimulationOptions options;
  options.dialogues = 120;
  options.seed = 3;
  const auto sim = run_simulation(options);
  std::ostringstream first;
  sim.campaign->export_jsonl(first, ExportFilter{});
  std::istringstream in(first.str());
  const auto imported = import_dialogues(in);
  std::ostringstream second;
  export_dialogues(second, imported, ExportFilter{}, sim.campaign->setup().workflow.consensus);
  v.check(!first.str().empty() && first.str() == second.str(), "export/import/export fixed point");
  v.note(std::to_string(interrupted) + "/4 kills mid-run, " + std::to_string(imported.size()) +
         " dialogues round-tripped");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"pipeline invariants (simulate 500, seed 7)", pipeline_invariants},
      {"coverage evenness at q=4", coverage_evenness},
      {"Krippendorff alpha", alpha_reliability},
      {"two-proportion contrast", proportion_contrast},
      {"nested logistic models", nested_models},
      {"agglomerative clustering", clustering},
      {"persistence", persistence},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += !v.pass;
    std::cout << "criterion " << (i + 1) << " " << (v.pass ? "PASS" : "FAIL") << ": " << criteria[i].first << " ("
              << v.detail << ")" << std::endl;
  }
  return failures;
}
