#include "rtc_cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "rtc/analytics/reports.hpp"
#include "rtc/datastore.hpp"
#include "rtc/error.hpp"
#include "rtc/service/api.hpp"
#include "rtc/service/campaign.hpp"
#include "rtc/service/config.hpp"
#include "rtc/service/simulate.hpp"
#include "rtc/table.hpp"

namespace rtc::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path config_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("RTC_CONFIG"); env && *env) return env;
  return "rtc.yaml";
}

struct OpenCampaign {
  CampaignConfig config;
  std::shared_ptr<FileEventStore> store;
  std::unique_ptr<Campaign> campaign;
};

OpenCampaign open_campaign(const std::string& config_flag, bool with_backend = true) {
  OpenCampaign oc;
  oc.config = load_campaign_config(config_path(config_flag));
  fs::create_directories(oc.config.data_dir);
  oc.store = std::make_shared<FileEventStore>(oc.config.data_dir / "events.jsonl");
  CampaignOptions options;
  const fs::path snapshot_path = oc.config.data_dir / "snapshot.json";
  options.snapshot = read_snapshot(snapshot_path);
  if (oc.config.snapshot_every > 0) {
    options.snapshot_path = snapshot_path;
    options.snapshot_every = oc.config.snapshot_every;
  }
  std::shared_ptr<const ChatBackend> backend =
      with_backend ? backend_from_config(oc.config) : std::make_unique<EchoBackend>();
  oc.campaign = std::make_unique<Campaign>(setup_from_config(oc.config), oc.store, backend, std::move(options));
  return oc;
}

void emit(std::ostream& out, const TextTable& table, const std::string& format) {
  if (format == "csv") {
    write_csv(out, table);
  } else {
    write_aligned(out, table);
  }
}

std::vector<Dialogue> load_exports(const std::vector<std::string>& inputs) {
  std::vector<Dialogue> all;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "open_failed", "cannot open " + path);
    auto part = import_dialogues(in);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

void write_file(const fs::path& path, const std::string& text, bool force) {
  if (fs::exists(path) && !force) {
    fail(ErrorKind::conflict, "file_exists", path.string() + " exists (use --force to overwrite)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "open_failed", "cannot write " + path.string());
  out << text;
}

struct PointSet {
  std::vector<std::string> ids;
  std::vector<Point2> points;
  std::vector<std::string> datasets;
};

void read_coordinates(const std::string& path, PointSet& set) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "open_failed", "cannot open " + path);
  const auto rows = parse_csv(in);
  if (rows.empty()) fail(ErrorKind::validation, "empty_coordinates", path + " has no header");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const char* needed : {"point_id", "x", "y", "dataset_id"}) {
    if (!col.contains(needed)) {
      fail(ErrorKind::validation, "missing_column", path + " lacks column '" + needed + "'");
    }
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() < rows[0].size()) {
      fail(ErrorKind::validation, "short_row", path + " row " + std::to_string(r + 1) + " is short");
    }
    auto number = [&](const std::string& name) {
      const std::string& text = row[col[name]];
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != text.size() || text.empty()) {
        fail(ErrorKind::validation, "bad_coordinate", path + " row " + std::to_string(r + 1) + ": bad " + name);
      }
      return v;
    };
    set.ids.push_back(row[col["point_id"]]);
    set.points.emplace_back(number("x"), number("y"));
    set.datasets.push_back(row[col["dataset_id"]]);
  }
}

void add_dataset(const std::string& spec, std::size_t downsample_to, std::uint64_t seed, PointSet& set) {
  const auto sep = spec.find('=');
  if (sep == std::string::npos) throw UsageError("--dataset expects MAPPING=DATA, got '" + spec + "'");
  const MappingSpec mapping = parse_mapping_spec(read_text_file(spec.substr(0, sep)));
  ExternalDataset data = import_external(fs::path(spec.substr(sep + 1)), mapping);
  if (downsample_to > 0) data = downsample(data, downsample_to, seed);
  for (const auto& rec : data.records) {
    if (!rec.coordinates) {
      fail(ErrorKind::validation, "missing_coordinates", "record '" + rec.record_id + "' has no coordinates");
    }
    set.ids.push_back(rec.record_id);
    set.points.push_back(*rec.coordinates);
    set.datasets.push_back(data.dataset_id);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Red-team campaign orchestration", "rtc"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_flag;
  app.add_option("-c,--config", config_flag, "Campaign config (default: $RTC_CONFIG, then ./rtc.yaml)");

  // init
  auto* init = app.add_subcommand("init", "Scaffold a campaign directory");
  std::string init_dir = ".";
  bool force = false;
  init->add_option("dir", init_dir, "Target directory");
  init->add_flag("--force", force, "Overwrite existing files");

  // roster
  auto* roster = app.add_subcommand("roster", "Validate and list the roster");
  std::string roster_file;
  std::string roster_format = "text";
  roster->add_option("--file", roster_file, "Roster file (default: from config)");
  roster->add_option("--format", roster_format)->check(CLI::IsMember({"text", "csv"}));

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::optional<std::string> serve_host;
  std::optional<int> serve_port;
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);

  // assign
  auto* assign = app.add_subcommand("assign", "Issue instruction cards in batch");
  std::vector<std::string> assign_ids;
  std::size_t assign_count = 1;
  bool assign_fill = false;
  assign->add_option("-p,--participant", assign_ids, "Participant ids (default: every active red teamer)");
  assign->add_option("-n,--count", assign_count, "Cards per participant")->check(CLI::PositiveNumber);
  assign->add_flag("--allow-out-group-fill", assign_fill);

  // export
  auto* exporter = app.add_subcommand("export", "Stream finalized dialogues as JSONL");
  std::string export_out = "-";
  std::optional<std::string> export_rule;
  bool export_all = false;
  exporter->add_option("-o,--out", export_out);
  exporter->add_option("--rule", export_rule);
  exporter->add_flag("--include-unfinalized", export_all);

  // report
  auto* report = app.add_subcommand("report", "Coverage tables");
  bool report_coverage = false;
  bool report_splits = false;
  std::string report_format = "text";
  report->add_flag("--coverage", report_coverage, "Per-cell counts with evenness summary");
  report->add_flag("--splits", report_splits, "Per-target attacker in/out split");
  report->add_option("--format", report_format)->check(CLI::IsMember({"text", "csv"}));

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Analytics on exports or imported datasets");
  std::vector<std::string> analyze_inputs;
  bool a_alpha = false, a_in_out = false, a_attack = false, a_odds = false, a_interaction = false, a_cluster = false;
  bool a_binarized = false;
  std::string a_metric = "ordinal";
  std::string a_format = "text";
  std::vector<std::string> a_coordinates;
  std::vector<std::string> a_datasets;
  std::size_t a_k = 20;
  std::string a_linkage = "ward";
  std::size_t a_downsample = 0;
  std::uint64_t a_seed = 0;
  std::string a_assignments_out;
  analyze->add_option("inputs", analyze_inputs, "Export JSONL files");
  analyze->add_flag("--alpha", a_alpha, "Krippendorff's alpha");
  analyze->add_option("--metric", a_metric)->check(CLI::IsMember({"nominal", "ordinal", "interval"}));
  analyze->add_flag("--binarized", a_binarized, "Alpha on the binarized scale");
  analyze->add_flag("--in-out", a_in_out, "In-group vs out-group annotation rates");
  analyze->add_flag("--attack-success", a_attack, "Attack success by attacker relation");
  analyze->add_flag("--odds", a_odds, "Odds ratios per targeted group");
  analyze->add_flag("--interaction", a_interaction, "Race x gender nested-model analysis");
  analyze->add_flag("--cluster", a_cluster, "Agglomerative clustering of 2-D projections");
  analyze->add_option("--coordinates", a_coordinates, "CSV with point_id,x,y,dataset_id");
  analyze->add_option("--dataset", a_datasets, "MAPPING=DATA external dataset with coordinates");
  analyze->add_option("-k,--clusters", a_k)->check(CLI::PositiveNumber);
  analyze->add_option("--linkage", a_linkage)->check(CLI::IsMember({"ward", "single", "complete", "average"}));
  analyze->add_option("--downsample", a_downsample, "Per-dataset sample size (0 keeps all)");
  analyze->add_option("--seed", a_seed);
  analyze->add_option("--assignments", a_assignments_out, "Write point_id,dataset_id,cluster here");
  analyze->add_option("--format", a_format)->check(CLI::IsMember({"text", "csv"}));

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run a synthetic campaign end to end");
  SimulationOptions sim;
  std::string sim_export;
  std::string sim_data_dir;
  simulate->add_option("--dialogues", sim.dialogues)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--planted-rate", sim.planted_rate)->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--min-turns", sim.min_turns);
  simulate->add_option("--max-turns", sim.max_turns);
  simulate->add_option("--online", sim.online, "Participants online per assignment round")->check(CLI::PositiveNumber);
  simulate->add_option("--export", sim_export, "Write the JSONL export here ('-' for stdout)");
  simulate->add_option("--data-dir", sim_data_dir, "Persist the event log here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (init->parsed()) {
      const fs::path dir = init_dir;
      fs::create_directories(dir);
      write_file(dir / "rtc.yaml", default_config_yaml(), force);
      write_file(dir / "policy.yaml", default_policy_yaml(), force);
      write_file(dir / "roster.yaml", default_roster_yaml(), force);
      write_file(dir / "topics.txt", default_topics_text(), force);
      fs::create_directories(dir / "data");
      // Round-trip the scaffold so a broken template can never ship.
      setup_from_config(load_campaign_config(dir / "rtc.yaml"));
      out << "initialised campaign in " << dir.string() << "\n";
      return 0;
    }

    if (roster->parsed()) {
      std::vector<ParticipantProfile> people;
      std::optional<CampaignConfig> config;
      if (!roster_file.empty()) {
        people = load_roster(read_text_file(roster_file));
      } else {
        config = load_campaign_config(config_path(config_flag));
        people = load_roster(read_text_file(config->roster_path.string()));
      }
      TextTable table{{"participant_id", "active", "roles", "expertise", "demographics"}, {}};
      for (const auto& p : people) {
        std::string roles, expertise, demo;
        for (Role r : p.roles_allowed) roles += (roles.empty() ? "" : " ") + std::string(to_string(r));
        for (Expertise e : p.expertise) expertise += (expertise.empty() ? "" : " ") + std::string(to_string(e));
        for (const auto& [axis, labels] : p.demographics) {
          for (const auto& l : labels) demo += (demo.empty() ? "" : " ") + axis + "=" + l;
        }
        table.add_row({p.participant_id, p.active ? "yes" : "no", roles, expertise, demo});
      }
      emit(out, table, roster_format);
      if (config) {
        const auto setup = setup_from_config(*config);
        const ParameterSpace space(std::vector<Rule>(setup.policy.rules().begin(), setup.policy.rules().end()),
                                   setup.use_cases, enumerate_targets(setup.axes, setup.pairing),
                                   setup.topic_source, setup.topics);
        QuotaState quota(space, setup.quota_per_cell);
        mark_under_served_targets(space, quota, people);
        for (const auto& key : quota.under_served()) err << "under-served target: " << key << "\n";
      }
      return 0;
    }

    if (serve->parsed()) {
      auto oc = open_campaign(config_flag);
      const std::string host = serve_host.value_or(oc.config.host);
      const int port = serve_port.value_or(oc.config.port);
      const std::string admin = admin_token_from_env(oc.config.admin_token_env_var_name);
      if (admin.empty()) err << "warning: $" << oc.config.admin_token_env_var_name << " unset; admin routes disabled\n";
      ApiRouter router(*oc.campaign, admin);
      ApiServer server(router);
      out << "listening on " << host << ":" << port << std::endl;
      server.listen(host, port);
      return 0;
    }

    if (assign->parsed()) {
      auto oc = open_campaign(config_flag, false);
      std::vector<std::string> ids = assign_ids;
      if (ids.empty()) {
        for (const auto& p : oc.campaign->setup().roster) {
          if (p.active && p.can(Role::red_teamer)) ids.push_back(p.participant_id);
        }
      }
      IssueOptions issue = oc.campaign->setup().issue;
      issue.allow_out_group_fill = issue.allow_out_group_fill || assign_fill;
      std::size_t failures = 0;
      for (const auto& id : ids) {
        for (std::size_t k = 0; k < assign_count; ++k) {
          try {
            out << card_to_json(oc.campaign->issue_instruction(id, issue)).dump() << "\n";
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::eligibility && e.kind() != ErrorKind::state) throw;
            err << id << ": " << e.code() << ": " << e.what() << "\n";
            ++failures;
            break;
          }
        }
      }
      return failures == 0 ? 0 : 1;
    }

    if (exporter->parsed()) {
      auto oc = open_campaign(config_flag, false);
      ExportFilter filter;
      filter.finalized_only = !export_all;
      filter.rule_id = export_rule;
      if (export_out == "-") {
        oc.campaign->export_jsonl(out, filter);
      } else {
        std::ofstream file(export_out, std::ios::binary | std::ios::trunc);
        if (!file) fail(ErrorKind::io, "open_failed", "cannot write " + export_out);
        oc.campaign->export_jsonl(file, filter);
      }
      return 0;
    }

    if (report->parsed()) {
      auto oc = open_campaign(config_flag, false);
      const CoverageReport cov = oc.campaign->coverage();
      if (!report_splits || report_coverage) {
        if (report_format == "csv") {
          write_coverage_csv(out, cov);
        } else {
          write_coverage_text(out, cov);
        }
      }
      if (report_splits) write_split_csv(out, cov);
      return 0;
    }

    if (analyze->parsed()) {
      const bool any = a_alpha || a_in_out || a_attack || a_odds || a_interaction || a_cluster;
      const bool run_all = !any;
      int status = 0;
      std::vector<Dialogue> dialogues;
      if (run_all || a_alpha || a_in_out || a_attack || a_odds || a_interaction) {
        if (analyze_inputs.empty() && !(a_cluster && !a_alpha && !a_in_out && !a_attack && !a_odds && !a_interaction)) {
          throw UsageError("analyze needs at least one export file");
        }
        dialogues = load_exports(analyze_inputs);
      }
      auto section = [&](const char* name, bool wanted, auto&& body) {
        if (!wanted && !run_all) return;
        if (run_all) out << "# " << name << "\n";
        try {
          body();
        } catch (const Error& e) {
          err << name << ": " << e.code() << ": " << e.what() << "\n";
          status = 1;
        }
      };
      const ConsensusRule rule = ConsensusRule::max;
      section("alpha", a_alpha, [&] {
        std::vector<ReliabilityReport> reports;
        if (run_all) {
          for (auto m : {AlphaMetric::nominal, AlphaMetric::ordinal}) {
            for (auto s : {RatingScale::full_likert, RatingScale::binarized}) {
              reports.push_back(dialogue_alpha(dialogues, m, s));
            }
          }
        } else {
          reports.push_back(dialogue_alpha(dialogues, parse_alpha_metric(a_metric),
                                           a_binarized ? RatingScale::binarized : RatingScale::full_likert));
        }
        emit(out, reliability_table(reports), a_format);
      });
      section("in-out", a_in_out, [&] {
        emit(out, in_out_table(in_out_group_report(annotation_observations(dialogues))), a_format);
      });
      section("attack-success", a_attack, [&] {
        const auto rows = attack_success_report(attack_observations(dialogues, rule));
        emit(out, attack_success_table(rows), a_format);
      });
      section("odds", a_odds, [&] {
        const auto rows = group_odds_ratios(dialogues, rule);
        emit(out, group_odds_table(rows), a_format);
      });
      section("interaction", a_interaction, [&] {
        InteractionOptions options;
        const auto report = interaction_analysis(interaction_observations(dialogues, options, rule), options);
        emit(out, interaction_summary_table(report), a_format);
        out << "\n";
        emit(out, interaction_terms_table(report), a_format);
      });
      if (a_cluster) {
        section("cluster", true, [&] {
          PointSet set;
          for (const auto& path : a_coordinates) read_coordinates(path, set);
          for (const auto& spec : a_datasets) add_dataset(spec, a_downsample, a_seed, set);
          if (set.points.empty()) throw UsageError("--cluster needs --coordinates or --dataset input");
          const auto assignment = agglomerative_cluster(set.points, a_k, parse_linkage(a_linkage));
          emit(out, contingency_table(cluster_contingency(assignment, set.datasets)), a_format);
          if (!a_assignments_out.empty()) {
            TextTable table{{"point_id", "dataset_id", "cluster"}, {}};
            for (std::size_t i = 0; i < set.ids.size(); ++i) {
              table.add_row({set.ids[i], set.datasets[i], std::to_string(assignment.labels[i])});
            }
            std::ofstream file(a_assignments_out, std::ios::binary | std::ios::trunc);
            if (!file) fail(ErrorKind::io, "open_failed", "cannot write " + a_assignments_out);
            write_csv(file, table);
          }
        });
      }
      return status;
    }

    if (simulate->parsed()) {
      if (!sim_data_dir.empty()) {
        fs::create_directories(sim_data_dir);
        const fs::path log = fs::path(sim_data_dir) / "events.jsonl";
        if (fs::exists(log) && fs::file_size(log) > 0) {
          fail(ErrorKind::conflict, "log_exists", log.string() + " already holds events");
        }
        sim.store = std::make_shared<FileEventStore>(log, FileEventStore::Durability::flush);
      }
      const SimulationResult result = run_simulation(sim);
      std::ostream& summary = sim_export == "-" ? err : out;
      if (!sim_export.empty()) {
        ExportFilter filter;
        if (sim_export == "-") {
          result.campaign->export_jsonl(out, filter);
        } else {
          std::ofstream file(sim_export, std::ios::binary | std::ios::trunc);
          if (!file) fail(ErrorKind::io, "open_failed", "cannot write " + sim_export);
          result.campaign->export_jsonl(file, filter);
        }
      }
      const auto& iv = result.invariants;
      summary << "dialogues: " << iv.dialogues << "\n"
              << "never-twice violations: " << iv.never_twice_violations << "\n"
              << "arbitration mismatches: " << iv.arbitration_mismatches << "\n"
              << "split violations: " << iv.split_violations << "\n"
              << "not finalized: " << iv.not_finalized << "\n"
              << "arbitrated: " << iv.arbitrated << "\n"
              << "in-group annotation share: "
              << format_fixed(iv.classified_annotations
                                  ? double(iv.in_group_annotations) / double(iv.classified_annotations)
                                  : 0.0,
                              3)
              << "\n"
              << "violative dialogues: " << result.violative_dialogues << "\n"
              << "headline break rate: " << format_fixed(result.observed_break_rate(), 4) << " (expected "
              << format_fixed(result.expected_break_rate, 4) << ", sigma " << format_fixed(result.break_rate_sigma, 4)
              << ")\n";
      for (const auto& d : iv.details) summary << "  " << d << "\n";
      return iv.ok() ? 0 : 1;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rtc::cli
