#include "rtc/analytics/reports.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rtc/error.hpp"

namespace rtc {

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr std::string_view kIntercept = "(intercept)";

std::string p_text(const std::optional<ProportionTestResult>& test) {
  return test ? format_fixed(test->p_value, 4) : "";
}

std::string rate_text(std::uint64_t k, std::uint64_t n) {
  return n == 0 ? "" : format_fixed(static_cast<double>(k) / static_cast<double>(n), 4);
}

bool is_classified(GroupRelation r) { return r == GroupRelation::in_group || r == GroupRelation::out_group; }

}  // namespace

std::vector<std::vector<int>> rating_items(std::span<const Dialogue> dialogues) {
  std::vector<std::vector<int>> items;
  for (const auto& d : dialogues) {
    if (d.state != DialogueState::Finalized) continue;
    std::vector<int> ratings;
    for (const auto& a : d.annotations) ratings.push_back(a.rating.value());
    items.push_back(std::move(ratings));
  }
  return items;
}

ReliabilityReport dialogue_alpha(std::span<const Dialogue> dialogues, AlphaMetric metric, RatingScale scale) {
  return krippendorff_alpha(rating_items(dialogues), metric, scale);
}

std::vector<InOutObservation> annotation_observations(std::span<const Dialogue> dialogues) {
  std::vector<InOutObservation> out;
  for (const auto& d : dialogues) {
    if (d.state != DialogueState::Finalized || !d.instruction.target) continue;
    for (const auto& a : d.annotations) {
      out.push_back({d.instruction.rule_id, a.relation, binarize_rating(a.rating)});
    }
  }
  return out;
}

InOutReport in_out_group_report(std::span<const InOutObservation> observations) {
  InOutReport report;
  std::map<std::string, InOutRow> per_rule;
  InOutRow pooled;
  pooled.rule_id = std::string(kPooledRow);
  for (const auto& o : observations) {
    if (!is_classified(o.relation)) {
      ++report.excluded;
      continue;
    }
    auto& row = per_rule[o.rule_id];
    row.rule_id = o.rule_id;
    for (InOutRow* r : {&row, &pooled}) {
      if (o.relation == GroupRelation::in_group) {
        ++r->in_n;
        r->in_broken += o.broken ? 1 : 0;
      } else {
        ++r->out_n;
        r->out_broken += o.broken ? 1 : 0;
      }
    }
  }
  if (pooled.in_n + pooled.out_n == 0) {
    fail(ErrorKind::validation, "no_classifiable_annotations", "no annotation has an in- or out-group relation");
  }
  if (pooled.in_n == 0 || pooled.out_n == 0) {
    fail(ErrorKind::validation, "empty_stratum",
         std::string("the pooled ") + (pooled.in_n == 0 ? "in-group" : "out-group") + " arm has no annotations");
  }
  auto finish = [](InOutRow& row) {
    if (row.in_n == 0) row.flag = "empty in-group arm";
    else if (row.out_n == 0) row.flag = "empty out-group arm";
    else row.test = two_proportion_test(row.in_broken, row.in_n, row.out_broken, row.out_n);
  };
  for (auto& [id, row] : per_rule) {
    finish(row);
    report.rows.push_back(row);
  }
  finish(pooled);
  report.rows.push_back(pooled);
  return report;
}

TextTable in_out_table(const InOutReport& report) {
  TextTable t;
  t.header = {"Rule", "Out-group", "In-group", "P-value", "n_out", "n_in", "flag"};
  for (const auto& r : report.rows) {
    t.add_row({r.rule_id, rate_text(r.out_broken, r.out_n), rate_text(r.in_broken, r.in_n), p_text(r.test),
               std::to_string(r.out_n), std::to_string(r.in_n), r.flag});
  }
  return t;
}

std::vector<AttackObservation> attack_observations(std::span<const Dialogue> dialogues, ConsensusRule rule) {
  std::vector<AttackObservation> out;
  for (const auto& d : dialogues) {
    if (d.state != DialogueState::Finalized || !d.instruction.target) continue;
    const bool targeted = final_verdict(d, rule).binarized;
    const bool other = d.pre_annotation && !d.pre_annotation->other_rules_broken.empty();
    out.push_back({d.instruction.rule_id, d.instruction.attacker_group_relation, targeted, targeted || other});
  }
  return out;
}

std::vector<AttackSuccessRow> attack_success_report(std::span<const AttackObservation> observations) {
  AttackSuccessRow any;
  any.outcome = "Both";
  AttackSuccessRow targeted;
  targeted.outcome = "Targeted";
  for (const auto& o : observations) {
    if (!is_classified(o.attacker_relation)) continue;
    const bool in = o.attacker_relation == GroupRelation::in_group;
    for (auto [row, success] : {std::pair{&any, o.any_break}, std::pair{&targeted, o.targeted_break}}) {
      if (in) {
        ++row->in_n;
        row->in_success += success ? 1 : 0;
      } else {
        ++row->out_n;
        row->out_success += success ? 1 : 0;
      }
    }
  }
  std::vector<AttackSuccessRow> rows{any, targeted};
  for (auto& r : rows) {
    if (r.in_n == 0) r.flag = "empty in-group arm";
    else if (r.out_n == 0) r.flag = "empty out-group arm";
    else r.test = two_proportion_test(r.in_success, r.in_n, r.out_success, r.out_n);
  }
  return rows;
}

TextTable attack_success_table(std::span<const AttackSuccessRow> rows) {
  TextTable t;
  t.header = {"Rule", "In-group", "Out-group", "P-value", "n_in", "n_out", "flag"};
  for (const auto& r : rows) {
    t.add_row({r.outcome, rate_text(r.in_success, r.in_n), rate_text(r.out_success, r.out_n), p_text(r.test),
               std::to_string(r.in_n), std::to_string(r.out_n), r.flag});
  }
  return t;
}

std::vector<GroupOddsRow> group_odds_ratios(std::span<const Dialogue> dialogues, ConsensusRule rule) {
  struct Outcome {
    std::set<TargetComponent> components;
    bool success;
  };
  std::vector<Outcome> outcomes;
  std::set<TargetComponent> all;
  for (const auto& d : dialogues) {
    if (d.state != DialogueState::Finalized || !d.instruction.target) continue;
    Outcome o{{}, final_verdict(d, rule).binarized};
    for (const auto& c : d.instruction.target->components()) {
      o.components.insert(c);
      all.insert(c);
    }
    outcomes.push_back(std::move(o));
  }
  std::vector<GroupOddsRow> rows;
  for (const auto& c : all) {
    std::uint64_t a = 0, b = 0, cc = 0, dd = 0;
    for (const auto& o : outcomes) {
      const bool has = o.components.contains(c);
      if (has) (o.success ? a : b) += 1;
      else (o.success ? cc : dd) += 1;
    }
    rows.push_back({c.axis, c.label, odds_ratio(a, b, cc, dd)});
  }
  return rows;
}

TextTable group_odds_table(std::span<const GroupOddsRow> rows) {
  TextTable t;
  t.header = {"axis", "label", "odds_ratio", "ci_low", "ci_high", "a", "b", "c", "d", "corrected", "undefined"};
  for (const auto& r : rows) {
    const auto& x = r.result;
    t.add_row({r.axis, r.label, format_fixed(x.or_value, 4), format_fixed(x.ci_low, 4), format_fixed(x.ci_high, 4),
               std::to_string(x.table[0]), std::to_string(x.table[1]), std::to_string(x.table[2]),
               std::to_string(x.table[3]), x.corrected ? "yes" : "no", x.undefined ? "yes" : "no"});
  }
  return t;
}

std::vector<InteractionObservation> interaction_observations(std::span<const Dialogue> dialogues,
                                                             const InteractionOptions& options,
                                                             ConsensusRule rule) {
  std::vector<InteractionObservation> out;
  for (const auto& d : dialogues) {
    if (d.state != DialogueState::Finalized || !d.instruction.target) continue;
    std::string first, second;
    for (const auto& c : d.instruction.target->components()) {
      if (c.axis == options.first_axis) first = c.label;
      if (c.axis == options.second_axis) second = c.label;
    }
    if (first.empty() || second.empty()) continue;
    out.push_back({d.instruction.rule_id, first, second, final_verdict(d, rule).binarized});
  }
  return out;
}

namespace {

struct Coding {
  std::vector<std::string> first_labels;   // sorted; [0] is the reference
  std::vector<std::string> second_labels;
};

Coding coding_of(std::span<const InteractionObservation> observations) {
  std::set<std::string> f, s;
  for (const auto& o : observations) {
    f.insert(o.first_label);
    s.insert(o.second_label);
  }
  return {{f.begin(), f.end()}, {s.begin(), s.end()}};
}

}  // namespace

DesignMatrix interaction_design(std::span<const InteractionObservation> observations, bool with_interaction,
                                const InteractionOptions& names, std::vector<std::string>* omitted_terms) {
  const Coding coding = coding_of(observations);
  std::map<std::pair<std::string, std::string>, std::size_t> cell_n;
  for (const auto& o : observations) ++cell_n[{o.first_label, o.second_label}];

  DesignMatrix x;
  x.terms.emplace_back(kIntercept);
  for (std::size_t i = 1; i < coding.first_labels.size(); ++i) {
    x.terms.push_back(names.first_axis + "[T." + coding.first_labels[i] + "]");
  }
  for (std::size_t j = 1; j < coding.second_labels.size(); ++j) {
    x.terms.push_back(names.second_axis + "[T." + coding.second_labels[j] + "]");
  }
  std::vector<std::pair<std::size_t, std::size_t>> interactions;
  if (with_interaction) {
    for (std::size_t i = 1; i < coding.first_labels.size(); ++i) {
      for (std::size_t j = 1; j < coding.second_labels.size(); ++j) {
        const std::string term = names.first_axis + "[T." + coding.first_labels[i] + "]:" + names.second_axis +
                                 "[T." + coding.second_labels[j] + "]";
        if (cell_n.contains({coding.first_labels[i], coding.second_labels[j]})) {
          x.terms.push_back(term);
          interactions.emplace_back(i, j);
        } else if (omitted_terms) {
          omitted_terms->push_back(term);
        }
      }
    }
  }

  std::vector<double> row(x.terms.size());
  for (const auto& o : observations) {
    std::fill(row.begin(), row.end(), 0.0);
    row[0] = 1.0;
    const auto fi = static_cast<std::size_t>(
        std::lower_bound(coding.first_labels.begin(), coding.first_labels.end(), o.first_label) -
        coding.first_labels.begin());
    const auto si = static_cast<std::size_t>(
        std::lower_bound(coding.second_labels.begin(), coding.second_labels.end(), o.second_label) -
        coding.second_labels.begin());
    const std::size_t n_first = coding.first_labels.size() - 1;
    if (fi > 0) row[fi] = 1.0;
    if (si > 0) row[n_first + si] = 1.0;
    const std::size_t base = 1 + n_first + coding.second_labels.size() - 1;
    for (std::size_t t = 0; t < interactions.size(); ++t) {
      if (interactions[t].first == fi && interactions[t].second == si) row[base + t] = 1.0;
    }
    x.add_row(row);
  }
  return x;
}

InteractionReport interaction_analysis(std::span<const InteractionObservation> observations,
                                       const InteractionOptions& options) {
  if (observations.empty()) fail(ErrorKind::validation, "no_observations", "interaction analysis has no observations");
  std::map<std::string, std::vector<InteractionObservation>> by_rule;
  for (const auto& o : observations) by_rule[o.rule_id].push_back(o);

  InteractionReport report;
  for (auto& [rule_id, obs] : by_rule) {
    RuleInteraction r;
    r.rule_id = rule_id;
    r.n = obs.size();
    const Coding coding = coding_of(obs);
    r.first_reference = coding.first_labels.front();
    r.second_reference = coding.second_labels.front();
    std::map<std::pair<std::string, std::string>, InteractionCell> cells;
    for (const auto& f : coding.first_labels) {
      for (const auto& s : coding.second_labels) cells[{f, s}] = InteractionCell{f, s};
    }
    for (const auto& o : obs) {
      auto& c = cells[{o.first_label, o.second_label}];
      ++c.n;
      c.broken += o.broken ? 1 : 0;
    }
    for (auto& [key, c] : cells) {
      c.insufficient = c.n < options.min_cell_count;
      r.cells.push_back(c);
    }

    std::vector<int> y;
    y.reserve(obs.size());
    for (const auto& o : obs) y.push_back(o.broken ? 1 : 0);
    try {
      const DesignMatrix additive = interaction_design(obs, false, options);
      const DesignMatrix full = interaction_design(obs, true, options, &r.omitted_terms);
      r.additive = fit_logistic(additive, y, options.fit);
      r.full = fit_logistic(full, y, options.fit);
      r.lr = lr_test(*r.additive, *r.full);
      for (std::size_t i = 0; i < r.full->terms.size(); ++i) {
        TermEstimate t;
        t.term = r.full->terms[i];
        t.coefficient = r.full->coefficients[i];
        t.std_error = r.full->standard_errors[i];
        t.odds_ratio = std::exp(t.coefficient);
        t.ci_low = std::exp(t.coefficient - kZ975 * t.std_error);
        t.ci_high = std::exp(t.coefficient + kZ975 * t.std_error);
        r.terms.push_back(t);
      }
    } catch (const Error& e) {
      r.failure = e.code() + ": " + e.what();
    }
    report.rules.push_back(std::move(r));
  }
  return report;
}

TextTable interaction_summary_table(const InteractionReport& report) {
  TextTable t;
  t.header = {"rule", "n", "ll_additive", "ll_full", "chi2", "df", "p_value", "reference", "insufficient_cells",
              "omitted_terms", "failure"};
  for (const auto& r : report.rules) {
    std::size_t insufficient = 0;
    for (const auto& c : r.cells) insufficient += c.insufficient ? 1 : 0;
    std::string omitted;
    for (const auto& o : r.omitted_terms) omitted += (omitted.empty() ? "" : ";") + o;
    t.add_row({r.rule_id, std::to_string(r.n), r.additive ? format_fixed(r.additive->log_likelihood, 4) : "",
               r.full ? format_fixed(r.full->log_likelihood, 4) : "", r.lr ? format_fixed(r.lr->chi2, 4) : "",
               r.lr ? std::to_string(r.lr->df) : "", r.lr ? format_fixed(r.lr->p_value, 4) : "",
               r.first_reference + " x " + r.second_reference, std::to_string(insufficient), omitted, r.failure});
  }
  return t;
}

TextTable interaction_terms_table(const InteractionReport& report) {
  TextTable t;
  t.header = {"rule", "term", "coefficient", "std_error", "odds_ratio", "ci_low", "ci_high"};
  for (const auto& r : report.rules) {
    for (const auto& e : r.terms) {
      t.add_row({r.rule_id, e.term, format_fixed(e.coefficient, 4), format_fixed(e.std_error, 4),
                 format_fixed(e.odds_ratio, 4), format_fixed(e.ci_low, 4), format_fixed(e.ci_high, 4)});
    }
  }
  return t;
}

TextTable reliability_table(std::span<const ReliabilityReport> reports) {
  TextTable t;
  t.header = {"scale", "metric", "alpha", "n_items", "n_raters_effective", "d_observed", "d_expected"};
  for (const auto& r : reports) {
    t.add_row({std::string(to_string(r.scale)), std::string(to_string(r.metric)), format_fixed(r.alpha, 4),
               std::to_string(r.n_items), format_fixed(r.n_raters_effective, 3),
               format_fixed(r.observed_disagreement, 6), format_fixed(r.expected_disagreement, 6)});
  }
  return t;
}

TextTable contingency_table(const ClusterContingency& table) {
  TextTable t;
  t.header.push_back("Cluster");
  for (const auto& d : table.datasets) t.header.push_back(d);
  t.header.push_back("Total");
  for (std::size_t r = 0; r < table.k; ++r) {
    std::vector<std::string> row{std::to_string(r)};
    for (std::size_t c = 0; c < table.datasets.size(); ++c) {
      std::string cell = std::to_string(table.counts[r][c]);
      if (table.highlight[r][c] == CellHighlight::high) cell += "+";
      else if (table.highlight[r][c] == CellHighlight::low) cell += "-";
      row.push_back(cell);
    }
    row.push_back(std::to_string(table.row_totals[r]));
    t.add_row(std::move(row));
  }
  std::vector<std::string> totals{"Total"};
  for (auto c : table.column_totals) totals.push_back(std::to_string(c));
  totals.push_back(std::to_string(table.grand_total));
  t.add_row(std::move(totals));
  return t;
}

}  // namespace rtc
