#include "rtc/analytics/reliability.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "rtc/error.hpp"

namespace rtc {

std::string_view to_string(AlphaMetric metric) {
  switch (metric) {
    case AlphaMetric::nominal: return "nominal";
    case AlphaMetric::ordinal: return "ordinal";
    case AlphaMetric::interval: return "interval";
  }
  return "?";
}

std::string_view to_string(RatingScale scale) {
  return scale == RatingScale::full_likert ? "full_likert" : "binarized";
}

AlphaMetric parse_alpha_metric(std::string_view text) {
  if (text == "nominal") return AlphaMetric::nominal;
  if (text == "ordinal") return AlphaMetric::ordinal;
  if (text == "interval") return AlphaMetric::interval;
  fail(ErrorKind::validation, "unknown_metric", "unknown alpha metric '" + std::string(text) + "'");
}

namespace {

ReliabilityReport alpha_of(std::span<const std::vector<int>> items, AlphaMetric metric, RatingScale scale) {
  // Category index over the values that occur in pairable items.
  std::map<int, std::size_t> index;
  std::size_t n_items = 0;
  std::size_t n_values = 0;
  for (const auto& item : items) {
    if (item.size() < 2) continue;
    ++n_items;
    n_values += item.size();
    for (int v : item) index.emplace(v, 0);
  }
  if (n_items == 0) {
    fail(ErrorKind::validation, "insufficient_pairs", "alpha needs at least one item with two or more ratings");
  }
  std::vector<int> values;
  for (auto& [value, i] : index) {
    i = values.size();
    values.push_back(value);
  }
  const std::size_t k = values.size();

  std::vector<double> o(k * k, 0.0);
  for (const auto& item : items) {
    const std::size_t m = item.size();
    if (m < 2) continue;
    std::vector<double> counts(k, 0.0);
    for (int v : item) counts[index.at(v)] += 1.0;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0.0) continue;
      for (std::size_t d = 0; d < k; ++d) {
        const double pairs = c == d ? counts[c] * (counts[c] - 1.0) : counts[c] * counts[d];
        o[c * k + d] += pairs * w;
      }
    }
  }
  std::vector<double> marginal(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginal[c] += o[c * k + d];
  }
  const double n = static_cast<double>(n_values);

  auto delta2 = [&](std::size_t c, std::size_t d) -> double {
    if (c == d) return 0.0;
    switch (metric) {
      case AlphaMetric::nominal: return 1.0;
      case AlphaMetric::interval: {
        const double diff = static_cast<double>(values[c]) - static_cast<double>(values[d]);
        return diff * diff;
      }
      case AlphaMetric::ordinal: {
        const std::size_t lo = std::min(c, d);
        const std::size_t hi = std::max(c, d);
        double s = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) s += marginal[g];
        s -= 0.5 * (marginal[lo] + marginal[hi]);
        return s * s;
      }
    }
    return 0.0;
  };

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      const double dd = delta2(c, d);
      observed += o[c * k + d] * dd;
      expected += marginal[c] * marginal[d] * dd;
    }
  }
  observed /= n;
  expected /= n * (n - 1.0);
  if (!(expected > 0.0)) {
    fail(ErrorKind::numerical, "zero_expected_disagreement",
         "all pairable ratings are identical; alpha is undefined");
  }

  ReliabilityReport r;
  r.alpha = 1.0 - observed / expected;
  r.metric = metric;
  r.scale = scale;
  r.n_items = n_items;
  r.n_raters_effective = n / static_cast<double>(n_items);
  r.n_pairable_values = n_values;
  r.observed_disagreement = observed;
  r.expected_disagreement = expected;
  return r;
}

}  // namespace

ReliabilityReport krippendorff_alpha(std::span<const std::vector<int>> items, AlphaMetric metric,
                                     RatingScale scale) {
  if (scale == RatingScale::binarized) return alpha_of(binarize_items(items), metric, scale);
  return alpha_of(items, metric, scale);
}

std::vector<std::vector<int>> binarize_items(std::span<const std::vector<int>> items) {
  std::vector<std::vector<int>> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    std::vector<int> b;
    b.reserve(item.size());
    for (int v : item) b.push_back(v >= 3 ? 1 : 0);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace rtc
