#pragma once

// Krippendorff's alpha over a sparse item x rater matrix, via the
// coincidence-matrix formulation. Items with fewer than two ratings are not
// pairable and drop out, which is how missing ratings are handled.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace rtc {

enum class AlphaMetric { nominal, ordinal, interval };
enum class RatingScale { full_likert, binarized };

std::string_view to_string(AlphaMetric metric);
std::string_view to_string(RatingScale scale);
AlphaMetric parse_alpha_metric(std::string_view text);

struct ReliabilityReport {
  double alpha = 0.0;
  AlphaMetric metric = AlphaMetric::ordinal;
  RatingScale scale = RatingScale::full_likert;
  std::size_t n_items = 0;
  /// Mean number of ratings per pairable item.
  double n_raters_effective = 0.0;
  std::size_t n_pairable_values = 0;
  double observed_disagreement = 0.0;
  double expected_disagreement = 0.0;
};

/// One entry per item; each entry holds whatever ratings that item received.
/// Throws validation "insufficient_pairs" if no item has two ratings and
/// numerical "zero_expected_disagreement" if every pairable value is equal.
/// With RatingScale::binarized the Likert ratings are binarized first.
ReliabilityReport krippendorff_alpha(std::span<const std::vector<int>> items, AlphaMetric metric,
                                     RatingScale scale = RatingScale::full_likert);

/// Maps every rating through binarize_rating (3, 4 -> 1; 1, 2 -> 0).
std::vector<std::vector<int>> binarize_items(std::span<const std::vector<int>> items);

}  // namespace rtc
