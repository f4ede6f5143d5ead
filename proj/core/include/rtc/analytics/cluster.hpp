#pragma once

// Agglomerative clustering of 2-D points and the cluster x dataset
// contingency table.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rtc {

enum class Linkage { ward, single, complete, average };

std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view text);

using Point2 = std::pair<double, double>;

/// One merge in dendrogram order. Ids below n are points; id n + i is the
/// cluster produced by merge i.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct ClusterAssignment {
  /// Per point, in [0, k). Labels are numbered by first occurrence in point
  /// order so equal partitions compare equal.
  std::vector<std::size_t> labels;
  std::size_t k = 0;
  Linkage linkage = Linkage::ward;
  /// The first n - k merges.
  std::vector<Merge> merge_history;
};

/// Ward heights are sqrt(2 * increase in within-cluster sum of squares),
/// matching the usual dendrogram convention. Throws validation on k = 0,
/// k > n or non-finite coordinates.
ClusterAssignment agglomerative_cluster(std::span<const Point2> points, std::size_t k,
                                        Linkage linkage = Linkage::ward);

/// Relabels so the first point gets 0, the next unseen label 1, and so on.
std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels);

enum class CellHighlight { none, low, high };

struct ClusterContingency {
  std::vector<std::string> datasets;
  std::size_t k = 0;
  /// counts[cluster][dataset]
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<std::uint64_t> row_totals;
  std::vector<std::uint64_t> column_totals;
  std::uint64_t grand_total = 0;
  /// Per dataset column: cells at or above q3 are high, at or below q1 low.
  std::vector<double> q1;
  std::vector<double> q3;
  std::vector<std::vector<CellHighlight>> highlight;
};

/// Datasets are listed in sorted order. Throws validation on empty input or
/// a length mismatch.
ClusterContingency cluster_contingency(const ClusterAssignment& assignment,
                                       std::span<const std::string> dataset_of);

}  // namespace rtc
