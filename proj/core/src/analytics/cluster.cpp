#include "rtc/analytics/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "rtc/error.hpp"

namespace rtc {

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::ward: return "ward";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
  }
  return "?";
}

Linkage parse_linkage(std::string_view text) {
  if (text == "ward") return Linkage::ward;
  if (text == "single") return Linkage::single;
  if (text == "complete") return Linkage::complete;
  if (text == "average") return Linkage::average;
  fail(ErrorKind::validation, "unknown_linkage", "unknown linkage '" + std::string(text) + "'");
}

std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels) {
  std::map<std::size_t, std::size_t> rename;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (auto l : labels) {
    auto [it, inserted] = rename.emplace(l, rename.size());
    out.push_back(it->second);
  }
  return out;
}

namespace {

// Upper-triangular condensed distance matrix.
class Condensed {
 public:
  explicit Condensed(std::size_t n) : n_(n), d_(n * (n - 1) / 2) {}
  double& operator()(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return d_[i * (2 * n_ - i - 1) / 2 + (j - i - 1)];
  }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

struct RawMerge {
  std::size_t a, b;  // slots; the merged cluster lives on in slot b
  double dist;
};

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

}  // namespace

ClusterAssignment agglomerative_cluster(std::span<const Point2> points, std::size_t k, Linkage linkage) {
  const std::size_t n = points.size();
  if (k == 0) fail(ErrorKind::validation, "invalid_k", "k must be at least 1");
  if (k > n) fail(ErrorKind::validation, "invalid_k", "k exceeds the number of points");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(points[i].first) || !std::isfinite(points[i].second)) {
      fail(ErrorKind::validation, "non_finite_point", "point " + std::to_string(i) + " has non-finite coordinates");
    }
  }

  ClusterAssignment out;
  out.k = k;
  out.linkage = linkage;
  if (n == 1) {
    out.labels = {0};
    return out;
  }

  // Ward works on squared distances so the Lance-Williams update is exact.
  const bool squared = linkage == Linkage::ward;
  Condensed d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = points[i].first - points[j].first;
      const double dy = points[i].second - points[j].second;
      const double d2 = dx * dx + dy * dy;
      d(i, j) = squared ? d2 : std::sqrt(d2);
    }
  }

  std::vector<std::size_t> size(n, 1);
  std::vector<char> active(n, 1);
  std::vector<std::size_t> chain;
  chain.reserve(n);
  std::vector<RawMerge> merges;
  merges.reserve(n - 1);

  // Nearest-neighbour chain. All four linkages are reducible, so the set of
  // merges equals the greedy closest-pair sequence.
  std::size_t next_start = 0;
  while (merges.size() < n - 1) {
    if (chain.empty()) {
      while (!active[next_start]) ++next_start;
      chain.push_back(next_start);
    }
    std::size_t a = 0, b = 0;
    double best = 0.0;
    while (true) {
      a = chain.back();
      // Prefer the previous chain element on ties so the chain terminates;
      // otherwise the lowest index wins.
      std::size_t candidate = n;
      best = std::numeric_limits<double>::infinity();
      if (chain.size() >= 2) {
        candidate = chain[chain.size() - 2];
        best = d(a, candidate);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (!active[j] || j == a) continue;
        const double dj = d(a, j);
        if (dj < best) {
          best = dj;
          candidate = j;
        }
      }
      if (chain.size() >= 2 && candidate == chain[chain.size() - 2]) {
        b = candidate;
        chain.pop_back();
        chain.pop_back();
        break;
      }
      chain.push_back(candidate);
    }

    if (a > b) std::swap(a, b);
    merges.push_back({a, b, best});
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    const double dab = best;
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a || x == b) continue;
      const double dax = d(a, x);
      const double dbx = d(b, x);
      double updated = 0.0;
      switch (linkage) {
        case Linkage::single: updated = std::min(dax, dbx); break;
        case Linkage::complete: updated = std::max(dax, dbx); break;
        case Linkage::average: updated = (na * dax + nb * dbx) / (na + nb); break;
        case Linkage::ward: {
          const double nx = static_cast<double>(size[x]);
          updated = ((na + nx) * dax + (nb + nx) * dbx - nx * dab) / (na + nb + nx);
          break;
        }
      }
      d(b, x) = updated;
    }
    active[a] = 0;
    size[b] += size[a];
  }

  std::stable_sort(merges.begin(), merges.end(),
                   [](const RawMerge& l, const RawMerge& r) { return l.dist < r.dist; });

  // Relabel into dendrogram ids and cut after n - k merges.
  UnionFind uf(n);
  std::vector<std::size_t> cluster_id(n);
  std::iota(cluster_id.begin(), cluster_id.end(), std::size_t{0});
  std::vector<std::size_t> cluster_size(n, 1);
  for (std::size_t m = 0; m < n - k; ++m) {
    const std::size_t ra = uf.find(merges[m].a);
    const std::size_t rb = uf.find(merges[m].b);
    Merge merge;
    merge.left = std::min(cluster_id[ra], cluster_id[rb]);
    merge.right = std::max(cluster_id[ra], cluster_id[rb]);
    merge.height = squared ? std::sqrt(merges[m].dist) : merges[m].dist;
    merge.size = cluster_size[ra] + cluster_size[rb];
    uf.parent[ra] = rb;
    cluster_id[rb] = n + m;
    cluster_size[rb] = merge.size;
    out.merge_history.push_back(merge);
  }
  std::vector<std::size_t> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = uf.find(i);
  out.labels = canonical_labels(roots);
  return out;
}

namespace {

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

ClusterContingency cluster_contingency(const ClusterAssignment& assignment, std::span<const std::string> dataset_of) {
  if (assignment.labels.empty()) fail(ErrorKind::validation, "empty_assignment", "cluster assignment is empty");
  if (assignment.labels.size() != dataset_of.size()) {
    fail(ErrorKind::validation, "length_mismatch", "labels and dataset ids differ in length");
  }
  ClusterContingency t;
  std::map<std::string, std::size_t> column;
  for (const auto& ds : dataset_of) column.emplace(ds, 0);
  for (auto& [name, idx] : column) {
    idx = t.datasets.size();
    t.datasets.push_back(name);
  }
  t.k = assignment.k;
  for (auto l : assignment.labels) t.k = std::max(t.k, l + 1);
  const std::size_t cols = t.datasets.size();
  t.counts.assign(t.k, std::vector<std::uint64_t>(cols, 0));
  for (std::size_t i = 0; i < dataset_of.size(); ++i) ++t.counts[assignment.labels[i]][column.at(dataset_of[i])];

  t.row_totals.assign(t.k, 0);
  t.column_totals.assign(cols, 0);
  for (std::size_t r = 0; r < t.k; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      t.row_totals[r] += t.counts[r][c];
      t.column_totals[c] += t.counts[r][c];
      t.grand_total += t.counts[r][c];
    }
  }
  t.highlight.assign(t.k, std::vector<CellHighlight>(cols, CellHighlight::none));
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<double> column_values;
    for (std::size_t r = 0; r < t.k; ++r) column_values.push_back(static_cast<double>(t.counts[r][c]));
    const double q1 = quantile(column_values, 0.25);
    const double q3 = quantile(column_values, 0.75);
    t.q1.push_back(q1);
    t.q3.push_back(q3);
    if (q1 == q3) continue;
    for (std::size_t r = 0; r < t.k; ++r) {
      const double v = static_cast<double>(t.counts[r][c]);
      if (v >= q3) t.highlight[r][c] = CellHighlight::high;
      else if (v <= q1) t.highlight[r][c] = CellHighlight::low;
    }
  }
  return t;
}

}  // namespace rtc
