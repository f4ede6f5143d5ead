#pragma once

// Textbook agglomerative clustering: at every step recompute all cluster
// distances from their definitions and merge the closest pair. O(n^3) or
// worse; only for small n.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct NaiveResult {
  std::vector<std::size_t> labels;  // canonical, first occurrence order
  std::vector<double> heights;      // merge heights in merge order
};

inline double point_distance(const std::pair<double, double>& a, const std::pair<double, double>& b) {
  return std::hypot(a.first - b.first, a.second - b.second);
}

inline double linkage_distance(const std::vector<std::pair<double, double>>& pts, const std::vector<std::size_t>& a,
                               const std::vector<std::size_t>& b, const std::string& linkage) {
  if (linkage == "ward") {
    double ax = 0, ay = 0, bx = 0, by = 0;
    for (auto i : a) ax += pts[i].first, ay += pts[i].second;
    for (auto i : b) bx += pts[i].first, by += pts[i].second;
    const double na = double(a.size()), nb = double(b.size());
    ax /= na, ay /= na, bx /= nb, by /= nb;
    const double d2 = (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
    // increase in within-cluster sum of squares, reported as sqrt(2 * delta)
    return std::sqrt(2.0 * na * nb / (na + nb) * d2);
  }
  double best = linkage == "single" ? std::numeric_limits<double>::infinity() : 0.0;
  double sum = 0.0;
  for (auto i : a) {
    for (auto j : b) {
      const double d = point_distance(pts[i], pts[j]);
      if (linkage == "single") best = std::min(best, d);
      if (linkage == "complete") best = std::max(best, d);
      sum += d;
    }
  }
  if (linkage == "average") return sum / double(a.size() * b.size());
  return best;
}

inline NaiveResult naive_cluster(const std::vector<std::pair<double, double>>& pts, std::size_t k,
                                 const std::string& linkage) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < pts.size(); ++i) clusters.push_back({i});
  NaiveResult out;
  while (clusters.size() > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 1;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = linkage_distance(pts, clusters[i], clusters[j], linkage);
        if (d < best) best = d, bi = i, bj = j;
      }
    }
    out.heights.push_back(best);
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + std::ptrdiff_t(bj));
  }
  std::vector<std::size_t> raw(pts.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto i : clusters[c]) raw[i] = c;
  }
  std::vector<std::size_t> map(clusters.size(), std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  out.labels.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (map[raw[i]] == std::numeric_limits<std::size_t>::max()) map[raw[i]] = next++;
    out.labels[i] = map[raw[i]];
  }
  return out;
}

}  // namespace oracle
