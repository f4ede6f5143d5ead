#pragma once

// Synthetic data generators with known ground truth, shared by the unit and
// acceptance suites.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rtc/analytics/reports.hpp"
#include "rtc/rng.hpp"

namespace gen {

inline double normal(rtc::Rng& rng) {
  // Box-Muller on the reproducible unit draw
  double u1 = rtc::uniform_unit(rng);
  while (u1 <= 0.0) u1 = rtc::uniform_unit(rng);
  const double u2 = rtc::uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct InteractionGenerator {
  std::vector<std::string> races{"Asian", "Black", "Hispanic", "White"};
  std::vector<std::string> genders{"Female", "Male"};
  double base = -0.5;
  std::vector<double> race_effect{0.0, 0.2, -0.1, 0.3};
  std::vector<double> gender_effect{0.0, -0.2};
  /// log odds ratio added on one race x gender cell
  double interaction = std::log(3.0);
  std::size_t race_cell = 3;
  std::size_t gender_cell = 1;
};

inline std::vector<rtc::InteractionObservation> interaction_sample(const InteractionGenerator& g, std::size_t n,
                                                                   std::uint64_t seed,
                                                                   const std::string& rule = "hate_speech") {
  rtc::Rng rng(seed);
  std::vector<rtc::InteractionObservation> obs;
  obs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // balanced design: cycle through the cells
    const std::size_t cell = i % (g.races.size() * g.genders.size());
    const std::size_t r = cell / g.genders.size();
    const std::size_t s = cell % g.genders.size();
    double eta = g.base + g.race_effect[r] + g.gender_effect[s];
    if (r == g.race_cell && s == g.gender_cell) eta += g.interaction;
    const double p = 1.0 / (1.0 + std::exp(-eta));
    obs.push_back({rule, g.races[r], g.genders[s], rtc::bernoulli(rng, p)});
  }
  return obs;
}

struct Blobs {
  std::vector<rtc::Point2> points;
  std::vector<std::size_t> truth;
};

/// k blobs on a grid with centre spacing `spacing` and per-axis sd `sd`.
inline Blobs blobs(std::size_t k, std::size_t n, double spacing, double sd, std::uint64_t seed) {
  rtc::Rng rng(seed);
  Blobs b;
  const std::size_t side = std::size_t(std::ceil(std::sqrt(double(k))));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    const double cx = double(c % side) * spacing, cy = double(c / side) * spacing;
    b.points.emplace_back(cx + sd * normal(rng), cy + sd * normal(rng));
    b.truth.push_back(c);
  }
  return b;
}

}  // namespace gen
