#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "cactus/env.hpp"
#include "cactus/grid_map.hpp"
#include "cactus/rng.hpp"

namespace cactus {

struct CurriculumConfig {
  double threshold = 0.75;       // U
  double deviation_factor = 2.0;  // eta
  int episodes_per_epoch = 32;   // E
};

// Allocation radius and the completion rates gathered during the current epoch.
// An unbounded state stands for R_alloc = infinity and never changes.
struct CurriculumState {
  int radius = 1;
  int radius_cap = 1;
  bool unbounded = false;
  std::vector<double> epoch_rates;

  static CurriculumState bounded(int radius_cap);
  static CurriculumState infinite();

  // Radius used to place goals on a map of the given size.
  int effective_radius(const GridMap& map) const noexcept;
};

struct EpochStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, divisor count - 1
  int count = 0;
};

struct EpochUpdate {
  int radius = 1;
  EpochStats stats;
  bool incremented = false;
};

EpochStats epoch_stats(std::span<const double> rates);

// Confidence test mu - eta * sigma >= U.
constexpr bool curriculum_passes(double mean, double stddev, const CurriculumConfig& config) noexcept {
  return mean - config.deviation_factor * stddev >= config.threshold;
}

// Consumes exactly E recorded rates; increments the radius (up to the cap) when
// the confidence test passes. Throws ContractError on any other rate count.
EpochUpdate epoch_update(CurriculumState& state, const CurriculumConfig& config);

// Chebyshev radius within which every free cell of the map is eligible.
inline int map_diameter(const GridMap& map) noexcept {
  return std::max(map.width(), map.height()) - 1;
}

// Goal per agent, in index order: uniform over free cells within Chebyshev
// `radius` of the start that are reachable and not already assigned. An agent
// with no eligible cell widens its own radius by one until the map diameter;
// beyond that AllocationError is thrown.
std::vector<Position> sample_goals(const GridMap& map, std::span<const Position> starts, int radius,
                                   Rng& rng);

// N distinct free cells chosen uniformly. Throws AllocationError if the map
// has fewer free cells than agents.
std::vector<Position> sample_starts(const GridMap& map, int agents, Rng& rng);

double completion_rate(const Instance& instance, const EnvState& final_state);

}  // namespace cactus
