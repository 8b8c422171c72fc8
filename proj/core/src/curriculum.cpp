#include "cactus/curriculum.hpp"

#include <cmath>
#include <numeric>

#include "cactus/error.hpp"

namespace cactus {

CurriculumState CurriculumState::bounded(int radius_cap) {
  CurriculumState state;
  state.radius = 1;
  state.radius_cap = std::max(1, radius_cap);
  return state;
}

CurriculumState CurriculumState::infinite() {
  CurriculumState state;
  state.unbounded = true;
  return state;
}

int CurriculumState::effective_radius(const GridMap& map) const noexcept {
  return unbounded ? map_diameter(map) : radius;
}

EpochStats epoch_stats(std::span<const double> rates) {
  EpochStats stats;
  stats.count = static_cast<int>(rates.size());
  if (rates.empty()) return stats;
  stats.mean = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
  if (rates.size() > 1) {
    double sq = 0.0;
    for (double r : rates) sq += (r - stats.mean) * (r - stats.mean);
    stats.stddev = std::sqrt(sq / static_cast<double>(rates.size() - 1));
  }
  return stats;
}

EpochUpdate epoch_update(CurriculumState& state, const CurriculumConfig& config) {
  if (static_cast<int>(state.epoch_rates.size()) != config.episodes_per_epoch) {
    throw ContractError("epoch update needs " + std::to_string(config.episodes_per_epoch) +
                        " completion rates, got " + std::to_string(state.epoch_rates.size()));
  }
  EpochUpdate update;
  update.stats = epoch_stats(state.epoch_rates);
  state.epoch_rates.clear();
  if (!state.unbounded && curriculum_passes(update.stats.mean, update.stats.stddev, config) &&
      state.radius < state.radius_cap) {
    ++state.radius;
    update.incremented = true;
  }
  update.radius = state.radius;
  return update;
}

std::vector<Position> sample_starts(const GridMap& map, int agents, Rng& rng) {
  if (agents < 1) throw AllocationError("at least one agent is required");
  std::vector<Position> cells = map.free_cells();
  if (static_cast<int>(cells.size()) < agents) {
    throw AllocationError("map has " + std::to_string(cells.size()) + " free cells for " +
                          std::to_string(agents) + " agents");
  }
  for (int i = 0; i < agents; ++i) {
    const int j = i + uniform_index(rng, static_cast<int>(cells.size()) - i);
    std::swap(cells[i], cells[j]);
  }
  cells.resize(agents);
  return cells;
}

std::vector<Position> sample_goals(const GridMap& map, std::span<const Position> starts, int radius,
                                   Rng& rng) {
  if (radius < 1) throw AllocationError("allocation radius must be at least 1");
  std::vector<std::uint8_t> taken(map.cell_count(), 0);
  std::vector<Position> goals;
  goals.reserve(starts.size());
  std::vector<Position> eligible;
  const int diameter = map_diameter(map);

  for (std::size_t i = 0; i < starts.size(); ++i) {
    const Position start = starts[i];
    if (!map.is_free(start)) throw AllocationError("start is not a free cell");
    const std::vector<int> dist = bfs_distances(map, start);
    for (int r = std::min(radius, std::max(diameter, 1));; ++r) {
      eligible.clear();
      for (int y = std::max(0, start.y - r); y <= std::min(map.height() - 1, start.y + r); ++y) {
        for (int x = std::max(0, start.x - r); x <= std::min(map.width() - 1, start.x + r); ++x) {
          const int idx = map.index({x, y});
          if (dist[idx] != kUnreachable && !taken[idx]) eligible.push_back({x, y});
        }
      }
      if (!eligible.empty()) break;
      if (r >= diameter) {
        throw AllocationError("no unique reachable goal left for agent " + std::to_string(i));
      }
    }
    const Position goal = eligible[uniform_index(rng, static_cast<int>(eligible.size()))];
    taken[map.index(goal)] = 1;
    goals.push_back(goal);
  }
  return goals;
}

double completion_rate(const Instance& instance, const EnvState& final_state) {
  if (instance.agents() == 0) return 0.0;
  int on_goal = 0;
  for (int i = 0; i < instance.agents(); ++i) {
    if (final_state.positions[i] == instance.goals[i]) ++on_goal;
  }
  return static_cast<double>(on_goal) / instance.agents();
}

}  // namespace cactus
