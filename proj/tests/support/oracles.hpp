#pragma once

// Independent reference computations used as ground truth by the tests. None
// of these reuse the library routine they are compared against.

#include <cactus/env.hpp>
#include <cactus/grid_map.hpp>
#include <cactus/neural.hpp>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cactus::testing {

// Shortest-path lengths by repeated relaxation (no queue), kUnreachable if none.
std::vector<int> relaxation_distances(const GridMap& map, Position source);

struct Outcome {
  unsigned moved_mask = 0;  // bit i set when agent i executed its proposal
  std::vector<Position> positions;
};

// Every subset of agents executing their proposals (the rest staying) whose
// result has no vertex conflict, no swap, and stays on free cells.
std::vector<Outcome> conflict_free_outcomes(const GridMap& map, const std::vector<Position>& from,
                                            const std::vector<Action>& actions);

// Central differences of f at every coordinate.
VectorX<double> numeric_gradient(const std::function<double(const VectorX<double>&)>& f,
                                 const VectorX<double>& x, double h = 1e-5);

double relative_error(const VectorX<double>& analytic, const VectorX<double>& numeric);

// Mean and sample standard deviation in long double, straightforward formula.
void reference_stats(const std::vector<double>& xs, double& mean, double& stddev);

// Per-agent reward sums for one executed episode, computed from the
// position history alone without the environment's reward function.
std::vector<int> rewards_from_history(const std::vector<std::vector<Position>>& history,
                                      const std::vector<Position>& goals);

std::string read_file(const std::string& path);

}  // namespace cactus::testing
