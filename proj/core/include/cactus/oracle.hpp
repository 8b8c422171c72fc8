#pragma once

#include <cstdint>
#include <optional>

#include "cactus/env.hpp"

namespace cactus {

struct JointSearchLimit {
  int max_agents = 3;
  int max_free_cells = 36;
  std::int64_t max_expansions = 5'000'000;
  int horizon = kDefaultHorizon;
};

enum class OracleStatus : std::uint8_t { Solved = 0, Infeasible = 1 };

struct OracleResult {
  OracleStatus status = OracleStatus::Infeasible;
  int flowtime = 0;  // sum over agents of the final arrival time
  Plan plan;         // per-agent actions, equal lengths
  std::int64_t expanded = 0;

  bool solved() const noexcept { return status == OracleStatus::Solved; }
};

// Exhaustive A* over joint positions plus per-agent "done" flags. A done agent
// is committed to waiting on its goal; each step costs the number of agents not
// yet done. Only joint actions that resolve_moves executes unchanged are
// expanded, so plans replay without degradations. Ties are broken by insertion
// order with joint actions enumerated lexicographically.
// Throws ResourceLimitError when the instance or the search exceeds `limits`.
OracleResult optimal_flowtime(const Instance& instance, const JointSearchLimit& limits = {});

// Sum of single-agent BFS distances; nullopt if any goal is unreachable.
std::optional<int> flowtime_lower_bound(const Instance& instance);

}  // namespace cactus
