#pragma once

#include <cstdint>
#include <string>

namespace cactus {

// Outcome of one property suite run on demand.
struct SuiteResult {
  std::string name;
  int passed = 0;
  int total = 0;
  double max_error = 0.0;  // suite-specific worst deviation, 0 if not applicable
  std::string detail;

  bool ok() const noexcept { return passed == total; }
};

// Exhaustive 25-way joint argmax of random N=2 mixers against the local argmaxes.
SuiteResult verify_igm(int trials, std::uint64_t seed);

// Central finite differences (h = 1e-5, double precision) of the actor, utility
// and mixer losses on random parameters; max norm-wise relative error <= tol.
SuiteResult verify_gradients(int seeds, std::uint64_t seed, double tolerance = 1e-4);

// Random-policy rollouts on K=10, delta in {0, 0.3}, N=8, audited for
// vertex and edge conflicts.
SuiteResult verify_conflicts(int steps, std::uint64_t seed);

// Single-agent BFS rollouts against bfs_distance and 2-agent oracle plans
// against the lower bound and conflict-free replay.
SuiteResult verify_oracle(int instances, std::uint64_t seed);

}  // namespace cactus
