#include "cactus/oracle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <queue>
#include <unordered_map>

#include "cactus/error.hpp"

namespace cactus {

std::optional<int> flowtime_lower_bound(const Instance& instance) {
  int total = 0;
  for (int i = 0; i < instance.agents(); ++i) {
    const std::optional<int> d = bfs_distance(instance.map, instance.starts[i], instance.goals[i]);
    if (!d) return std::nullopt;
    total += *d;
  }
  return total;
}

namespace {

struct Node {
  std::uint64_t key;
  std::vector<Position> positions;
  unsigned done;
  int g;
  int t;
  int parent;
  std::vector<Action> actions;  // empty for a zero-cost "commit to goal" edge
};

struct QueueEntry {
  int f;
  std::int64_t seq;
  int node;
  bool operator>(const QueueEntry& o) const { return f != o.f ? f > o.f : seq > o.seq; }
};

}  // namespace

OracleResult optimal_flowtime(const Instance& instance, const JointSearchLimit& limits) {
  const int n = instance.agents();
  const GridMap& map = instance.map;
  if (n < 1) throw InvalidInstanceError("oracle needs at least one agent");
  if (n > limits.max_agents) {
    throw ResourceLimitError("oracle limited to " + std::to_string(limits.max_agents) + " agents");
  }
  if (map.free_count() > limits.max_free_cells) {
    throw ResourceLimitError("oracle limited to " + std::to_string(limits.max_free_cells) +
                             " free cells, map has " + std::to_string(map.free_count()));
  }
  for (int i = 0; i < n; ++i) {
    if (!map.is_free(instance.starts[i]) || !map.is_free(instance.goals[i])) {
      throw InvalidInstanceError("oracle starts and goals must be free cells");
    }
    for (int j = 0; j < i; ++j) {
      if (instance.starts[i] == instance.starts[j] || instance.goals[i] == instance.goals[j]) {
        throw InvalidInstanceError("oracle starts and goals must be distinct");
      }
    }
  }

  OracleResult result;
  std::vector<std::vector<int>> to_goal;
  for (const Position& g : instance.goals) to_goal.push_back(bfs_distances(map, g));
  for (int i = 0; i < n; ++i) {
    if (to_goal[i][map.index(instance.starts[i])] == kUnreachable) return result;
  }

  std::vector<int> dense(map.cell_count(), -1);
  int free_cells = 0;
  for (int c = 0; c < map.cell_count(); ++c) {
    if (map.obstacles()[c] == 0) dense[c] = free_cells++;
  }
  auto key_of = [&](const std::vector<Position>& pos, unsigned done) {
    std::uint64_t key = done;
    for (int i = n - 1; i >= 0; --i) key = key * free_cells + dense[map.index(pos[i])];
    return key;
  };
  auto heuristic = [&](const std::vector<Position>& pos, unsigned done) {
    int h = 0;
    for (int i = 0; i < n; ++i) {
      if (!(done >> i & 1u)) h += to_goal[i][map.index(pos[i])];
    }
    return h;
  };
  const unsigned all_done = (1u << n) - 1u;

  std::vector<Node> nodes;
  std::unordered_map<std::uint64_t, int> best;  // key -> lowest g pushed
  std::unordered_map<std::uint64_t, bool> closed;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
  std::int64_t seq = 0;

  auto push = [&](std::vector<Position> pos, unsigned done, int g, int t, int parent,
                  std::vector<Action> actions) {
    const std::uint64_t key = key_of(pos, done);
    auto it = best.find(key);
    if (it != best.end() && it->second <= g) return;
    best[key] = g;
    const int f = g + heuristic(pos, done);
    nodes.push_back({key, std::move(pos), done, g, t, parent, std::move(actions)});
    open.push({f, seq++, static_cast<int>(nodes.size()) - 1});
  };

  push(instance.starts, 0u, 0, 0, -1, {});
  std::vector<int> choice(n);
  std::vector<Action> joint(n);
  while (!open.empty()) {
    const QueueEntry top = open.top();
    open.pop();
    const Node node = nodes[top.node];
    if (closed[node.key]) continue;
    closed[node.key] = true;
    if (++result.expanded > limits.max_expansions) {
      throw ResourceLimitError("oracle exceeded " + std::to_string(limits.max_expansions) +
                               " expansions");
    }
    if (node.done == all_done) {
      result.status = OracleStatus::Solved;
      result.flowtime = node.g;
      result.plan.assign(n, {});
      std::vector<const Node*> chain;
      for (int at = top.node; at >= 0; at = nodes[at].parent) chain.push_back(&nodes[at]);
      std::reverse(chain.begin(), chain.end());
      for (const Node* c : chain) {
        if (c->actions.empty()) continue;
        for (int i = 0; i < n; ++i) result.plan[i].push_back(c->actions[i]);
      }
      return result;
    }

    for (int i = 0; i < n; ++i) {
      if (!(node.done >> i & 1u) && node.positions[i] == instance.goals[i]) {
        push(node.positions, node.done | (1u << i), node.g, node.t, top.node, {});
      }
    }
    if (node.t >= limits.horizon) continue;

    const int active = n - std::popcount(node.done);
    std::fill(choice.begin(), choice.end(), 0);
    while (true) {
      bool moving = false;
      for (int i = 0; i < n; ++i) {
        joint[i] = static_cast<Action>(choice[i]);
        if (joint[i] != Action::Wait) moving = true;
      }
      if (moving) {
        const MoveResolution res = resolve_moves(map, node.positions, joint);
        if (std::none_of(res.degraded.begin(), res.degraded.end(), [](auto d) { return d != 0; })) {
          push(res.positions, node.done, node.g + active, node.t + 1, top.node, joint);
        }
      }
      // Next joint action, agent 0 most significant; done agents stay on Wait.
      int i = n - 1;
      for (; i >= 0; --i) {
        if (node.done >> i & 1u) continue;
        if (++choice[i] < kNumActions) break;
        choice[i] = 0;
      }
      if (i < 0) break;
    }
  }
  return result;
}

}  // namespace cactus
