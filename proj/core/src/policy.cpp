#include "cactus/policy.hpp"

#include "cactus/error.hpp"
#include "cactus/learner.hpp"

namespace cactus {

std::vector<Action> ActorPolicy::act(const Instance& instance, const EnvState& state, Rng& rng) {
  return select_actions(*actor_, instance, state, greedy_, rng);
}

std::vector<Action> ScriptedPolicy::act(const Instance& instance, const EnvState& state, Rng&) {
  std::vector<Action> actions(instance.agents(), Action::Wait);
  for (int i = 0; i < instance.agents() && i < static_cast<int>(plan_.size()); ++i) {
    if (state.t < static_cast<int>(plan_[i].size())) actions[i] = plan_[i][state.t];
  }
  return actions;
}

std::vector<Action> RandomPolicy::act(const Instance& instance, const EnvState&, Rng& rng) {
  std::vector<Action> actions(instance.agents());
  for (Action& a : actions) a = static_cast<Action>(uniform_index(rng, kNumActions));
  return actions;
}

Action descend(const GridMap& map, const std::vector<int>& distance_to_goal, Position from) {
  const int here = distance_to_goal[map.index(from)];
  if (here <= 0) return Action::Wait;
  for (Action a : {Action::North, Action::East, Action::South, Action::West}) {
    const Position next = apply(from, a);
    if (map.is_free(next) && distance_to_goal[map.index(next)] == here - 1) return a;
  }
  return Action::Wait;
}

void ShortestPathPolicy::reset(const Instance& instance) {
  to_goal_.clear();
  for (const Position& g : instance.goals) to_goal_.push_back(bfs_distances(instance.map, g));
}

std::vector<Action> ShortestPathPolicy::act(const Instance& instance, const EnvState& state, Rng&) {
  if (static_cast<int>(to_goal_.size()) != instance.agents()) reset(instance);
  std::vector<Action> actions(instance.agents());
  for (int i = 0; i < instance.agents(); ++i) {
    actions[i] = descend(instance.map, to_goal_[i], state.positions[i]);
  }
  return actions;
}

}  // namespace cactus
