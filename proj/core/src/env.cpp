#include "cactus/env.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "cactus/error.hpp"

namespace cactus {

const char* action_name(Action a) noexcept {
  switch (a) {
    case Action::Wait: return "WAIT";
    case Action::North: return "NORTH";
    case Action::East: return "EAST";
    case Action::South: return "SOUTH";
    case Action::West: return "WEST";
  }
  return "?";
}

namespace {

std::string describe(Position p) {
  return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
}

void require_distinct_free(const GridMap& map, std::span<const Position> cells, const char* what) {
  std::set<Position> seen;
  for (Position p : cells) {
    if (!map.is_free(p)) {
      throw InvalidInstanceError(std::string(what) + " " + describe(p) + " is not a free cell");
    }
    if (!seen.insert(p).second) {
      throw InvalidInstanceError(std::string("duplicate ") + what + " " + describe(p));
    }
  }
}

}  // namespace

void validate_instance(const Instance& instance) {
  if (instance.starts.empty()) throw InvalidInstanceError("instance has no agents");
  if (instance.starts.size() != instance.goals.size()) {
    throw InvalidInstanceError("start and goal counts differ");
  }
  require_distinct_free(instance.map, instance.starts, "start");
  require_distinct_free(instance.map, instance.goals, "goal");
  for (int i = 0; i < instance.agents(); ++i) {
    if (!bfs_distance(instance.map, instance.starts[i], instance.goals[i])) {
      throw InvalidInstanceError("goal of agent " + std::to_string(i) +
                                 " is unreachable from its start");
    }
  }
}

void encode_observation_into(const Instance& instance, const EnvState& state, int agent,
                             std::span<float> out) {
  if (agent < 0 || agent >= static_cast<int>(state.positions.size())) {
    throw ContractError("agent index out of range");
  }
  if (out.size() != static_cast<std::size_t>(kObservationSize)) {
    throw ContractError("observation buffer has the wrong size");
  }
  std::fill(out.begin(), out.end(), 0.0f);
  const GridMap& map = instance.map;
  const Position self = state.positions[agent];
  const Position goal = instance.goals[agent];
  auto cell = [&](int channel, int row, int col) -> float& {
    return out[Observation::flat_index(channel, row, col)];
  };

  for (int row = 0; row < kFieldOfView; ++row) {
    for (int col = 0; col < kFieldOfView; ++col) {
      const Position p{self.x + col - kFovRadius, self.y + row - kFovRadius};
      if (!map.is_free(p)) cell(kObstacleChannel, row, col) = 1.0f;
    }
  }

  auto in_fov = [&](Position p, int& row, int& col) {
    col = p.x - self.x + kFovRadius;
    row = p.y - self.y + kFovRadius;
    return row >= 0 && col >= 0 && row < kFieldOfView && col < kFieldOfView;
  };
  for (int j = 0; j < static_cast<int>(state.positions.size()); ++j) {
    if (j == agent) continue;
    int row = 0;
    int col = 0;
    if (in_fov(state.positions[j], row, col)) cell(kAgentChannel, row, col) = 1.0f;
    if (in_fov(instance.goals[j], row, col)) cell(kAgentGoalChannel, row, col) = 1.0f;
  }

  // Inside the view this is the goal cell itself; outside, the border cell in
  // the goal's direction.
  const int dx = std::clamp(goal.x - self.x, -kFovRadius, kFovRadius);
  const int dy = std::clamp(goal.y - self.y, -kFovRadius, kFovRadius);
  cell(kOwnGoalChannel, dy + kFovRadius, dx + kFovRadius) = 1.0f;

  const float distance = std::min(
      1.0f, static_cast<float>(manhattan(self, goal)) / static_cast<float>(map.width() + map.height()));
  auto plane = out.subspan(Observation::flat_index(kGoalDistanceChannel, 0, 0),
                           kFieldOfView * kFieldOfView);
  std::fill(plane.begin(), plane.end(), distance);
}

Observation encode_observation(const Instance& instance, const EnvState& state, int agent) {
  Observation obs;
  encode_observation_into(instance, state, agent, obs.values);
  return obs;
}

std::vector<Observation> encode_observations(const Instance& instance, const EnvState& state) {
  std::vector<Observation> out(state.positions.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    encode_observation_into(instance, state, static_cast<int>(i), out[i].values);
  }
  return out;
}

MoveResolution resolve_moves(const GridMap& map, std::span<const Position> positions,
                             std::span<const Action> actions) {
  if (positions.size() != actions.size()) {
    throw ContractError("one action per agent is required");
  }
  const int n = static_cast<int>(positions.size());
  MoveResolution result;
  result.positions.resize(n);
  result.degraded.assign(n, 0);

  std::vector<int> occupant(map.cell_count(), -1);
  for (int i = 0; i < n; ++i) {
    if (!map.is_free(positions[i]) || occupant[map.index(positions[i])] >= 0) {
      throw ContractError("agent positions must be distinct free cells");
    }
    occupant[map.index(positions[i])] = i;
  }

  std::vector<Position>& target = result.positions;
  for (int i = 0; i < n; ++i) {
    const Position next = apply(positions[i], actions[i]);
    target[i] = map.is_free(next) ? next : positions[i];
  }
  auto moving = [&](int i) { return target[i] != positions[i]; };

  // Edge swaps.
  std::vector<int> hold;
  for (int i = 0; i < n; ++i) {
    if (!moving(i)) continue;
    const int j = occupant[map.index(target[i])];
    if (j >= 0 && j != i && moving(j) && target[j] == positions[i]) hold.push_back(i);
  }
  for (int i : hold) target[i] = positions[i];

  // Contested cells; stays claim their own cell, so moving into a held agent
  // is contested as well. Each round holds at least one more agent.
  std::vector<int> claims(map.cell_count(), 0);
  while (true) {
    for (int i = 0; i < n; ++i) ++claims[map.index(target[i])];
    hold.clear();
    for (int i = 0; i < n; ++i) {
      if (moving(i) && claims[map.index(target[i])] >= 2) hold.push_back(i);
    }
    for (int i = 0; i < n; ++i) claims[map.index(target[i])] = 0;
    if (hold.empty()) break;
    for (int i : hold) target[i] = positions[i];
    ++result.iterations;
  }

  for (int i = 0; i < n; ++i) {
    result.degraded[i] = actions[i] != Action::Wait && target[i] == positions[i];
  }
  return result;
}

bool all_at_goals(const Instance& instance, std::span<const Position> positions) {
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] != instance.goals[i]) return false;
  }
  return true;
}

bool is_terminal(const Instance& instance, const EnvState& state, int horizon) {
  return state.t >= horizon || all_at_goals(instance, state.positions);
}

std::pair<EnvState, std::vector<Observation>> reset(const Instance& instance) {
  validate_instance(instance);
  EnvState state{instance.starts, 0};
  auto observations = encode_observations(instance, state);
  return {std::move(state), std::move(observations)};
}

Transition transition(const Instance& instance, const EnvState& state,
                      std::span<const Action> actions, int horizon) {
  if (state.positions.size() != static_cast<std::size_t>(instance.agents())) {
    throw ContractError("state does not match the instance's agent count");
  }
  if (is_terminal(instance, state, horizon)) {
    throw ContractError("step called on a terminal state");
  }
  MoveResolution moves = resolve_moves(instance.map, state.positions, actions);
  Transition out;
  out.rewards.resize(state.positions.size());
  for (std::size_t i = 0; i < state.positions.size(); ++i) {
    out.rewards[i] = goal_reward(state.positions[i] == instance.goals[i],
                                 moves.positions[i] == instance.goals[i]);
  }
  out.next_state.positions = std::move(moves.positions);
  out.next_state.t = state.t + 1;
  out.degraded = std::move(moves.degraded);
  out.terminal = is_terminal(instance, out.next_state, horizon);
  return out;
}

StepResult step(const Instance& instance, const EnvState& state, std::span<const Action> actions,
                int horizon) {
  Transition t = transition(instance, state, actions, horizon);
  StepResult out;
  out.observations = encode_observations(instance, t.next_state);
  out.next_state = std::move(t.next_state);
  out.rewards = std::move(t.rewards);
  out.degraded = std::move(t.degraded);
  out.terminal = t.terminal;
  return out;
}

ConflictCount audit_transition(std::span<const Position> before, std::span<const Position> after) {
  ConflictCount count;
  const std::size_t n = after.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (after[i] == after[j]) ++count.vertex;
      if (after[i] == before[j] && after[j] == before[i] && before[i] != before[j]) ++count.edge;
    }
  }
  return count;
}

std::pair<Trajectory, ConflictReport> replay_plan(const Instance& instance, const Plan& plan,
                                                  int horizon) {
  validate_instance(instance);
  if (plan.size() != static_cast<std::size_t>(instance.agents())) {
    throw ContractError("plan must contain one action sequence per agent");
  }
  const std::size_t length = plan.front().size();
  for (const auto& seq : plan) {
    if (seq.size() != length) throw ContractError("plan sequences must have equal length");
  }
  if (length > static_cast<std::size_t>(horizon)) {
    throw ContractError("plan is longer than the horizon");
  }

  Trajectory trajectory;
  ConflictReport report;
  EnvState state{instance.starts, 0};
  trajectory.states.push_back(state);
  std::vector<Action> joint(instance.agents());
  for (std::size_t t = 0; t < length && !is_terminal(instance, state, horizon); ++t) {
    for (int i = 0; i < instance.agents(); ++i) joint[i] = plan[i][t];
    Transition next = transition(instance, state, joint, horizon);
    const ConflictCount conflicts = audit_transition(state.positions, next.next_state.positions);
    report.vertex_conflicts += conflicts.vertex;
    report.edge_conflicts += conflicts.edge;
    for (int i = 0; i < instance.agents(); ++i) {
      const Position p = next.next_state.positions[i];
      trajectory.records.push_back({next.next_state.t, i, p.x, p.y, joint[i], next.rewards[i],
                                    next.degraded[i] != 0});
      if (next.degraded[i]) report.degradations.push_back({static_cast<int>(t), i, joint[i]});
    }
    state = std::move(next.next_state);
    trajectory.states.push_back(state);
  }
  return {std::move(trajectory), std::move(report)};
}

void write_trajectory(std::ostream& out, const Trajectory& trajectory) {
  out << "t,agent,x,y,action,reward,degraded\n";
  for (const auto& r : trajectory.records) {
    out << r.t << ',' << r.agent << ',' << r.x << ',' << r.y << ',' << action_name(r.action) << ','
        << r.reward << ',' << (r.degraded ? 1 : 0) << '\n';
  }
}

}  // namespace cactus
