#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "cactus/grid_map.hpp"

namespace cactus {

enum class Action : std::uint8_t { Wait = 0, North = 1, East = 2, South = 3, West = 4 };

inline constexpr int kNumActions = 5;
inline constexpr int kDefaultHorizon = 256;
inline constexpr int kFieldOfView = 7;
inline constexpr int kFovRadius = kFieldOfView / 2;
inline constexpr int kObservationChannels = 5;
inline constexpr int kObservationSize = kObservationChannels * kFieldOfView * kFieldOfView;

constexpr Position offset(Action a) noexcept {
  switch (a) {
    case Action::North: return {0, -1};
    case Action::East: return {1, 0};
    case Action::South: return {0, 1};
    case Action::West: return {-1, 0};
    case Action::Wait: break;
  }
  return {0, 0};
}

constexpr Position apply(Position p, Action a) noexcept {
  const Position d = offset(a);
  return {p.x + d.x, p.y + d.y};
}

const char* action_name(Action a) noexcept;

struct Instance {
  GridMap map;
  std::vector<Position> starts;
  std::vector<Position> goals;

  int agents() const noexcept { return static_cast<int>(starts.size()); }
};

// Throws InvalidInstanceError unless starts/goals are distinct free cells and
// every goal is reachable from its start.
void validate_instance(const Instance& instance);

struct EnvState {
  std::vector<Position> positions;
  int t = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

// Channel layout of an observation, each a 7x7 image centred on the agent.
enum ObservationChannel : int {
  kObstacleChannel = 0,
  kAgentChannel = 1,
  kAgentGoalChannel = 2,
  kOwnGoalChannel = 3,
  kGoalDistanceChannel = 4,
};

struct Observation {
  std::array<float, kObservationSize> values{};

  static constexpr int flat_index(int channel, int row, int col) noexcept {
    return (channel * kFieldOfView + row) * kFieldOfView + col;
  }
  float at(int channel, int row, int col) const noexcept {
    return values[flat_index(channel, row, col)];
  }
  float& at(int channel, int row, int col) noexcept { return values[flat_index(channel, row, col)]; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Writes the observation of `agent` into `out` (kObservationSize floats).
void encode_observation_into(const Instance& instance, const EnvState& state, int agent,
                             std::span<float> out);
Observation encode_observation(const Instance& instance, const EnvState& state, int agent);
std::vector<Observation> encode_observations(const Instance& instance, const EnvState& state);

struct MoveResolution {
  std::vector<Position> positions;
  // True when the agent asked to move but was held in place.
  std::vector<std::uint8_t> degraded;
  int iterations = 0;
};

// Simultaneous move resolution. Invalid moves, swaps and contested cells all
// turn into waits; the result is independent of agent order.
MoveResolution resolve_moves(const GridMap& map, std::span<const Position> positions,
                             std::span<const Action> actions);

constexpr int goal_reward(bool was_at_goal, bool at_goal) noexcept {
  if (!at_goal) return -1;
  return was_at_goal ? 0 : 1;
}

bool all_at_goals(const Instance& instance, std::span<const Position> positions);
bool is_terminal(const Instance& instance, const EnvState& state, int horizon = kDefaultHorizon);

struct Transition {
  EnvState next_state;
  std::vector<int> rewards;
  std::vector<std::uint8_t> degraded;
  bool terminal = false;
};

struct StepResult {
  EnvState next_state;
  std::vector<int> rewards;
  std::vector<Observation> observations;
  std::vector<std::uint8_t> degraded;
  bool terminal = false;
};

std::pair<EnvState, std::vector<Observation>> reset(const Instance& instance);

// Same as step() without encoding observations.
Transition transition(const Instance& instance, const EnvState& state,
                      std::span<const Action> actions, int horizon = kDefaultHorizon);

StepResult step(const Instance& instance, const EnvState& state, std::span<const Action> actions,
                int horizon = kDefaultHorizon);

// Independent audit of one executed transition against the vertex/edge
// conflict definitions.
struct ConflictCount {
  int vertex = 0;
  int edge = 0;
};
ConflictCount audit_transition(std::span<const Position> before, std::span<const Position> after);

struct TrajectoryRecord {
  int t = 0;  // time index of the resulting state
  int agent = 0;
  int x = 0;
  int y = 0;
  Action action = Action::Wait;
  int reward = 0;
  bool degraded = false;
};

struct Trajectory {
  std::vector<EnvState> states;  // states[0] is the initial state
  std::vector<TrajectoryRecord> records;

  int length() const noexcept { return states.empty() ? 0 : static_cast<int>(states.size()) - 1; }
};

struct Degradation {
  int t = 0;
  int agent = 0;
  Action action = Action::Wait;
};

struct ConflictReport {
  std::vector<Degradation> degradations;
  int vertex_conflicts = 0;
  int edge_conflicts = 0;
};

using Plan = std::vector<std::vector<Action>>;

// Replays per-agent action sequences through step(); stops early if the
// episode becomes terminal.
std::pair<Trajectory, ConflictReport> replay_plan(const Instance& instance, const Plan& plan,
                                                  int horizon = kDefaultHorizon);

// Line-delimited CSV: t,agent,x,y,action,reward,degraded
void write_trajectory(std::ostream& out, const Trajectory& trajectory);

}  // namespace cactus
