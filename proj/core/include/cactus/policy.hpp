#pragma once

#include <memory>
#include <vector>

#include "cactus/env.hpp"
#include "cactus/neural.hpp"
#include "cactus/rng.hpp"

namespace cactus {

// Decentralized controller: one action per agent for the current state.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const Instance& /*instance*/) {}
  virtual std::vector<Action> act(const Instance& instance, const EnvState& state, Rng& rng) = 0;
  // Independent copy for concurrent rollouts.
  virtual std::unique_ptr<Policy> clone() const = 0;
};

// Shared actor network applied to every agent's local observation.
class ActorPolicy final : public Policy {
 public:
  ActorPolicy(const DenseNet<float>& actor, bool greedy) : actor_(&actor), greedy_(greedy) {}
  std::vector<Action> act(const Instance& instance, const EnvState& state, Rng& rng) override;
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ActorPolicy>(*this); }

 private:
  const DenseNet<float>* actor_;
  bool greedy_;
};

// Fixed per-agent action sequences; agents wait once their sequence ends.
class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(Plan plan) : plan_(std::move(plan)) {}
  std::vector<Action> act(const Instance& instance, const EnvState& state, Rng& rng) override;
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ScriptedPolicy>(*this); }

 private:
  Plan plan_;
};

class RandomPolicy final : public Policy {
 public:
  std::vector<Action> act(const Instance& instance, const EnvState& state, Rng& rng) override;
  std::unique_ptr<Policy> clone() const override { return std::make_unique<RandomPolicy>(*this); }
};

// Each agent independently steps to the first neighbor (N, E, S, W order) that
// lowers its BFS distance to goal, ignoring the other agents.
class ShortestPathPolicy final : public Policy {
 public:
  void reset(const Instance& instance) override;
  std::vector<Action> act(const Instance& instance, const EnvState& state, Rng& rng) override;
  std::unique_ptr<Policy> clone() const override {
    return std::make_unique<ShortestPathPolicy>(*this);
  }

 private:
  std::vector<std::vector<int>> to_goal_;
};

// Action that moves `from` one step down the distance field, or Wait.
Action descend(const GridMap& map, const std::vector<int>& distance_to_goal, Position from);

}  // namespace cactus
