#include "cactus/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "cactus/curriculum.hpp"
#include "cactus/env.hpp"
#include "cactus/error.hpp"
#include "cactus/harness.hpp"
#include "cactus/learner.hpp"
#include "cactus/losses.hpp"
#include "cactus/mixer.hpp"
#include "cactus/oracle.hpp"
#include "cactus/policy.hpp"

namespace cactus {

namespace {

using Md = MatrixX<double>;
using Vd = VectorX<double>;

double normal(Rng& rng, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }

Md random_observations(int samples, Rng& rng) {
  Md obs(kObservationSize, samples);
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    obs.data()[i] = uniform_unit(rng) < 0.7 ? 0.0 : uniform_unit(rng);
  }
  return obs;
}

// Norm-wise relative error between an analytic gradient and central
// differences of `loss` over a sampled subset of coordinates.
double gradient_error(const Vd& params, const Vd& analytic,
                      const std::function<double(const Vd&)>& loss, int coordinates, Rng& rng) {
  constexpr double h = 1e-5;
  Vd a(coordinates), n(coordinates);
  Vd probe = params;
  for (int c = 0; c < coordinates; ++c) {
    const Eigen::Index k = uniform_index(rng, static_cast<int>(params.size()));
    probe[k] = params[k] + h;
    const double up = loss(probe);
    probe[k] = params[k] - h;
    const double down = loss(probe);
    probe[k] = params[k];
    a[c] = analytic[k];
    n[c] = (up - down) / (2 * h);
  }
  const double scale = n.norm();
  return scale < 1e-9 ? (a - n).norm() : (a - n).norm() / scale;
}

}  // namespace

SuiteResult verify_igm(int trials, std::uint64_t seed) {
  SuiteResult result{"igm", 0, trials, 0.0, {}};
  const MixerShape shape{2, mixer_state_size(2), 32, 128};
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = derive_rng({seed, 0x69676dull, static_cast<std::uint64_t>(trial)});
    MixerNet<double> mixer = MixerNet<double>::initialized(shape, rng);
    Vd params = mixer.parameters();
    for (Eigen::Index i = 0; i < params.size(); ++i) params[i] += normal(rng, 0.05);
    mixer.set_parameters(params);
    Md q(2, kNumActions);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = normal(rng, 3.0);
    Md state(shape.state_size, 1);
    for (Eigen::Index i = 0; i < state.size(); ++i) state.data()[i] = uniform_unit(rng);

    Md joint(2, kNumActions * kNumActions);
    Md states(shape.state_size, joint.cols());
    for (int a = 0; a < kNumActions; ++a) {
      for (int b = 0; b < kNumActions; ++b) {
        joint(0, a * kNumActions + b) = q(0, a);
        joint(1, a * kNumActions + b) = q(1, b);
        states.col(a * kNumActions + b) = state.col(0);
      }
    }
    const auto total = mixer.predict(joint, states);
    Eigen::Index best = 0;
    total.maxCoeff(&best);
    Eigen::Index local0 = 0, local1 = 0;
    q.row(0).maxCoeff(&local0);
    q.row(1).maxCoeff(&local1);
    if (best == local0 * kNumActions + local1) ++result.passed;
  }
  return result;
}

SuiteResult verify_gradients(int seeds, std::uint64_t seed, double tolerance) {
  SuiteResult result{"gradients", 0, seeds, 0.0, {}};
  constexpr int kAgents = 2;
  constexpr int kSteps = 3;
  constexpr int kSamples = kAgents * kSteps;
  constexpr int kCoordinates = 24;
  const std::vector<int> widths = {kObservationSize, 64, 64, kNumActions};
  const MixerShape shape{kAgents, mixer_state_size(kAgents), 32, 128};
  double worst_actor = 0, worst_utility = 0, worst_mixer = 0, worst_independent = 0;

  for (int s = 0; s < seeds; ++s) {
    Rng rng = derive_rng({seed, 0x67726164ull, static_cast<std::uint64_t>(s)});
    DenseNet<double> actor = DenseNet<double>::initialized(widths, OutputHead::Softmax, rng);
    DenseNet<double> utility =
        DenseNet<double>::initialized(utility_widths(64), OutputHead::Linear, rng);
    MixerNet<double> mixer = MixerNet<double>::initialized(shape, rng);
    {
      Vd p = mixer.parameters();
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += normal(rng, 0.02);
      mixer.set_parameters(p);
    }
    const Md obs = random_observations(kSamples, rng);
    Md critic_in(kUtilityInputSize, kSamples);
    critic_in.topRows(kObservationSize) = obs;
    for (int k = 0; k < kSamples; ++k) critic_in(kObservationSize, k) = uniform_unit(rng);
    Md states(shape.state_size, kSteps);
    for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = uniform_unit(rng);
    std::vector<std::uint8_t> actions(kSamples);
    std::vector<double> returns(kSamples), advantages(kSamples), old_probs(kSamples);
    const Md probs = actor.predict(obs);
    const PpoSettings ppo{0.2, 0.01};
    for (int k = 0; k < kSamples; ++k) {
      actions[k] = static_cast<std::uint8_t>(uniform_index(rng, kNumActions));
      returns[k] = -10.0 + 12.0 * uniform_unit(rng);
      advantages[k] = normal(rng, 2.0);
      // Keep the ratio away from the clip kinks so differences stay smooth.
      double ratio;
      do {
        ratio = 0.5 + uniform_unit(rng);
      } while (std::abs(ratio - (1 - ppo.clip)) < 0.02 || std::abs(ratio - (1 + ppo.clip)) < 0.02);
      old_probs[k] = probs(actions[k], k) / ratio;
    }

    const ActorLoss<double> al = actor_loss<double>(actor, obs, actions, old_probs, advantages, ppo);
    const double e_actor = gradient_error(
        actor.parameters(), al.gradient,
        [&](const Vd& p) {
          DenseNet<double> probe = actor;
          probe.set_parameters(p);
          return actor_loss<double>(probe, obs, actions, old_probs, advantages, ppo).loss;
        },
        kCoordinates, rng);

    const CriticLoss<double> cl = critic_loss<double>(utility, &mixer, critic_in, actions, states,
                                                      returns, kAgents, CriticMode::Qmix);
    const double e_utility = gradient_error(
        utility.parameters(), cl.utility_gradient,
        [&](const Vd& p) {
          DenseNet<double> probe = utility;
          probe.set_parameters(p);
          return critic_loss<double>(probe, &mixer, critic_in, actions, states, returns, kAgents,
                                     CriticMode::Qmix)
              .loss;
        },
        kCoordinates, rng);
    const double e_mixer = gradient_error(
        mixer.parameters(), cl.mixer_gradient,
        [&](const Vd& p) {
          MixerNet<double> probe = mixer;
          probe.set_parameters(p);
          return critic_loss<double>(utility, &probe, critic_in, actions, states, returns, kAgents,
                                     CriticMode::Qmix)
              .loss;
        },
        kCoordinates, rng);

    const CriticLoss<double> il = critic_loss<double>(utility, nullptr, critic_in, actions, states,
                                                      returns, kAgents, CriticMode::Independent);
    const double e_independent = gradient_error(
        utility.parameters(), il.utility_gradient,
        [&](const Vd& p) {
          DenseNet<double> probe = utility;
          probe.set_parameters(p);
          return critic_loss<double>(probe, nullptr, critic_in, actions, states, returns, kAgents,
                                     CriticMode::Independent)
              .loss;
        },
        kCoordinates, rng);

    worst_actor = std::max(worst_actor, e_actor);
    worst_utility = std::max(worst_utility, e_utility);
    worst_mixer = std::max(worst_mixer, e_mixer);
    worst_independent = std::max(worst_independent, e_independent);
    const double worst = std::max({e_actor, e_utility, e_mixer, e_independent});
    result.max_error = std::max(result.max_error, worst);
    if (worst <= tolerance) ++result.passed;
  }
  std::ostringstream detail;
  detail << "actor " << worst_actor << ", utility " << worst_utility << ", mixer " << worst_mixer
         << ", independent " << worst_independent;
  result.detail = detail.str();
  return result;
}

SuiteResult verify_conflicts(int steps, std::uint64_t seed) {
  SuiteResult result{"conflicts", 0, steps, 0.0, {}};
  constexpr int kInstances = 100;
  const int per_instance = std::max(1, (steps + kInstances - 1) / kInstances);
  int executed = 0, vertex = 0, edge = 0, degraded = 0;
  for (int j = 0; executed < steps; ++j) {
    Rng rng = derive_rng({seed, 0x636f6e66ull, static_cast<std::uint64_t>(j)});
    const double density = j % 2 == 0 ? 0.0 : 0.3;
    const SuiteSpec spec{{10, density, 8, 1, rng(), 0}};
    const Instance instance = generate_test_suite(spec).front().instance;
    RandomPolicy policy;
    EnvState state{instance.starts, 0};
    for (int s = 0; s < per_instance && executed < steps; ++s) {
      if (is_terminal(instance, state)) break;
      const std::vector<Action> actions = policy.act(instance, state, rng);
      const Transition tr = transition(instance, state, actions);
      const ConflictCount c = audit_transition(state.positions, tr.next_state.positions);
      bool clean = c.vertex == 0 && c.edge == 0;
      for (int i = 0; i < instance.agents(); ++i) {
        const Position p = tr.next_state.positions[i];
        const Position expected = apply(state.positions[i], actions[i]);
        if (!instance.map.is_free(p)) clean = false;
        if (p != expected && p != state.positions[i]) clean = false;
        degraded += tr.degraded[i];
      }
      vertex += c.vertex;
      edge += c.edge;
      if (clean) ++result.passed;
      ++executed;
      state = tr.next_state;
    }
  }
  result.max_error = vertex + edge;
  result.detail = std::to_string(vertex) + " vertex, " + std::to_string(edge) + " edge conflicts; " +
                  std::to_string(degraded) + " proposals degraded to waits";
  return result;
}

SuiteResult verify_oracle(int instances, std::uint64_t seed) {
  SuiteResult result{"oracle", 0, 0, 0.0, {}};
  int equalities = 0;
  for (int j = 0; j < instances; ++j) {
    Rng rng = derive_rng({seed, 0x6f72636cull, static_cast<std::uint64_t>(j)});
    const double density = std::array{0.0, 0.1, 0.2, 0.3}[j % 4];
    const SuiteSpec spec{{10, density, 1, 1, rng(), 0}};
    const Instance instance = generate_test_suite(spec).front().instance;
    ShortestPathPolicy policy;
    const EpisodeOutcome out = run_policy(policy, instance, kDefaultHorizon, rng);
    ++result.total;
    if (out.completion == 1.0 && out.flowtime == *flowtime_lower_bound(instance)) ++result.passed;
  }
  for (int j = 0; j < instances / 2; ++j) {
    Rng rng = derive_rng({seed, 0x6f726332ull, static_cast<std::uint64_t>(j)});
    const GridMap map = GridMap::empty(5, 5);
    Instance instance;
    instance.map = map;
    instance.starts = sample_starts(map, 2, rng);
    instance.goals = sample_goals(map, instance.starts, map_diameter(map), rng);
    const OracleResult oracle = optimal_flowtime(instance);
    const int bound = *flowtime_lower_bound(instance);
    const auto [trajectory, report] = replay_plan(instance, oracle.plan);
    (void)trajectory;

    // Independent shortest-path plans: if they never interact, the bound is tight.
    ShortestPathPolicy independent;
    independent.reset(instance);
    EnvState state{instance.starts, 0};
    bool interacted = false;
    while (!is_terminal(instance, state)) {
      const Transition tr = transition(instance, state, independent.act(instance, state, rng));
      for (auto d : tr.degraded) interacted |= d != 0;
      state = tr.next_state;
    }
    bool ok = oracle.solved() && oracle.flowtime >= bound && report.degradations.empty() &&
              report.vertex_conflicts == 0 && report.edge_conflicts == 0;
    if (!interacted) {
      ok = ok && oracle.flowtime == bound;
      ++equalities;
    }
    ++result.total;
    if (ok) ++result.passed;
  }
  result.detail = std::to_string(equalities) + " non-interacting pairs checked for equality";
  return result;
}

}  // namespace cactus
