#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cactus/mixer.hpp"
#include "cactus/neural.hpp"

namespace cactus {

enum class CriticMode : std::uint8_t { Qmix = 0, Independent = 1 };

const char* critic_mode_name(CriticMode mode) noexcept;

// Discounted suffix sums R_t = r_t + gamma * R_{t+1}, R_T = 0.
template <typename Scalar>
std::vector<Scalar> compute_returns(std::span<const Scalar> rewards, double gamma = 1.0);

// R_t minus the policy-weighted utility, sum_a pi(a) Q(a).
double counterfactual_advantage(std::span<const double> utilities, std::span<const double> probs,
                                double return_to_go);

inline constexpr double kProbabilityFloor = 1e-8;

struct PpoSettings {
  double clip = 0.2;
  double entropy_coef = 0.01;
};

template <typename Scalar>
struct ActorLoss {
  Scalar loss = 0;       // -(surrogate + entropy_coef * entropy)
  Scalar surrogate = 0;  // mean clipped surrogate
  Scalar entropy = 0;    // mean policy entropy
  VectorX<Scalar> gradient;
  int clipped = 0;  // samples whose ratio was cut off by the clip
  int floored = 0;  // samples whose stored probability hit kProbabilityFloor
};

// Clipped PPO objective over a batch of samples (columns of `observations`),
// differentiated with respect to the actor parameters. `old_probs` holds the
// collection-time probability of each taken action.
template <typename Scalar>
ActorLoss<Scalar> actor_loss(const DenseNet<Scalar>& actor, const MatrixX<Scalar>& observations,
                             std::span<const std::uint8_t> actions,
                             std::span<const Scalar> old_probs, std::span<const Scalar> advantages,
                             const PpoSettings& settings);

template <typename Scalar>
struct CriticLoss {
  Scalar loss = 0;
  VectorX<Scalar> utility_gradient;
  VectorX<Scalar> mixer_gradient;  // empty in independent mode
};

// Mean squared factorization error. Samples are grouped by time step: sample
// k = step * agents + agent, and `states` has one column per step.
//   Qmix:        (Psi(Q_1(a_1), ..., Q_N(a_N); s) - sum_i R_i)^2 averaged over steps
//   Independent: (Q_i(a_i) - R_i)^2 averaged over samples
template <typename Scalar>
CriticLoss<Scalar> critic_loss(const DenseNet<Scalar>& utility, const MixerNet<Scalar>* mixer,
                               const MatrixX<Scalar>& observations,
                               std::span<const std::uint8_t> actions, const MatrixX<Scalar>& states,
                               std::span<const Scalar> returns, int agents, CriticMode mode);

}  // namespace cactus
