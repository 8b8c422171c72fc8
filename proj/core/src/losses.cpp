#include "cactus/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cactus/error.hpp"

namespace cactus {

const char* critic_mode_name(CriticMode mode) noexcept {
  return mode == CriticMode::Independent ? "independent" : "qmix";
}

template <typename Scalar>
std::vector<Scalar> compute_returns(std::span<const Scalar> rewards, double gamma) {
  std::vector<Scalar> out(rewards.size());
  double running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    if (!std::isfinite(static_cast<double>(rewards[k]))) throw ContractError("non-finite reward");
    running = static_cast<double>(rewards[k]) + gamma * running;
    out[k] = static_cast<Scalar>(running);
  }
  return out;
}

double counterfactual_advantage(std::span<const double> utilities, std::span<const double> probs,
                                double return_to_go) {
  if (utilities.size() != probs.size()) throw ContractError("utility and policy sizes differ");
  double baseline = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) baseline += probs[a] * utilities[a];
  return return_to_go - baseline;
}

template <typename Scalar>
ActorLoss<Scalar> actor_loss(const DenseNet<Scalar>& actor, const MatrixX<Scalar>& observations,
                             std::span<const std::uint8_t> actions,
                             std::span<const Scalar> old_probs, std::span<const Scalar> advantages,
                             const PpoSettings& settings) {
  const Eigen::Index samples = observations.cols();
  if (samples == 0) throw ContractError("empty actor batch");
  if (static_cast<Eigen::Index>(actions.size()) != samples ||
      static_cast<Eigen::Index>(old_probs.size()) != samples ||
      static_cast<Eigen::Index>(advantages.size()) != samples) {
    throw ContractError("actor batch fields have inconsistent lengths");
  }
  GradientTape<Scalar> tape = actor.forward(observations);
  const MatrixX<Scalar>& probs = tape.output();
  const Scalar floor = static_cast<Scalar>(kProbabilityFloor);
  const Scalar lo = static_cast<Scalar>(1.0 - settings.clip);
  const Scalar hi = static_cast<Scalar>(1.0 + settings.clip);
  const Scalar coef = static_cast<Scalar>(settings.entropy_coef);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(samples);

  ActorLoss<Scalar> result;
  MatrixX<Scalar> dprobs = MatrixX<Scalar>::Zero(probs.rows(), samples);
  Scalar surrogate = 0, entropy = 0;
  for (Eigen::Index j = 0; j < samples; ++j) {
    const int a = actions[j];
    if (a >= probs.rows()) throw ContractError("action index out of range");
    Scalar old = old_probs[j];
    if (!(old > floor)) {
      old = floor;
      ++result.floored;
    }
    const Scalar adv = advantages[j];
    const Scalar ratio = probs(a, j) / old;
    const Scalar clipped = std::clamp(ratio, lo, hi);
    surrogate += std::min(ratio * adv, clipped * adv);
    const bool active = adv >= Scalar(0) ? ratio < hi : ratio > lo;
    if (active) {
      dprobs(a, j) -= inv * adv / old;
    } else {
      ++result.clipped;
    }
    for (Eigen::Index k = 0; k < probs.rows(); ++k) {
      const Scalar logp = std::log(std::max(probs(k, j), floor));
      entropy -= probs(k, j) * logp;
      dprobs(k, j) += inv * coef * (logp + Scalar(1));
    }
  }
  result.surrogate = surrogate * inv;
  result.entropy = entropy * inv;
  result.loss = -(result.surrogate + coef * result.entropy);
  result.gradient = actor.backward(tape, dprobs).parameters;
  return result;
}

template <typename Scalar>
CriticLoss<Scalar> critic_loss(const DenseNet<Scalar>& utility, const MixerNet<Scalar>* mixer,
                               const MatrixX<Scalar>& observations,
                               std::span<const std::uint8_t> actions, const MatrixX<Scalar>& states,
                               std::span<const Scalar> returns, int agents, CriticMode mode) {
  const Eigen::Index samples = observations.cols();
  if (agents < 1 || samples == 0 || samples % agents != 0) {
    throw ContractError("critic batch must hold whole steps of every agent");
  }
  if (static_cast<Eigen::Index>(actions.size()) != samples ||
      static_cast<Eigen::Index>(returns.size()) != samples) {
    throw ContractError("critic batch fields have inconsistent lengths");
  }
  const Eigen::Index steps = samples / agents;
  GradientTape<Scalar> tape = utility.forward(observations);
  const MatrixX<Scalar>& q = tape.output();
  MatrixX<Scalar> dq = MatrixX<Scalar>::Zero(q.rows(), samples);
  CriticLoss<Scalar> result;

  if (mode == CriticMode::Independent) {
    const Scalar inv = Scalar(1) / static_cast<Scalar>(samples);
    Scalar total = 0;
    for (Eigen::Index k = 0; k < samples; ++k) {
      const Scalar err = q(actions[k], k) - returns[k];
      total += err * err;
      dq(actions[k], k) = Scalar(2) * err * inv;
    }
    result.loss = total * inv;
  } else {
    if (mixer == nullptr) throw ContractError("qmix critic requires a mixer");
    if (states.cols() != steps) throw ContractError("one state column per step expected");
    MatrixX<Scalar> chosen(agents, steps);
    typename MixerNet<Scalar>::RowVector target(steps);
    for (Eigen::Index s = 0; s < steps; ++s) {
      Scalar sum = 0;
      for (int i = 0; i < agents; ++i) {
        const Eigen::Index k = s * agents + i;
        chosen(i, s) = q(actions[k], k);
        sum += returns[k];
      }
      target(s) = sum;
    }
    auto mix_tape = mixer->forward(chosen, states);
    const typename MixerNet<Scalar>::RowVector err = MixerNet<Scalar>::output(mix_tape) - target;
    const Scalar inv = Scalar(1) / static_cast<Scalar>(steps);
    result.loss = err.squaredNorm() * inv;
    auto mix_grads = mixer->backward(mix_tape, Scalar(2) * inv * err);
    for (Eigen::Index s = 0; s < steps; ++s) {
      for (int i = 0; i < agents; ++i) {
        const Eigen::Index k = s * agents + i;
        dq(actions[k], k) = mix_grads.utilities(i, s);
      }
    }
    result.mixer_gradient = std::move(mix_grads.parameters);
  }
  result.utility_gradient = utility.backward(tape, dq).parameters;
  return result;
}

template std::vector<float> compute_returns<float>(std::span<const float>, double);
template std::vector<double> compute_returns<double>(std::span<const double>, double);
template ActorLoss<float> actor_loss<float>(const DenseNet<float>&, const MatrixX<float>&,
                                            std::span<const std::uint8_t>, std::span<const float>,
                                            std::span<const float>, const PpoSettings&);
template ActorLoss<double> actor_loss<double>(const DenseNet<double>&, const MatrixX<double>&,
                                              std::span<const std::uint8_t>,
                                              std::span<const double>, std::span<const double>,
                                              const PpoSettings&);
template CriticLoss<float> critic_loss<float>(const DenseNet<float>&, const MixerNet<float>*,
                                              const MatrixX<float>&, std::span<const std::uint8_t>,
                                              const MatrixX<float>&, std::span<const float>, int,
                                              CriticMode);
template CriticLoss<double> critic_loss<double>(const DenseNet<double>&, const MixerNet<double>*,
                                                const MatrixX<double>&,
                                                std::span<const std::uint8_t>,
                                                const MatrixX<double>&, std::span<const double>,
                                                int, CriticMode);

}  // namespace cactus
