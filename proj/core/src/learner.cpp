#include "cactus/learner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "cactus/error.hpp"

namespace cactus {

namespace {
constexpr float kAdditiveShrink = 0.1f;
}  // namespace

void validate_config(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidSpecError(what);
  };
  require(c.epochs >= 1, "epochs must be positive");
  require(c.episodes_per_epoch >= 2, "episodes_per_epoch must be at least 2");
  require(c.horizon >= 1, "horizon must be positive");
  require(c.agents >= 1, "agents must be positive");
  require(c.gamma > 0.0 && c.gamma <= 1.0, "gamma must lie in (0, 1]");
  require(c.clip >= 0.0 && c.clip < 1.0, "clip must lie in [0, 1)");
  require(c.ppo_passes >= 0 && c.critic_passes >= 0, "pass counts must be non-negative");
  require(c.entropy_coef >= 0.0, "entropy_coef must be non-negative");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.threshold > 0.0 && c.threshold < 1.0, "threshold must lie in (0, 1)");
  require(c.deviation_factor > 0.0, "deviation_factor must be positive");
  require(!c.map_sizes.empty() && !c.densities.empty(), "map_sizes and densities must be non-empty");
  for (int k : c.map_sizes) require(k >= 2, "map sizes must be at least 2");
  for (double d : c.densities) require(d >= 0.0 && d < 1.0, "densities must lie in [0, 1)");
  require(c.value_scale >= 0.0, "value_scale must be non-negative");
  require(c.workers >= 0, "workers must be non-negative");
  require(c.hidden >= 1 && c.hypernet_hidden >= 1 && c.embed >= 1, "layer widths must be positive");
}

int global_state_size(int agents) noexcept { return 4 * agents + 1; }

int mixer_state_size(int agents) noexcept { return 4 * agents; }

void global_state_features_into(const Instance& instance, const EnvState& state, int horizon,
                                float* out) {
  const float w = static_cast<float>(instance.map.width());
  const float h = static_cast<float>(instance.map.height());
  for (int i = 0; i < instance.agents(); ++i) {
    *out++ = static_cast<float>(state.positions[i].x) / w;
    *out++ = static_cast<float>(state.positions[i].y) / h;
    *out++ = static_cast<float>(instance.goals[i].x) / w;
    *out++ = static_cast<float>(instance.goals[i].y) / h;
  }
  *out = static_cast<float>(state.t) / static_cast<float>(horizon);
}

std::vector<float> global_state_features(const Instance& instance, const EnvState& state,
                                         int horizon) {
  std::vector<float> out(global_state_size(instance.agents()));
  global_state_features_into(instance, state, horizon, out.data());
  return out;
}

std::vector<int> actor_widths(int hidden) {
  return {kObservationSize, hidden, hidden, kNumActions};
}

std::vector<int> utility_widths(int hidden) {
  return {kUtilityInputSize, hidden, hidden, kNumActions};
}

MixerShape mixer_shape(int agents, int hypernet_hidden, int embed) {
  return {agents, mixer_state_size(agents), embed, hypernet_hidden};
}

void start_additive(MixerNet<float>& mixer, float shrink) {
  // h_0 = elu(sum_i q_i + N) stays in the linear branch for utilities above -1
  // (returns are scaled by the horizon), and b2 = -N removes the offset again.
  const MixerShape& shape = mixer.shape();
  const float n = static_cast<float>(shape.agents);
  for (int which = 0; which < 4; ++which) {
    DenseNet<float>& net = mixer.mutable_hypernet(which);
    VectorX<float>& p = net.mutable_parameters();
    const int last = net.layer_count() - 1;
    const Eigen::Index bias = net.bias_offset(last);
    p.segment(net.weight_offset(last), bias - net.weight_offset(last)) *= shrink;
    p.segment(bias, net.output_size()).setZero();
    if (which == 0) {
      for (int i = 0; i < shape.agents; ++i) p[bias + i * shape.embed] = 1.0f;
    }
    if (which == 1) p[bias] = n;
    if (which == 2) p[bias] = 1.0f;
    if (which == 3) p[bias] = -n;
  }
}

ModelBundle ModelBundle::create(const TrainConfig& config, Rng& rng) {
  ModelBundle m;
  m.critic_mode = config.critic_mode;
  m.actor = DenseNet<float>::initialized(actor_widths(config.hidden), OutputHead::Softmax, rng);
  m.utility = DenseNet<float>::initialized(utility_widths(config.hidden), OutputHead::Linear, rng);
  m.actor_opt = AdamState<float>::for_size(m.actor.parameter_count(), config.learning_rate);
  m.utility_opt = AdamState<float>::for_size(m.utility.parameter_count(), config.learning_rate);
  if (config.critic_mode == CriticMode::Qmix) {
    m.mixer = MixerNet<float>::initialized(
        mixer_shape(config.agents, config.hypernet_hidden, config.embed), rng);
    start_additive(*m.mixer, kAdditiveShrink);
    m.mixer_opt = AdamState<float>::for_size(m.mixer->parameter_count(), config.learning_rate);
  }
  return m;
}

ModelSummary summarize(const ModelBundle& models) {
  ModelSummary s;
  s.actor = models.actor.parameter_count();
  s.utility = models.utility.parameter_count();
  s.mixer = models.mixer ? models.mixer->parameter_count() : 0;
  return s;
}

namespace {

std::string widths_text(const std::vector<int>& widths) {
  std::string out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) out += "-";
    out += std::to_string(widths[i]);
  }
  return out;
}

}  // namespace

std::string format_summary(const ModelBundle& models) {
  const ModelSummary s = summarize(models);
  std::ostringstream out;
  out << "actor    " << widths_text(models.actor.widths()) << " elu/softmax  " << s.actor << "\n";
  out << "utility  " << widths_text(models.utility.widths()) << " elu/linear   " << s.utility
      << "\n";
  if (models.mixer) {
    const MixerShape& shape = models.mixer->shape();
    out << "mixer    agents=" << shape.agents << " state=" << shape.state_size
        << " embed=" << shape.embed << " hypernet=" << shape.hypernet_hidden << "x2  " << s.mixer
        << "\n";
  } else {
    out << "mixer    none (independent critic)  0\n";
  }
  out << "total trainable parameters " << s.total() << "\n";
  return out.str();
}

void EpisodeBatch::append(const EpisodeBatch& other) {
  if (other.steps == 0) return;
  if (steps == 0 && observations.empty()) {
    agents = other.agents;
    state_size = other.state_size;
  } else if (agents != other.agents || state_size != other.state_size) {
    throw ContractError("cannot merge batches with different agent counts");
  }
  steps += other.steps;
  observations.insert(observations.end(), other.observations.begin(), other.observations.end());
  actions.insert(actions.end(), other.actions.begin(), other.actions.end());
  old_probs.insert(old_probs.end(), other.old_probs.begin(), other.old_probs.end());
  rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
  returns.insert(returns.end(), other.returns.begin(), other.returns.end());
  states.insert(states.end(), other.states.begin(), other.states.end());
}

std::vector<Action> select_actions(const DenseNet<float>& actor, const Instance& instance,
                                   const EnvState& state, bool greedy, Rng& rng,
                                   std::vector<float>* observations, std::vector<float>* probs) {
  const int n = instance.agents();
  MatrixX<float> input(kObservationSize, n);
  for (int i = 0; i < n; ++i) {
    encode_observation_into(instance, state, i,
                            std::span<float>(input.col(i).data(), kObservationSize));
  }
  const MatrixX<float> p = actor.predict(input);
  std::vector<Action> actions(n);
  for (int i = 0; i < n; ++i) {
    int choice = 0;
    if (greedy) {
      for (int a = 1; a < kNumActions; ++a) {
        if (p(a, i) > p(choice, i)) choice = a;
      }
    } else {
      const double u = uniform_unit(rng);
      double cumulative = 0.0;
      choice = kNumActions - 1;
      for (int a = 0; a < kNumActions; ++a) {
        cumulative += p(a, i);
        if (u < cumulative) {
          choice = a;
          break;
        }
      }
    }
    actions[i] = static_cast<Action>(choice);
    if (probs) probs->push_back(p(choice, i));
  }
  if (observations) observations->insert(observations->end(), input.data(), input.data() + input.size());
  return actions;
}

EpisodeResult run_episode(const DenseNet<float>& actor, const Instance& instance, int horizon,
                          double gamma, bool greedy, Rng& rng) {
  validate_instance(instance);
  const int n = instance.agents();
  EpisodeResult result;
  EpisodeBatch& b = result.batch;
  b.agents = n;
  b.state_size = global_state_size(n);
  EnvState state{instance.starts, 0};
  while (!is_terminal(instance, state, horizon)) {
    const std::size_t at = b.states.size();
    b.states.resize(at + b.state_size);
    global_state_features_into(instance, state, horizon, b.states.data() + at);
    const std::vector<Action> actions =
        select_actions(actor, instance, state, greedy, rng, &b.observations, &b.old_probs);
    Transition tr = transition(instance, state, actions, horizon);
    for (int i = 0; i < n; ++i) {
      b.actions.push_back(static_cast<std::uint8_t>(actions[i]));
      b.rewards.push_back(static_cast<float>(tr.rewards[i]));
    }
    state = std::move(tr.next_state);
    ++b.steps;
  }
  b.returns.assign(b.rewards.size(), 0.0f);
  std::vector<double> running(n, 0.0);
  for (int s = b.steps - 1; s >= 0; --s) {
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(s) * n + i;
      running[i] = b.rewards[k] + gamma * running[i];
      b.returns[k] = static_cast<float>(running[i]);
    }
  }
  if (b.steps > 0) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += b.returns[i];
    result.mean_return = total / n;
  }
  result.completion = completion_rate(instance, state);
  result.final_state = std::move(state);
  return result;
}

MatrixX<float> observation_matrix(const EpisodeBatch& batch) {
  return Eigen::Map<const MatrixX<float>>(batch.observations.data(), kObservationSize,
                                          batch.samples());
}

MatrixX<float> state_matrix(const EpisodeBatch& batch) {
  return Eigen::Map<const MatrixX<float>>(batch.states.data(), batch.state_size, batch.steps)
      .topRows(batch.state_size - 1);
}

MatrixX<float> utility_input_matrix(const EpisodeBatch& batch) {
  MatrixX<float> input(kUtilityInputSize, batch.samples());
  input.topRows(kObservationSize) = observation_matrix(batch);
  for (int k = 0; k < batch.samples(); ++k) {
    const int step = k / batch.agents;
    input(kObservationSize, k) =
        batch.states[static_cast<std::size_t>(step + 1) * batch.state_size - 1];
  }
  return input;
}

namespace {

void step_mixer(MixerNet<float>& mixer, const VectorX<float>& grad, AdamState<float>& opt) {
  VectorX<float> params = mixer.parameters();
  adam_step(params, grad, opt);
  mixer.set_parameters(params);
}

}  // namespace

UpdateStats factorization_update(ModelBundle& models, const EpisodeBatch& batch, int passes,
                                 double value_scale) {
  UpdateStats stats;
  if (batch.samples() == 0 || passes == 0) return stats;
  if (!(value_scale > 0.0)) throw ContractError("value scale must be positive");
  std::vector<float> targets(batch.returns);
  const float inv = static_cast<float>(1.0 / value_scale);
  for (float& r : targets) r *= inv;
  const MatrixX<float> obs = utility_input_matrix(batch);
  const MatrixX<float> states = state_matrix(batch);
  const MixerNet<float>* mixer = models.mixer ? &*models.mixer : nullptr;
  if (models.critic_mode == CriticMode::Qmix && mixer == nullptr) {
    throw ContractError("qmix critic without a mixer");
  }
  for (int pass = 0; pass < passes; ++pass) {
    CriticLoss<float> loss = critic_loss<float>(models.utility, mixer, obs, batch.actions, states,
                                                targets, batch.agents, models.critic_mode);
    if (pass == 0) stats.loss_first = loss.loss;
    stats.loss_last = loss.loss;
    adam_step(models.utility.mutable_parameters(), loss.utility_gradient, models.utility_opt);
    if (models.critic_mode == CriticMode::Qmix) {
      step_mixer(*models.mixer, loss.mixer_gradient, models.mixer_opt);
    }
  }
  return stats;
}

std::vector<float> compute_advantages(const ModelBundle& models, const EpisodeBatch& batch,
                                      bool normalize, double value_scale) {
  const int samples = batch.samples();
  std::vector<float> adv(samples);
  if (samples == 0) return adv;
  const MatrixX<float> obs = observation_matrix(batch);
  const MatrixX<float> q = models.utility.predict(utility_input_matrix(batch));
  const MatrixX<float> p = models.actor.predict(obs);
  for (int k = 0; k < samples; ++k) {
    adv[k] = static_cast<float>(batch.returns[k] - value_scale * p.col(k).dot(q.col(k)));
  }
  if (normalize && samples > 1) {
    double mean = 0.0, sq = 0.0;
    for (float a : adv) mean += a;
    mean /= samples;
    for (float a : adv) sq += (a - mean) * (a - mean);
    const double sd = std::sqrt(sq / (samples - 1));
    for (float& a : adv) a = static_cast<float>((a - mean) / (sd + 1e-8));
  }
  return adv;
}

UpdateStats ppo_update(ModelBundle& models, const EpisodeBatch& batch,
                       const std::vector<float>& advantages, const PpoSettings& settings,
                       int passes) {
  UpdateStats stats;
  if (batch.samples() == 0 || passes == 0) return stats;
  const MatrixX<float> obs = observation_matrix(batch);
  for (int pass = 0; pass < passes; ++pass) {
    ActorLoss<float> loss = actor_loss<float>(models.actor, obs, batch.actions, batch.old_probs,
                                              advantages, settings);
    if (pass == 0) {
      stats.loss_first = loss.loss;
      stats.entropy = loss.entropy;
      stats.floored = loss.floored;
    }
    stats.loss_last = loss.loss;
    stats.clipped = loss.clipped;
    adam_step(models.actor.mutable_parameters(), loss.gradient, models.actor_opt);
  }
  return stats;
}

CurriculumState initial_curriculum(const TrainConfig& config) {
  if (!config.curriculum) return CurriculumState::infinite();
  const int largest = *std::max_element(config.map_sizes.begin(), config.map_sizes.end());
  return CurriculumState::bounded(largest - 1);
}

InstanceFactory default_instance_factory(const TrainConfig& config) {
  std::vector<int> sizes;
  for (int k : config.map_sizes) {
    sizes.push_back(k);
    if (k == config.oversampled_size) sizes.push_back(k);
  }
  return [sizes, densities = config.densities, agents = config.agents](
             const CurriculumState& curriculum, Rng& rng) {
    const int size = sizes[uniform_index(rng, static_cast<int>(sizes.size()))];
    const double density = densities[uniform_index(rng, static_cast<int>(densities.size()))];
    const GridMap map = generate_random_map({size, density, rng()});
    const int radius = curriculum.effective_radius(map);
    constexpr int kAttempts = 16;
    for (int attempt = 1;; ++attempt) {
      std::vector<Position> starts = sample_starts(map, agents, rng);
      try {
        std::vector<Position> goals = sample_goals(map, starts, radius, rng);
        return Instance{map, std::move(starts), std::move(goals)};
      } catch (const AllocationError&) {
        if (attempt == kAttempts) throw;
      }
    }
  };
}

int resolve_workers(int requested) noexcept {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::min(resolve_workers(workers), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

EpochDiagnostics train_epoch(ModelBundle& models, const InstanceFactory& factory,
                             CurriculumState& curriculum, const TrainConfig& config, int epoch) {
  const int episodes = config.episodes_per_epoch;
  std::vector<EpisodeResult> results(episodes);
  parallel_for(episodes, config.workers, [&](int e) {
    Rng rng = derive_rng({config.seed, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(e)});
    const Instance instance = factory(curriculum, rng);
    results[e] = run_episode(models.actor, instance, config.horizon, config.gamma, false, rng);
  });

  EpisodeBatch batch;
  double return_sum = 0.0;
  for (const EpisodeResult& r : results) {
    batch.append(r.batch);
    curriculum.epoch_rates.push_back(r.completion);
    return_sum += r.mean_return;
  }
  results.clear();

  EpochDiagnostics diag;
  diag.epoch = epoch;
  diag.samples = batch.samples();
  diag.mean_return = return_sum / episodes;
  if (batch.samples() > 0) {
    const double scale = config.effective_value_scale();
    const UpdateStats critic = factorization_update(models, batch, config.critic_passes, scale);
    const std::vector<float> adv =
        compute_advantages(models, batch, config.normalize_advantages, scale);
    const UpdateStats actor =
        ppo_update(models, batch, adv, {config.clip, config.entropy_coef}, config.ppo_passes);
    diag.factorization_loss = critic.loss_first;
    diag.ppo_loss = actor.loss_first;
    diag.entropy = actor.entropy;
    diag.clipped = actor.clipped;
    diag.floored = actor.floored;
  }
  const EpochUpdate update = epoch_update(curriculum, config.curriculum_config());
  diag.radius = update.radius;
  diag.unbounded = curriculum.unbounded;
  diag.stats = update.stats;
  diag.incremented = update.incremented;
  return diag;
}

}  // namespace cactus
