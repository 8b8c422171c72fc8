#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cactus/curriculum.hpp"
#include "cactus/env.hpp"
#include "cactus/losses.hpp"
#include "cactus/mixer.hpp"
#include "cactus/neural.hpp"
#include "cactus/rng.hpp"

namespace cactus {

struct TrainConfig {
  int epochs = 5000;
  int episodes_per_epoch = 32;
  int horizon = kDefaultHorizon;
  int agents = 8;
  double gamma = 1.0;
  double clip = 0.2;
  int ppo_passes = 4;
  int critic_passes = 4;
  double entropy_coef = 0.01;
  double learning_rate = 1e-3;
  CriticMode critic_mode = CriticMode::Qmix;
  bool curriculum = true;
  bool normalize_advantages = false;
  // Utilities are learned in units of this many reward steps, Q = scale * net(z).
  // 0 selects the horizon.
  double value_scale = 0.0;
  double threshold = 0.75;
  double deviation_factor = 2.0;
  std::vector<int> map_sizes{10, 40, 80};
  std::vector<double> densities{0.0, 0.1, 0.2, 0.3};
  int oversampled_size = 10;  // drawn with twice the weight of the other sizes
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = hardware concurrency
  int hidden = 64;
  int hypernet_hidden = 128;
  int embed = 32;

  double effective_value_scale() const noexcept {
    return value_scale > 0.0 ? value_scale : static_cast<double>(horizon);
  }

  CurriculumConfig curriculum_config() const {
    return {threshold, deviation_factor, episodes_per_epoch};
  }
};

// Throws InvalidSpecError on any out-of-range field.
void validate_config(const TrainConfig& config);

int global_state_size(int agents) noexcept;
// The mixer conditions on positions and goals only; the time feature reaches
// the critic through the utilities.
int mixer_state_size(int agents) noexcept;

// Per agent (x, y, goal_x, goal_y) scaled by the map extent, then t / T.
void global_state_features_into(const Instance& instance, const EnvState& state, int horizon,
                                float* out);
std::vector<float> global_state_features(const Instance& instance, const EnvState& state,
                                         int horizon);

// The utility network sees the local observation plus the elapsed fraction
// t / T; the actor sees the observation only.
inline constexpr int kUtilityInputSize = kObservationSize + 1;

std::vector<int> actor_widths(int hidden);
std::vector<int> utility_widths(int hidden);
MixerShape mixer_shape(int agents, int hypernet_hidden, int embed);

// Shrinks the hypernetworks' output weights by `shrink` and sets their output
// biases so that Q_tot starts close to the plain sum of the utilities.
void start_additive(MixerNet<float>& mixer, float shrink);

struct ModelBundle {
  CriticMode critic_mode = CriticMode::Qmix;
  DenseNet<float> actor;
  DenseNet<float> utility;
  std::optional<MixerNet<float>> mixer;
  AdamState<float> actor_opt;
  AdamState<float> utility_opt;
  AdamState<float> mixer_opt;

  static ModelBundle create(const TrainConfig& config, Rng& rng);
};

struct ModelSummary {
  std::int64_t actor = 0;
  std::int64_t utility = 0;
  std::int64_t mixer = 0;
  std::int64_t total() const noexcept { return actor + utility + mixer; }
};

ModelSummary summarize(const ModelBundle& models);
std::string format_summary(const ModelBundle& models);

// Experience of one or more episodes. Samples are ordered step-major:
// sample k = step * agents + agent, steps of consecutive episodes concatenated.
struct EpisodeBatch {
  int agents = 0;
  int steps = 0;
  int state_size = 0;
  std::vector<float> observations;  // steps * agents * kObservationSize
  std::vector<std::uint8_t> actions;
  std::vector<float> old_probs;
  std::vector<float> rewards;
  std::vector<float> returns;
  std::vector<float> states;  // steps * state_size

  int samples() const noexcept { return steps * agents; }
  void append(const EpisodeBatch& other);
};

struct EpisodeResult {
  EpisodeBatch batch;
  EnvState final_state;
  double completion = 0.0;
  double mean_return = 0.0;  // mean undiscounted R_0 over agents
};

// Samples a ~ pi(.|z) (or argmax when greedy) until the episode terminates.
EpisodeResult run_episode(const DenseNet<float>& actor, const Instance& instance, int horizon,
                          double gamma, bool greedy, Rng& rng);

std::vector<Action> select_actions(const DenseNet<float>& actor, const Instance& instance,
                                   const EnvState& state, bool greedy, Rng& rng,
                                   std::vector<float>* observations = nullptr,
                                   std::vector<float>* probs = nullptr);

struct UpdateStats {
  double loss_first = 0.0;
  double loss_last = 0.0;
  double entropy = 0.0;
  int clipped = 0;
  int floored = 0;
};

MatrixX<float> observation_matrix(const EpisodeBatch& batch);
// Mixer input: the stored global state without its time row.
MatrixX<float> state_matrix(const EpisodeBatch& batch);
// Observation columns with the step's t / T appended as a last row.
MatrixX<float> utility_input_matrix(const EpisodeBatch& batch);

// `passes` full-batch steps on the factorization loss, with returns divided by
// `value_scale`. The reported losses are in those scaled units.
UpdateStats factorization_update(ModelBundle& models, const EpisodeBatch& batch, int passes,
                                 double value_scale = 1.0);

// Counterfactual advantages under the current utility network and actor,
// with utilities multiplied back by `value_scale`.
std::vector<float> compute_advantages(const ModelBundle& models, const EpisodeBatch& batch,
                                      bool normalize, double value_scale = 1.0);

UpdateStats ppo_update(ModelBundle& models, const EpisodeBatch& batch,
                       const std::vector<float>& advantages, const PpoSettings& settings,
                       int passes);

// Builds the instance of one training episode for the given allocation state.
using InstanceFactory = std::function<Instance(const CurriculumState&, Rng&)>;

// Default distribution: map size drawn with the oversampled size at double
// weight, density uniform, starts uniform, goals within the allocation radius.
InstanceFactory default_instance_factory(const TrainConfig& config);

CurriculumState initial_curriculum(const TrainConfig& config);

struct EpochDiagnostics {
  int epoch = 0;
  int radius = 1;
  bool unbounded = false;
  EpochStats stats;
  bool incremented = false;
  double mean_return = 0.0;
  double ppo_loss = 0.0;
  double factorization_loss = 0.0;
  double entropy = 0.0;
  int samples = 0;
  int clipped = 0;
  int floored = 0;
};

// Runs E episodes (in parallel, per-episode RNG from (seed, epoch, episode)),
// updates critic then actor, then applies the curriculum rule.
EpochDiagnostics train_epoch(ModelBundle& models, const InstanceFactory& factory,
                             CurriculumState& curriculum, const TrainConfig& config, int epoch);

// Calls fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

int resolve_workers(int requested) noexcept;

}  // namespace cactus
