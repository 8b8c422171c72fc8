#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cactus/env.hpp"
#include "cactus/learner.hpp"
#include "cactus/policy.hpp"

namespace cactus {

// One (K, delta, N) configuration of a seeded test suite. goal_radius = 0 places
// goals anywhere on the map; a positive value bounds the Chebyshev distance.
struct SuiteEntry {
  int size = 10;
  double density = 0.0;
  int agents = 8;
  int count = 100;
  std::uint64_t seed = 0;
  int goal_radius = 0;

  friend bool operator==(const SuiteEntry&, const SuiteEntry&) = default;
};

using SuiteSpec = std::vector<SuiteEntry>;

// "K=10,delta=0,N=4,count=20,seed=7[,radius=3]"; several entries separated by ';'.
SuiteEntry parse_suite_entry(const std::string& text);
SuiteSpec parse_suite(const std::string& text);
std::string format_suite_entry(const SuiteEntry& entry);
std::string format_suite(const SuiteSpec& suite);

struct SuiteInstance {
  std::size_t entry = 0;  // index into the SuiteSpec
  Instance instance;
};

// Throws InvalidSpecError when an entry cannot be populated.
std::vector<SuiteInstance> generate_test_suite(const SuiteSpec& spec);

struct EpisodeOutcome {
  std::size_t entry = 0;
  double completion = 0.0;
  int flowtime = 0;     // arrival time of each agent, T if not on its goal at the end
  int lower_bound = 0;  // sum of BFS distances
  int length = 0;
};

// Greedy or sampled rollout of a policy for at most `horizon` steps.
EpisodeOutcome run_policy(Policy& policy, const Instance& instance, int horizon, Rng& rng);

struct EvalRow {
  SuiteEntry entry;
  double mean_completion = 0.0;
  double mean_flowtime = 0.0;
  int episodes = 0;
  double completion_ci95 = 0.0;  // half-width, normal approximation over instances
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EpisodeOutcome> episodes;

  double mean_completion() const noexcept;
};

// One rollout per instance. Sampled rollouts draw from (seed, instance index).
EvalReport evaluate(const Policy& policy, const SuiteSpec& spec,
                    const std::vector<SuiteInstance>& suite, int horizon = kDefaultHorizon,
                    int workers = 1);

void write_eval_csv(std::ostream& out, const EvalReport& report);
void print_eval_table(std::ostream& out, const EvalReport& report);

// Everything a training run needs besides the TrainConfig itself.
struct RunSettings {
  TrainConfig train;
  SuiteSpec eval_suite;
  int eval_interval = 0;        // 0 = only at the end
  int checkpoint_interval = 0;  // 0 = only at the end
};

// Plain "key = value" lines; '#' starts a comment. Unknown keys are rejected.
RunSettings parse_run_config(const std::string& text);
RunSettings load_run_config(const std::filesystem::path& path);
// Applies one key/value to the settings; throws InvalidSpecError.
void apply_setting(RunSettings& settings, const std::string& key, const std::string& value);
std::string format_run_config(const RunSettings& settings);
// One-line rendering of the effective configuration.
std::string config_line(const RunSettings& settings);

struct RunSummary {
  std::filesystem::path directory;
  int first_epoch = 1;
  int last_epoch = 0;
  CurriculumState curriculum;
  std::filesystem::path final_checkpoint;
};

using EpochCallback = std::function<void(const EpochDiagnostics&, double wallclock_s)>;

// Runs epochs into `directory`. With `resume`, continues after the newest
// checkpoint found there.
RunSummary run_training(const RunSettings& settings, const std::filesystem::path& directory,
                        bool resume = false, const EpochCallback& on_epoch = {});

std::string radius_text(int radius, bool unbounded);

}  // namespace cactus
