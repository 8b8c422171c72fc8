#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cactus::cli {

struct TrainOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> critic;
  std::optional<std::string> eval_suite;
  bool no_curriculum = false;
  bool resume = false;
  std::string run_dir;
};

struct EvalOptions {
  std::string checkpoint;
  std::string suite;
  std::string out;
  bool sampled = false;
  int horizon = 256;
  int workers = 0;
};

struct VerifyOptions {
  bool igm = false;
  bool gradients = false;
  bool conflicts = false;
  bool oracle = false;
  int trials = 1000;
  int seeds = 100;
  int steps = 10000;
  int instances = 100;
  std::uint64_t seed = 1;
};

struct MapGenerateOptions {
  int size = 10;
  double density = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct SummaryOptions {
  int agents = 8;
  int hidden = 64;
  int hypernet_hidden = 128;
  int embed = 32;
  std::string critic = "qmix";
};

int cmd_train(const TrainOptions& options);
int cmd_eval(const EvalOptions& options);
int cmd_verify(const VerifyOptions& options);
int cmd_map_generate(const MapGenerateOptions& options);
int cmd_map_parse(const std::vector<std::string>& files);
int cmd_map_inspect(const std::vector<std::string>& files);
int cmd_summary(const SummaryOptions& options);

}  // namespace cactus::cli
