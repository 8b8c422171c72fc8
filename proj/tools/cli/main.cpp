#include <CLI11.hpp>
#include <cactus/error.hpp>
#include <exception>
#include <iostream>

#include "commands.hpp"

using namespace cactus::cli;

int main(int argc, char** argv) {
  CLI::App app{"cactus: curriculum-driven multi-agent path finding trainer"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a policy, writing a run directory");
  train_cmd->add_option("--config", train.config_path, "key = value run config file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--set", train.overrides, "override a config key (key=value)");
  train_cmd->add_option("--epochs", train.epochs, "number of epochs");
  train_cmd->add_option("--seed", train.seed, "run seed");
  train_cmd->add_option("--workers", train.workers, "rollout threads (0 = all cores)");
  train_cmd->add_option("--critic", train.critic, "qmix or independent");
  train_cmd->add_option("--eval-suite", train.eval_suite, "suite evaluated during training");
  train_cmd->add_flag("--no-curriculum", train.no_curriculum, "goals anywhere from the start");
  train_cmd->add_flag("--resume", train.resume, "continue from the newest checkpoint");
  train_cmd->add_option("--run-dir", train.run_dir,
                        "output directory (default: $CACTUS_RUN_ROOT or ./runs)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a seeded suite");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--suite", eval.suite, "K=..,delta=..,N=..,count=..,seed=..[,radius=..]")
      ->required();
  eval_cmd->add_option("--out", eval.out, "write the report as CSV");
  eval_cmd->add_flag("--sampled", eval.sampled, "sample actions instead of argmax");
  eval_cmd->add_option("--horizon", eval.horizon, "episode length limit");
  eval_cmd->add_option("--workers", eval.workers, "evaluation threads (0 = all cores)");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "run property suites (all when none selected)");
  verify_cmd->add_flag("--igm", verify.igm, "joint argmax of the mixer equals local argmaxes");
  verify_cmd->add_flag("--gradients", verify.gradients, "analytic vs finite-difference gradients");
  verify_cmd->add_flag("--conflicts", verify.conflicts, "conflict audit of random rollouts");
  verify_cmd->add_flag("--oracle", verify.oracle, "BFS and exhaustive-search equivalences");
  verify_cmd->add_option("--trials", verify.trials, "IGM draws");
  verify_cmd->add_option("--seeds", verify.seeds, "gradient-check seeds");
  verify_cmd->add_option("--steps", verify.steps, "audited environment steps");
  verify_cmd->add_option("--instances", verify.instances, "oracle instances");
  verify_cmd->add_option("--seed", verify.seed, "base seed");

  auto* map_cmd = app.add_subcommand("map", "map tooling");
  map_cmd->require_subcommand(1);
  MapGenerateOptions gen;
  auto* gen_cmd = map_cmd->add_subcommand("generate", "write a random map in MovingAI format");
  gen_cmd->add_option("--size", gen.size, "side length K");
  gen_cmd->add_option("--density", gen.density, "obstacle fraction in [0, 1)");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output file (default: stdout)");
  std::vector<std::string> parse_files, inspect_files;
  auto* parse_cmd = map_cmd->add_subcommand("parse", "validate MovingAI map files");
  parse_cmd->add_option("files", parse_files, "map files")->required();
  auto* inspect_cmd = map_cmd->add_subcommand("inspect", "print density and component counts");
  inspect_cmd->add_option("files", inspect_files, "map files")->required();

  SummaryOptions summary;
  auto* summary_cmd = app.add_subcommand("summary", "print model shapes and parameter counts");
  summary_cmd->add_option("--agents", summary.agents, "agents seen by the mixer");
  summary_cmd->add_option("--hidden", summary.hidden, "actor/utility hidden width");
  summary_cmd->add_option("--hypernet-hidden", summary.hypernet_hidden, "hypernetwork width");
  summary_cmd->add_option("--embed", summary.embed, "mixing embedding size");
  summary_cmd->add_option("--critic", summary.critic, "qmix or independent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return cmd_train(train);
    if (*eval_cmd) return cmd_eval(eval);
    if (*verify_cmd) return cmd_verify(verify);
    if (*gen_cmd) return cmd_map_generate(gen);
    if (*parse_cmd) return cmd_map_parse(parse_files);
    if (*inspect_cmd) return cmd_map_inspect(inspect_files);
    if (*summary_cmd) return cmd_summary(summary);
  } catch (const cactus::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
