#include "commands.hpp"

#include <cactus/checkpoint.hpp>
#include <cactus/error.hpp>
#include <cactus/grid_map.hpp>
#include <cactus/harness.hpp>
#include <cactus/learner.hpp>
#include <cactus/verify.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace cactus::cli {

namespace fs = std::filesystem;

namespace {

fs::path default_run_dir(const TrainConfig& c) {
  const char* root = std::getenv("CACTUS_RUN_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / ("run_" + std::string(critic_mode_name(c.critic_mode)) +
                 (c.curriculum ? "_curriculum" : "_nocurriculum") + "_seed" +
                 std::to_string(c.seed));
}

}  // namespace

int cmd_train(const TrainOptions& o) {
  RunSettings settings = o.config_path.empty() ? RunSettings{} : load_run_config(o.config_path);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidSpecError("--set expects key=value, got '" + kv + "'");
    apply_setting(settings, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.epochs) settings.train.epochs = *o.epochs;
  if (o.seed) settings.train.seed = *o.seed;
  if (o.workers) settings.train.workers = *o.workers;
  if (o.critic) apply_setting(settings, "critic", *o.critic);
  if (o.eval_suite) settings.eval_suite = parse_suite(*o.eval_suite);
  if (o.no_curriculum) settings.train.curriculum = false;
  validate_config(settings.train);

  const fs::path dir = o.run_dir.empty() ? default_run_dir(settings.train) : fs::path(o.run_dir);
  std::cout << "config " << config_line(settings) << "\n";
  std::cout << "run_dir " << dir.string() << "\n" << std::flush;
  const RunSummary summary = run_training(
      settings, dir, o.resume, [](const EpochDiagnostics& d, double wall) {
        std::cout << "epoch " << d.epoch << " R_alloc " << radius_text(d.radius, d.unbounded)
                  << " mu " << std::fixed << std::setprecision(3) << d.stats.mean << " sigma "
                  << d.stats.stddev << " return " << std::setprecision(2) << d.mean_return
                  << " ppo " << std::setprecision(4) << d.ppo_loss << " critic "
                  << d.factorization_loss << " entropy " << d.entropy << " samples " << d.samples
                  << " t " << std::setprecision(1) << wall << "s" << std::defaultfloat << "\n"
                  << std::flush;
      });
  std::cout << "finished epochs " << summary.first_epoch << ".." << summary.last_epoch
            << " final R_alloc " << radius_text(summary.curriculum.radius, summary.curriculum.unbounded)
            << " checkpoint " << summary.final_checkpoint.string() << "\n";
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  if (!fs::exists(o.checkpoint)) throw FormatError("checkpoint not found: " + o.checkpoint);
  const LoadedCheckpoint loaded = load_checkpoint(o.checkpoint);
  const DenseNet<float>& actor = loaded.models.actor;
  if (actor.input_size() != kObservationSize || actor.output_size() != kNumActions) {
    throw FormatError("actor expects " + std::to_string(actor.input_size()) + " inputs and " +
                      std::to_string(actor.output_size()) + " outputs; the environment provides " +
                      std::to_string(kObservationSize) + " and " + std::to_string(kNumActions));
  }
  const SuiteSpec spec = parse_suite(o.suite);
  if (spec.empty()) throw InvalidSpecError("empty suite");
  std::cout << "config checkpoint=" << o.checkpoint << " suite=" << format_suite(spec)
            << " mode=" << (o.sampled ? "sampled" : "greedy") << " horizon=" << o.horizon << "\n";
  const auto suite = generate_test_suite(spec);
  const EvalReport report =
      evaluate(ActorPolicy(actor, !o.sampled), spec, suite, o.horizon, o.workers);
  print_eval_table(std::cout, report);
  if (!o.out.empty()) {
    std::ofstream out(o.out, std::ios::trunc);
    write_eval_csv(out, report);
    if (!out) throw FormatError("cannot write " + o.out);
  }
  return 0;
}

int cmd_verify(const VerifyOptions& o) {
  const bool all = !o.igm && !o.gradients && !o.conflicts && !o.oracle;
  std::vector<SuiteResult> results;
  if (all || o.igm) results.push_back(verify_igm(o.trials, o.seed));
  if (all || o.gradients) results.push_back(verify_gradients(o.seeds, o.seed));
  if (all || o.conflicts) results.push_back(verify_conflicts(o.steps, o.seed));
  if (all || o.oracle) results.push_back(verify_oracle(o.instances, o.seed));
  bool ok = true;
  for (const SuiteResult& r : results) {
    std::cout << r.name << ": " << r.passed << "/" << r.total << " passed";
    if (r.name == "gradients") std::cout << ", max relative error " << r.max_error;
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
    ok = ok && r.ok();
  }
  return ok ? 0 : 1;
}

int cmd_map_generate(const MapGenerateOptions& o) {
  const GridMap map = generate_random_map({o.size, o.density, o.seed});
  std::cerr << "generated " << o.size << "x" << o.size << " map, " << map.obstacle_count()
            << " obstacles, seed " << o.seed << "\n";
  if (o.out.empty()) {
    std::cout << serialize_movingai(map);
  } else {
    save_movingai(map, o.out);
  }
  return 0;
}

int cmd_map_parse(const std::vector<std::string>& files) {
  int failures = 0;
  for (const std::string& f : files) {
    try {
      const GridMap map = load_movingai(f);
      std::cout << f << ": ok " << map.width() << "x" << map.height() << "\n";
    } catch (const Error& e) {
      std::cerr << f << ": " << e.what() << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

int cmd_map_inspect(const std::vector<std::string>& files) {
  std::cout << "file,width,height,obstacles,density,free,components\n";
  for (const std::string& f : files) {
    const GridMap map = load_movingai(f);
    std::cout << f << ',' << map.width() << ',' << map.height() << ',' << map.obstacle_count()
              << ',' << static_cast<double>(map.obstacle_count()) / map.cell_count() << ','
              << map.free_count() << ',' << connected_components(map) << "\n";
  }
  return 0;
}

int cmd_summary(const SummaryOptions& o) {
  TrainConfig config;
  config.agents = o.agents;
  config.hidden = o.hidden;
  config.hypernet_hidden = o.hypernet_hidden;
  config.embed = o.embed;
  RunSettings settings;
  settings.train = config;
  apply_setting(settings, "critic", o.critic);
  validate_config(settings.train);
  Rng rng = derive_rng({0});
  const ModelBundle models = ModelBundle::create(settings.train, rng);
  std::cout << format_summary(models);
  std::cout << "reference total 579979 (reported for context only; input and head sizes of the "
               "reference model are not fully determined, so no equality is asserted)\n";
  return 0;
}

}  // namespace cactus::cli
