#include "cactus/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "cactus/checkpoint.hpp"
#include "cactus/curriculum.hpp"
#include "cactus/error.hpp"
#include "cactus/oracle.hpp"

namespace cactus {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidSpecError("invalid value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw InvalidSpecError("invalid boolean '" + text + "' for " + key);
}

std::string number_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += short_number(static_cast<double>(values[i]));
  }
  return out;
}

}  // namespace

std::string radius_text(int radius, bool unbounded) {
  return unbounded ? "inf" : std::to_string(radius);
}

SuiteEntry parse_suite_entry(const std::string& text) {
  SuiteEntry entry;
  bool have_size = false, have_density = false, have_agents = false;
  for (const std::string& field : split(text, ',')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw InvalidSpecError("suite field '" + field + "' lacks '='");
    const std::string key = trim(field.substr(0, eq));
    const std::string value = trim(field.substr(eq + 1));
    if (key == "K" || key == "size") {
      entry.size = parse_number<int>(key, value);
      have_size = true;
    } else if (key == "delta" || key == "density") {
      entry.density = parse_number<double>(key, value);
      have_density = true;
    } else if (key == "N" || key == "agents") {
      entry.agents = parse_number<int>(key, value);
      have_agents = true;
    } else if (key == "count") {
      entry.count = parse_number<int>(key, value);
    } else if (key == "seed") {
      entry.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "radius") {
      entry.goal_radius = parse_number<int>(key, value);
    } else {
      throw InvalidSpecError("unknown suite field '" + key + "'");
    }
  }
  if (!have_size || !have_density || !have_agents) {
    throw InvalidSpecError("suite entry needs K, delta and N: '" + text + "'");
  }
  if (entry.size < 2 || entry.density < 0.0 || entry.density >= 1.0 || entry.agents < 1 ||
      entry.count < 1 || entry.goal_radius < 0) {
    throw InvalidSpecError("suite entry out of range: '" + text + "'");
  }
  return entry;
}

SuiteSpec parse_suite(const std::string& text) {
  SuiteSpec suite;
  for (const std::string& part : split(text, ';')) {
    if (!part.empty()) suite.push_back(parse_suite_entry(part));
  }
  return suite;
}

std::string format_suite_entry(const SuiteEntry& e) {
  std::string out = "K=" + std::to_string(e.size) + ",delta=" + short_number(e.density) +
                    ",N=" + std::to_string(e.agents) + ",count=" + std::to_string(e.count) +
                    ",seed=" + std::to_string(e.seed);
  if (e.goal_radius > 0) out += ",radius=" + std::to_string(e.goal_radius);
  return out;
}

std::string format_suite(const SuiteSpec& suite) {
  std::string out;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (i) out += ";";
    out += format_suite_entry(suite[i]);
  }
  return out;
}

std::vector<SuiteInstance> generate_test_suite(const SuiteSpec& spec) {
  std::vector<SuiteInstance> out;
  for (std::size_t e = 0; e < spec.size(); ++e) {
    const SuiteEntry& entry = spec[e];
    for (int j = 0; j < entry.count; ++j) {
      Rng rng = derive_rng({entry.seed, static_cast<std::uint64_t>(entry.size),
                            static_cast<std::uint64_t>(std::llround(entry.density * 1e6)),
                            static_cast<std::uint64_t>(entry.agents),
                            static_cast<std::uint64_t>(entry.goal_radius),
                            static_cast<std::uint64_t>(j)});
      const GridMap map = generate_random_map({entry.size, entry.density, rng()});
      if (map.free_count() < entry.agents) {
        throw InvalidSpecError("suite entry " + format_suite_entry(entry) + ": " +
                               std::to_string(map.free_count()) + " free cells for " +
                               std::to_string(entry.agents) + " agents");
      }
      const int radius = entry.goal_radius > 0 ? entry.goal_radius : map_diameter(map);
      constexpr int kAttempts = 100;
      for (int attempt = 1;; ++attempt) {
        std::vector<Position> starts = sample_starts(map, entry.agents, rng);
        try {
          std::vector<Position> goals = sample_goals(map, starts, std::max(1, radius), rng);
          out.push_back({e, Instance{map, std::move(starts), std::move(goals)}});
          break;
        } catch (const AllocationError&) {
          if (attempt == kAttempts) {
            throw InvalidSpecError("cannot place goals for suite entry " + format_suite_entry(entry));
          }
        }
      }
    }
  }
  return out;
}

EpisodeOutcome run_policy(Policy& policy, const Instance& instance, int horizon, Rng& rng) {
  validate_instance(instance);
  policy.reset(instance);
  const int n = instance.agents();
  EnvState state{instance.starts, 0};
  std::vector<int> arrival(n, 0);
  while (!is_terminal(instance, state, horizon)) {
    const std::vector<Action> actions = policy.act(instance, state, rng);
    Transition tr = transition(instance, state, actions, horizon);
    for (int i = 0; i < n; ++i) {
      if (tr.rewards[i] == 1) arrival[i] = tr.next_state.t;
    }
    state = std::move(tr.next_state);
  }
  EpisodeOutcome out;
  out.completion = completion_rate(instance, state);
  out.length = state.t;
  for (int i = 0; i < n; ++i) {
    out.flowtime += state.positions[i] == instance.goals[i] ? arrival[i] : horizon;
  }
  out.lower_bound = flowtime_lower_bound(instance).value_or(0);
  return out;
}

double EvalReport::mean_completion() const noexcept {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const EpisodeOutcome& e : episodes) total += e.completion;
  return total / static_cast<double>(episodes.size());
}

EvalReport evaluate(const Policy& policy, const SuiteSpec& spec,
                    const std::vector<SuiteInstance>& suite, int horizon, int workers) {
  EvalReport report;
  report.episodes.resize(suite.size());
  parallel_for(static_cast<int>(suite.size()), workers, [&](int j) {
    std::unique_ptr<Policy> local = policy.clone();
    const SuiteInstance& si = suite[j];
    Rng rng = derive_rng({spec.at(si.entry).seed, 0x6576616cull, static_cast<std::uint64_t>(j)});
    report.episodes[j] = run_policy(*local, si.instance, horizon, rng);
    report.episodes[j].entry = si.entry;
  });
  for (std::size_t e = 0; e < spec.size(); ++e) {
    EvalRow row;
    row.entry = spec[e];
    std::vector<double> rates;
    double flow = 0.0;
    for (const EpisodeOutcome& o : report.episodes) {
      if (o.entry != e) continue;
      rates.push_back(o.completion);
      flow += o.flowtime;
    }
    row.episodes = static_cast<int>(rates.size());
    if (!rates.empty()) {
      const EpochStats stats = epoch_stats(rates);
      row.mean_completion = stats.mean;
      row.mean_flowtime = flow / static_cast<double>(rates.size());
      row.completion_ci95 = rates.size() > 1 ? 1.96 * stats.stddev / std::sqrt(rates.size()) : 0.0;
    }
    report.rows.push_back(row);
  }
  return report;
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "size,density,agents,count,seed,goal_radius,mean_completion,mean_flowtime,episodes,"
         "completion_ci95\n";
  for (const EvalRow& r : report.rows) {
    out << r.entry.size << ',' << short_number(r.entry.density) << ',' << r.entry.agents << ','
        << r.entry.count << ',' << r.entry.seed << ',' << r.entry.goal_radius << ','
        << number_text(r.mean_completion) << ',' << number_text(r.mean_flowtime) << ','
        << r.episodes << ',' << number_text(r.completion_ci95) << '\n';
  }
}

void print_eval_table(std::ostream& out, const EvalReport& report) {
  out << std::left << std::setw(6) << "K" << std::setw(8) << "delta" << std::setw(5) << "N"
      << std::setw(8) << "radius" << std::setw(12) << "completion" << std::setw(10) << "ci95"
      << std::setw(10) << "flowtime" << "episodes\n";
  out << std::fixed << std::setprecision(3);
  for (const EvalRow& r : report.rows) {
    out << std::setw(6) << r.entry.size << std::setw(8) << r.entry.density << std::setw(5)
        << r.entry.agents << std::setw(8)
        << (r.entry.goal_radius > 0 ? std::to_string(r.entry.goal_radius) : std::string("inf"))
        << std::setw(12) << r.mean_completion << std::setw(10) << r.completion_ci95
        << std::setw(10) << std::setprecision(1) << r.mean_flowtime << std::setprecision(3)
        << r.episodes << "\n";
  }
  out.unsetf(std::ios::fixed);
}

void apply_setting(RunSettings& s, const std::string& key, const std::string& value) {
  TrainConfig& c = s.train;
  if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "episodes_per_epoch") c.episodes_per_epoch = parse_number<int>(key, value);
  else if (key == "horizon") c.horizon = parse_number<int>(key, value);
  else if (key == "agents") c.agents = parse_number<int>(key, value);
  else if (key == "gamma") c.gamma = parse_number<double>(key, value);
  else if (key == "clip") c.clip = parse_number<double>(key, value);
  else if (key == "ppo_passes") c.ppo_passes = parse_number<int>(key, value);
  else if (key == "critic_passes") c.critic_passes = parse_number<int>(key, value);
  else if (key == "entropy_coef") c.entropy_coef = parse_number<double>(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
  else if (key == "critic") {
    if (value == "qmix") c.critic_mode = CriticMode::Qmix;
    else if (value == "independent") c.critic_mode = CriticMode::Independent;
    else throw InvalidSpecError("critic must be qmix or independent, got '" + value + "'");
  } else if (key == "curriculum") c.curriculum = parse_bool(key, value);
  else if (key == "normalize_advantages") c.normalize_advantages = parse_bool(key, value);
  else if (key == "value_scale") c.value_scale = parse_number<double>(key, value);
  else if (key == "threshold") c.threshold = parse_number<double>(key, value);
  else if (key == "deviation_factor") c.deviation_factor = parse_number<double>(key, value);
  else if (key == "map_sizes") {
    c.map_sizes.clear();
    for (const std::string& v : split(value, ',')) c.map_sizes.push_back(parse_number<int>(key, v));
  } else if (key == "densities") {
    c.densities.clear();
    for (const std::string& v : split(value, ',')) c.densities.push_back(parse_number<double>(key, v));
  } else if (key == "oversampled_size") c.oversampled_size = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "workers") c.workers = parse_number<int>(key, value);
  else if (key == "hidden") c.hidden = parse_number<int>(key, value);
  else if (key == "hypernet_hidden") c.hypernet_hidden = parse_number<int>(key, value);
  else if (key == "embed") c.embed = parse_number<int>(key, value);
  else if (key == "eval_suite") s.eval_suite = parse_suite(value);
  else if (key == "eval_interval") s.eval_interval = parse_number<int>(key, value);
  else if (key == "checkpoint_interval") s.checkpoint_interval = parse_number<int>(key, value);
  else throw InvalidSpecError("unknown config key '" + key + "'");
}

RunSettings parse_run_config(const std::string& text) {
  RunSettings s;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(number, "expected 'key = value'");
    try {
      apply_setting(s, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const InvalidSpecError& e) {
      throw ParseError(number, e.what());
    }
  }
  return s;
}

RunSettings load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string format_run_config(const RunSettings& s) {
  const TrainConfig& c = s.train;
  std::ostringstream out;
  out << "epochs = " << c.epochs << "\n"
      << "episodes_per_epoch = " << c.episodes_per_epoch << "\n"
      << "horizon = " << c.horizon << "\n"
      << "agents = " << c.agents << "\n"
      << "gamma = " << short_number(c.gamma) << "\n"
      << "clip = " << short_number(c.clip) << "\n"
      << "ppo_passes = " << c.ppo_passes << "\n"
      << "critic_passes = " << c.critic_passes << "\n"
      << "entropy_coef = " << short_number(c.entropy_coef) << "\n"
      << "learning_rate = " << short_number(c.learning_rate) << "\n"
      << "critic = " << critic_mode_name(c.critic_mode) << "\n"
      << "curriculum = " << (c.curriculum ? "true" : "false") << "\n"
      << "normalize_advantages = " << (c.normalize_advantages ? "true" : "false") << "\n"
      << "value_scale = " << short_number(c.value_scale) << "\n"
      << "threshold = " << short_number(c.threshold) << "\n"
      << "deviation_factor = " << short_number(c.deviation_factor) << "\n"
      << "map_sizes = " << join(c.map_sizes) << "\n"
      << "densities = " << join(c.densities) << "\n"
      << "oversampled_size = " << c.oversampled_size << "\n"
      << "seed = " << c.seed << "\n"
      << "workers = " << c.workers << "\n"
      << "hidden = " << c.hidden << "\n"
      << "hypernet_hidden = " << c.hypernet_hidden << "\n"
      << "embed = " << c.embed << "\n"
      << "eval_suite = " << format_suite(s.eval_suite) << "\n"
      << "eval_interval = " << s.eval_interval << "\n"
      << "checkpoint_interval = " << s.checkpoint_interval << "\n";
  return out.str();
}

std::string config_line(const RunSettings& s) {
  std::string text = format_run_config(s);
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line.erase(std::remove(line.begin(), line.end(), ' '), line.end());
    if (!out.empty()) out += ' ';
    out += line;
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

constexpr const char* kCurvesHeader =
    "epoch,wallclock_s,R_alloc,mu,sigma,mean_return,ppo_loss,factorization_loss,entropy";
constexpr const char* kCurriculumHeader = "epoch,R_alloc,mu,sigma,incremented";

// Newest checkpoint_<epoch> in the directory, or -1.
int latest_checkpoint(const fs::path& dir) {
  int best = -1;
  static const std::regex pattern("checkpoint_([0-9]+)");
  if (!fs::exists(dir)) return best;
  for (const auto& item : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = item.path().filename().string();
    if (std::regex_match(name, m, pattern)) best = std::max(best, std::stoi(m[1].str()));
  }
  return best;
}

// Keeps the header and rows whose leading epoch is <= `last`.
void truncate_csv(const fs::path& path, const char* header, int last) {
  std::vector<std::string> keep{header};
  std::ifstream in(path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) <= last) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const std::string& l : keep) out << l << '\n';
}

fs::path checkpoint_file(const fs::path& dir, int epoch) {
  return dir / ("checkpoint_" + std::to_string(epoch));
}

}  // namespace

RunSummary run_training(const RunSettings& settings, const fs::path& directory, bool resume,
                        const EpochCallback& on_epoch) {
  const TrainConfig& config = settings.train;
  validate_config(config);
  fs::create_directories(directory);

  RunSummary summary;
  summary.directory = directory;
  ModelBundle models;
  CurriculumState curriculum;
  int start = 1;
  const int existing = resume ? latest_checkpoint(directory) : -1;
  if (existing >= 0) {
    LoadedCheckpoint loaded = load_checkpoint(checkpoint_file(directory, existing));
    if (loaded.meta.seed != config.seed) {
      throw InvalidSpecError("checkpoint seed differs from the configured seed");
    }
    models = std::move(loaded.models);
    curriculum = loaded.meta.curriculum;
    start = existing + 1;
    truncate_csv(directory / "curves.csv", kCurvesHeader, existing);
    truncate_csv(directory / "curriculum.csv", kCurriculumHeader, existing);
  } else {
    Rng init = derive_rng({config.seed, 0x696e6974ull});
    models = ModelBundle::create(config, init);
    curriculum = initial_curriculum(config);
    std::ofstream(directory / "curves.csv", std::ios::trunc) << kCurvesHeader << '\n';
    std::ofstream(directory / "curriculum.csv", std::ios::trunc) << kCurriculumHeader << '\n';
  }
  {
    std::ofstream cfg(directory / "config", std::ios::trunc);
    cfg << format_run_config(settings);
    if (!cfg) throw FormatError("cannot write run config in " + directory.string());
  }

  const InstanceFactory factory = default_instance_factory(config);
  const std::vector<SuiteInstance> suite = generate_test_suite(settings.eval_suite);
  std::ofstream curves(directory / "curves.csv", std::ios::app);
  std::ofstream trace(directory / "curriculum.csv", std::ios::app);
  if (!curves || !trace) throw FormatError("cannot append run CSVs in " + directory.string());

  const auto t0 = std::chrono::steady_clock::now();
  summary.first_epoch = start;
  summary.last_epoch = start - 1;
  for (int epoch = start; epoch <= config.epochs; ++epoch) {
    const EpochDiagnostics d = train_epoch(models, factory, curriculum, config, epoch);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string radius = radius_text(d.radius, d.unbounded);
    curves << epoch << ',' << number_text(wall) << ',' << radius << ',' << number_text(d.stats.mean)
           << ',' << number_text(d.stats.stddev) << ',' << number_text(d.mean_return) << ','
           << number_text(d.ppo_loss) << ',' << number_text(d.factorization_loss) << ','
           << number_text(d.entropy) << '\n';
    trace << epoch << ',' << radius << ',' << number_text(d.stats.mean) << ','
          << number_text(d.stats.stddev) << ',' << (d.incremented ? 1 : 0) << '\n';
    curves.flush();
    trace.flush();
    if (!curves || !trace) throw FormatError("failed writing run CSVs in " + directory.string());
    if (on_epoch) on_epoch(d, wall);

    const bool last = epoch == config.epochs;
    if (!suite.empty() && (last || (settings.eval_interval > 0 && epoch % settings.eval_interval == 0))) {
      const EvalReport report =
          evaluate(ActorPolicy(models.actor, true), settings.eval_suite, suite, config.horizon,
                   config.workers);
      std::ofstream out(directory / ("eval_" + std::to_string(epoch) + ".csv"), std::ios::trunc);
      write_eval_csv(out, report);
    }
    if (last || (settings.checkpoint_interval > 0 && epoch % settings.checkpoint_interval == 0)) {
      const fs::path ck = checkpoint_file(directory, epoch);
      save_checkpoint(ck, models, {epoch, config.seed, curriculum});
      summary.final_checkpoint = ck;
    }
    summary.last_epoch = epoch;
  }
  if (summary.final_checkpoint.empty() && existing >= 0) {
    summary.final_checkpoint = checkpoint_file(directory, existing);
  }
  summary.curriculum = curriculum;

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ModelSummary sizes = summarize(models);
  std::ofstream manifest(directory / "manifest", std::ios::trunc);
  manifest << "format_version = " << kCheckpointVersion << "\n"
           << "seed = " << config.seed << "\n"
           << "first_epoch = " << summary.first_epoch << "\n"
           << "last_epoch = " << summary.last_epoch << "\n"
           << "final_radius = " << radius_text(curriculum.radius, curriculum.unbounded) << "\n"
           << "final_checkpoint = " << summary.final_checkpoint.filename().string() << "\n"
           << "total_parameters = " << sizes.total() << "\n"
           << "wallclock_s = " << number_text(wall) << "\n";
  if (!manifest) throw FormatError("cannot write manifest in " + directory.string());
  return summary;
}

}  // namespace cactus
