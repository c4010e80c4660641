#include "sse/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "sse/artifacts.hpp"
#include "sse/svg.hpp"

namespace sse {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view text) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("expected a number, got '" + s + "'");
}

long long to_integer(std::string_view text) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("expected an integer, got '" + s + "'");
}

bool to_bool(std::string_view text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean, got '" + s + "'");
}

std::vector<std::uint64_t> to_seed_list(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::uint64_t> out;
  std::string tok;
  while (in >> tok) {
    const long long v = to_integer(tok);
    if (v < 0) throw ConfigError("seeds must be nonnegative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw ConfigError("seeds list is empty");
  return out;
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

double open_unit(std::string_view key, std::string_view v) {
  const double x = to_double(v);
  check(x > 0.0 && x < 1.0, std::string(key) + " must be in (0, 1)");
  return x;
}

double positive(std::string_view key, std::string_view v) {
  const double x = to_double(v);
  check(x > 0.0, std::string(key) + " must be > 0");
  return x;
}

int int_at_least(std::string_view key, std::string_view v, long long lo) {
  const long long x = to_integer(v);
  check(x >= lo && x <= 1'000'000'000, std::string(key) + " must be >= " + std::to_string(lo));
  return static_cast<int>(x);
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view,
                                  const std::filesystem::path&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto real = [&t](const char* key, auto field) {
      t[key] = [field](ExperimentConfig& c, std::string_view k, std::string_view v, const auto&) { field(c, k, v); };
    };
    t["include"] = [](ExperimentConfig& c, std::string_view, std::string_view v, const std::filesystem::path& base) {
      c.env_source = trim(v);
      c.training.env = resolve_env(c.env_source, base);
    };
    t["seeds"] = [](ExperimentConfig& c, std::string_view, std::string_view v, const auto&) {
      c.seeds = to_seed_list(v);
    };
    t["output_dir"] = [](ExperimentConfig& c, std::string_view, std::string_view v, const auto&) {
      check(!trim(v).empty(), "output_dir is empty");
      c.output_dir = trim(v);
    };
    real("threads", [](ExperimentConfig& c, auto k, auto v) { c.threads = int_at_least(k, v, 1); });
    real("final_eval_episodes",
         [](ExperimentConfig& c, auto k, auto v) { c.final_eval_episodes = int_at_least(k, v, 1); });
    real("iterations", [](ExperimentConfig& c, auto k, auto v) { c.training.iterations = int_at_least(k, v, 0); });
    real("lambda", [](ExperimentConfig& c, auto k, auto v) { c.training.lambda = positive(k, v); });
    real("grid_spacing", [](ExperimentConfig& c, auto k, auto v) { c.training.grid_spacing = positive(k, v); });
    real("c_dist", [](ExperimentConfig& c, auto k, auto v) {
      c.training.c_dist = to_double(v);
      check(c.training.c_dist > 1.0, std::string(k) + " must be > 1");
    });
    real("eta", [](ExperimentConfig& c, auto k, auto v) {
      c.training.eta = to_double(v);
      check(c.training.eta > 0.0 && c.training.eta <= 1.0, std::string(k) + " must be in (0, 1]");
    });
    real("epsilon_min", [](ExperimentConfig& c, auto k, auto v) {
      c.training.epsilon_min = to_double(v);
      check(c.training.epsilon_min >= 0.0 && c.training.epsilon_min <= 1.0, std::string(k) + " must be in [0, 1]");
    });
    real("epsilon_decay_fraction", [](ExperimentConfig& c, auto k, auto v) {
      c.training.epsilon_decay_fraction = to_double(v);
      check(c.training.epsilon_decay_fraction >= 0.0 && c.training.epsilon_decay_fraction <= 1.0,
            std::string(k) + " must be in [0, 1]");
    });
    real("gamma_high", [](ExperimentConfig& c, auto k, auto v) { c.training.high.gamma = open_unit(k, v); });
    real("gamma_low", [](ExperimentConfig& c, auto k, auto v) { c.training.low.gamma = open_unit(k, v); });
    auto tau = [](std::string_view k, std::string_view v) {
      const double x = to_double(v);
      check(x >= 0.0 && x <= 1.0, std::string(k) + " must be in [0, 1]");
      return x;
    };
    real("tau", [tau](ExperimentConfig& c, auto k, auto v) { c.training.high.tau = c.training.low.tau = tau(k, v); });
    real("tau_high", [tau](ExperimentConfig& c, auto k, auto v) { c.training.high.tau = tau(k, v); });
    real("tau_low", [tau](ExperimentConfig& c, auto k, auto v) { c.training.low.tau = tau(k, v); });
    auto rate = [](std::string_view k, std::string_view v) {
      const double x = to_double(v);
      check(x > 0.0 && x <= 1.0, std::string(k) + " must be in (0, 1]");
      return x;
    };
    real("lr_high", [rate](ExperimentConfig& c, auto k, auto v) { c.training.high.learning_rate = rate(k, v); });
    real("lr_low", [rate](ExperimentConfig& c, auto k, auto v) { c.training.low.learning_rate = rate(k, v); });
    real("batch_size", [](ExperimentConfig& c, auto k, auto v) { c.training.batch_size = int_at_least(k, v, 1); });
    real("buffer_capacity", [](ExperimentConfig& c, auto k, auto v) {
      c.training.high_capacity = c.training.low_capacity = static_cast<std::size_t>(int_at_least(k, v, 2));
    });
    real("high_capacity", [](ExperimentConfig& c, auto k, auto v) {
      c.training.high_capacity = static_cast<std::size_t>(int_at_least(k, v, 2));
    });
    real("low_capacity", [](ExperimentConfig& c, auto k, auto v) {
      c.training.low_capacity = static_cast<std::size_t>(int_at_least(k, v, 1));
    });
    real("episodes_per_iteration",
         [](ExperimentConfig& c, auto k, auto v) { c.training.episodes_per_iteration = int_at_least(k, v, 1); });
    real("high_batches", [](ExperimentConfig& c, auto k, auto v) { c.training.high_batches = int_at_least(k, v, 0); });
    real("low_batches", [](ExperimentConfig& c, auto k, auto v) { c.training.low_batches = int_at_least(k, v, 0); });
    real("low_noise", [](ExperimentConfig& c, auto k, auto v) {
      c.training.low_noise = to_double(v);
      check(c.training.low_noise >= 0.0, std::string(k) + " must be >= 0");
    });
    t["euclidean_term"] = [](ExperimentConfig& c, std::string_view, std::string_view v, const auto&) {
      const std::string s = trim(v);
      if (s == "negated") {
        c.training.euclidean = EuclideanTerm::negated;
      } else if (s == "literal") {
        c.training.euclidean = EuclideanTerm::literal;
      } else {
        throw ConfigError("euclidean_term must be 'negated' or 'literal'");
      }
    };
    real("stuck_window", [](ExperimentConfig& c, auto k, auto v) {
      c.training.stuck_window = static_cast<std::size_t>(int_at_least(k, v, 1));
    });
    real("motion_epsilon", [](ExperimentConfig& c, auto k, auto v) { c.training.motion_epsilon = positive(k, v); });
    real("max_decisions", [](ExperimentConfig& c, auto k, auto v) { c.training.max_decisions = int_at_least(k, v, 1); });
    real("eval_episodes", [](ExperimentConfig& c, auto k, auto v) { c.training.eval_episodes = int_at_least(k, v, 0); });
    real("eval_every", [](ExperimentConfig& c, auto k, auto v) { c.training.eval_every = int_at_least(k, v, 1); });
    real("time_buckets", [](ExperimentConfig& c, auto k, auto v) { c.training.high.time_buckets = int_at_least(k, v, 1); });
    real("twin_high", [](ExperimentConfig& c, auto, auto v) { c.training.high.twin = to_bool(v); });
    real("twin_low", [](ExperimentConfig& c, auto, auto v) { c.training.low.twin = to_bool(v); });
    real("relabel_low", [](ExperimentConfig& c, auto, auto v) { c.training.low.relabel = to_bool(v); });
    real("no_refinement", [](ExperimentConfig& c, auto, auto v) { c.training.no_refinement = to_bool(v); });
    real("fixed_steps", [](ExperimentConfig& c, auto, auto v) { c.training.fixed_steps = to_bool(v); });
    real("fixed_step_count",
         [](ExperimentConfig& c, auto k, auto v) { c.training.fixed_step_count = int_at_least(k, v, 1); });
    real("use_exploration", [](ExperimentConfig& c, auto, auto v) { c.training.use_exploration = to_bool(v); });
    auto weight = [](std::string_view k, std::string_view v) {
      const double x = to_double(v);
      check(x >= 0.0, std::string(k) + " must be >= 0");
      return x;
    };
    real("weight_goal", [weight](ExperimentConfig& c, auto k, auto v) { c.training.weights.goal = weight(k, v); });
    real("weight_greedy", [weight](ExperimentConfig& c, auto k, auto v) { c.training.weights.greedy = weight(k, v); });
    real("weight_novel", [weight](ExperimentConfig& c, auto k, auto v) { c.training.weights.novel = weight(k, v); });
    return t;
  }();
  return table;
}

void write_text(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  body(out);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

void write_metrics_header(std::ostream& out) {
  out << "iteration";
  for (const std::string& c : metric_columns()) out << ',' << c;
  out << '\n';
}

void write_metrics_row(std::ostream& out, const IterationReport& r) {
  out << r.iteration;
  for (double v : metric_values(r)) out << ',' << format_number(v);
  out << '\n';
}

void export_run(const Trainer& trainer, const EvalReport& eval, const std::filesystem::path& dir) {
  const TrainingConfig& c = trainer.config();
  write_text(dir / "env.txt", [&](std::ostream& o) { o << env_to_text(c.env); });
  write_text(dir / "grid.csv", [&](std::ostream& o) { write_grid_csv(o, trainer.partition()); });
  write_text(dir / "graph_nodes.csv", [&](std::ostream& o) { write_graph_nodes_csv(o, trainer.graph()); });
  const ExecutionContext ctx = trainer.context(false);
  write_text(dir / "graph_edges.csv", [&](std::ostream& o) {
    write_graph_edges_csv(o, trainer.graph(), low_level_costs(trainer.low(), ctx.params.cost), &trainer.partition(),
                          ctx.params.c_dist);
  });
  write_text(dir / "decisions.csv", [&](std::ostream& o) { write_decisions_csv(o, eval.last.decisions); });
  write_text(dir / "paths.csv", [&](std::ostream& o) { write_paths_csv(o, eval.last.decisions); });
  write_text(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, eval.last.trajectory); });
  const GoalPoint target = c.env.task.goal_points().front();
  write_text(dir / "low_heatmap.csv", [&](std::ostream& o) { write_low_heatmap_csv(o, trainer.low(), c.env, target); });
  render_run_dir(dir);
}

}  // namespace

EnvConfig resolve_env(const std::string& source, const std::filesystem::path& base_dir) {
  const auto names = builtin_env_names();
  if (std::find(names.begin(), names.end(), source) != names.end()) return builtin_env(source);
  std::filesystem::path p(source);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (!std::filesystem::exists(p)) {
    throw ConfigError("'" + source + "' is neither a builtin environment nor an existing env file");
  }
  return load_env_file(p.string());
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  it->second(config, key, value, base_dir);
}

void ExperimentConfig::validate() const {
  training.validate();
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (final_eval_episodes < 1) throw ConfigError("final_eval_episodes must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
}

ExperimentConfig parse_experiment_text(std::string_view text, const std::string& origin,
                                       const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.training.env = builtin_env(c.env_source);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      apply_setting(c, key, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_experiment_text(ss.str(), path.string(), path.parent_path());
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* dir = std::getenv("SSE_OUTPUT_DIR"); dir != nullptr && *dir != '\0') config.output_dir = dir;
  if (const char* threads = std::getenv("SSE_THREADS"); threads != nullptr && *threads != '\0') {
    try {
      config.threads = int_at_least("SSE_THREADS", threads, 1);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("environment: ") + e.what());
    }
  }
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"episodes", "success_rate", "coverage", "mean_decisions",
                                             "mean_kt",  "eta",          "epsilon",  "eval_success"};
  return cols;
}

std::vector<double> metric_values(const IterationReport& r) {
  return {static_cast<double>(r.episodes), r.success_rate, r.coverage, r.mean_decisions,
          r.mean_kt, r.eta, r.epsilon, r.eval_success};
}

SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir) {
  SeedOutcome out;
  out.seed = seed;
  try {
    std::filesystem::create_directories(dir);
    Trainer trainer(config.training, seed);
    std::ofstream metrics(dir / "metrics.csv");
    if (!metrics) throw std::runtime_error("cannot open '" + (dir / "metrics.csv").string() + "'");
    write_metrics_header(metrics);
    for (int i = 0; i < config.training.iterations; ++i) {
      const IterationReport r = trainer.run_iteration();
      out.reports.push_back(r);
      write_metrics_row(metrics, r);
      metrics.flush();
    }
    write_text(dir / "checkpoint.bin", [&](std::ostream& o) { trainer.write_checkpoint(o); });
    // The final evaluation uses a stream no per-iteration evaluation touches.
    const EvalReport eval = trainer.evaluate(config.final_eval_episodes, 1u << 30);
    out.final_success = eval.success_rate;
    out.successful_decisions = eval.successful_decisions;
    export_run(trainer, eval, dir);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<IterationReport>>& runs) {
  std::vector<AggregateRow> rows;
  std::size_t n_iter = 0;
  for (const auto& r : runs) n_iter = std::max(n_iter, r.size());
  const std::size_t n_cols = metric_columns().size();
  for (std::size_t i = 0; i < n_iter; ++i) {
    AggregateRow row;
    row.iteration = static_cast<int>(i);
    std::vector<std::vector<double>> values(n_cols);
    for (const auto& run : runs) {
      if (i >= run.size()) continue;
      row.iteration = run[i].iteration;
      ++row.runs;
      const auto v = metric_values(run[i]);
      for (std::size_t c = 0; c < n_cols; ++c) values[c].push_back(v[c]);
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto& xs = values[c];
      double sum = 0.0;
      for (double x : xs) sum += x;
      const double mean = sum / static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      row.mean.push_back(mean);
      row.stddev.push_back(xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  write_text(path, [&](std::ostream& o) {
    o << "iteration,runs";
    for (const std::string& c : metric_columns()) o << ',' << c << "_mean," << c << "_std";
    o << '\n';
    for (const AggregateRow& r : rows) {
      o << r.iteration << ',' << r.runs;
      for (std::size_t c = 0; c < r.mean.size(); ++c) {
        o << ',' << format_number(r.mean[c]) << ',' << format_number(r.stddev[c]);
      }
      o << '\n';
    }
  });
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  ExperimentOutcome result;
  result.seeds.resize(config.seeds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const std::uint64_t seed = config.seeds[i];
      result.seeds[i] = run_seed(config, seed, config.output_dir / ("seed_" + std::to_string(seed)));
    }
  };
  const int workers = std::min<int>(config.threads, static_cast<int>(config.seeds.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<std::vector<IterationReport>> runs;
  for (const SeedOutcome& s : result.seeds) runs.push_back(s.reports);
  write_aggregate_csv(config.output_dir / "aggregate.csv", aggregate(runs));
  write_text(config.output_dir / "final.csv", [&](std::ostream& o) {
    o << "seed,ok,final_success\n";
    for (const SeedOutcome& s : result.seeds) {
      o << s.seed << ',' << (s.ok ? 1 : 0) << ',' << format_number(s.final_success) << '\n';
    }
  });
  result.ok = std::all_of(result.seeds.begin(), result.seeds.end(), [](const SeedOutcome& s) { return s.ok; });
  return result;
}

std::vector<ExperimentOutcome> run_ablation(const ExperimentConfig& config, const std::string& key,
                                            const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("ablation needs at least one value");
  std::vector<ExperimentConfig> variants;
  for (const std::string& v : values) {
    ExperimentConfig c = config;
    try {
      apply_setting(c, key, v);
    } catch (const ConfigError& e) {
      throw ConfigError("ablation value '" + v + "': " + e.what());
    }
    c.output_dir = config.output_dir / (key + "=" + v);
    c.validate();
    variants.push_back(std::move(c));
  }
  std::filesystem::create_directories(config.output_dir);
  std::vector<ExperimentOutcome> outcomes;
  for (const ExperimentConfig& c : variants) outcomes.push_back(run_experiment(c));
  write_text(config.output_dir / "ablation.csv", [&](std::ostream& o) {
    o << key << ",runs,final_success_mean,final_success_std\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::vector<double> xs;
      for (const SeedOutcome& s : outcomes[i].seeds) xs.push_back(s.final_success);
      double sum = 0.0;
      for (double x : xs) sum += x;
      const double mean = sum / static_cast<double>(xs.size());
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
      o << values[i] << ',' << xs.size() << ',' << format_number(mean) << ',' << format_number(sd) << '\n';
    }
  });
  return outcomes;
}

EvalReport evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                               int episodes, std::uint64_t stream) {
  if (episodes < 1) throw std::invalid_argument("eval needs at least one episode");
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + checkpoint.string() + "'");
  Trainer trainer(config.training, 0);
  trainer.read_checkpoint(in);
  return trainer.evaluate(episodes, stream);
}

}  // namespace sse
