#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sse/training.hpp"

namespace sse {

/// Everything a `train` run needs: the training configuration plus the
/// orchestration settings around it.
struct ExperimentConfig {
  TrainingConfig training;
  std::string env_source = "u_maze";  // builtin name or env file path
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "sse_out";
  int threads = 1;                 // seeds run in parallel workers
  int final_eval_episodes = 100;   // greedy episodes on the final policy

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
};

/// Applies one `key = value` setting. Domain errors are reported as
/// ConfigError without location; the parsers add it. `base_dir` resolves
/// relative env file paths.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir = {});

/// Flat `key = value` text, `#` comments. `include = <builtin or .env path>`
/// selects the environment. Errors read "<origin>:<line>: message".
ExperimentConfig parse_experiment_text(std::string_view text, const std::string& origin = "<config>",
                                       const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_file(const std::filesystem::path& path);

/// SSE_OUTPUT_DIR and SSE_THREADS.
void apply_env_overrides(ExperimentConfig& config);

/// Resolves a builtin name or an env file path.
EnvConfig resolve_env(const std::string& source, const std::filesystem::path& base_dir = {});

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<IterationReport> reports;
  double final_success = 0.0;
  std::vector<int> successful_decisions;  // of the final evaluation
  bool ok = false;
  std::string error;
};

/// One full training run written under `dir`: metrics.csv (appended every
/// iteration), checkpoint.bin, the CSV exports and the SVG renders.
SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

/// Per-iteration mean and sample standard deviation of every metric column.
struct AggregateRow {
  int iteration = 0;
  int runs = 0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Metric columns of metrics.csv after `iteration`.
const std::vector<std::string>& metric_columns();
std::vector<double> metric_values(const IterationReport& report);

std::vector<AggregateRow> aggregate(const std::vector<std::vector<IterationReport>>& runs);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

struct ExperimentOutcome {
  std::vector<SeedOutcome> seeds;
  bool ok = false;
};

/// Runs every seed (in `threads` workers), then writes aggregate.csv and
/// final.csv under the output directory.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// One experiment per value of `key`, each in "<output>/<key>=<value>", plus
/// a summary of final success rates.
std::vector<ExperimentOutcome> run_ablation(const ExperimentConfig& config, const std::string& key,
                                            const std::vector<std::string>& values);

/// Greedy evaluation of a saved checkpoint. Throws when the checkpoint does
/// not match the configuration or `episodes` < 1.
EvalReport evaluate_checkpoint(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                               int episodes, std::uint64_t stream = 0);

}  // namespace sse
