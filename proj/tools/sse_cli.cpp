#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sse/experiment.hpp"
#include "sse/svg.hpp"

namespace {

constexpr int kRunFailed = 1;
constexpr int kBadConfig = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "Experiment config file (key = value lines)");
  cmd->add_option("-s,--set", o.overrides, "Override one setting, e.g. --set c_dist=5")->take_all();
  cmd->add_option("-o,--output", o.output_dir, "Output directory");
}

sse::ExperimentConfig build_config(const CommonOptions& o) {
  sse::ExperimentConfig c = o.config_path.empty() ? sse::parse_experiment_text("", "<defaults>")
                                                  : sse::load_experiment_file(o.config_path);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sse::ConfigError("--set " + kv + ": expected key=value");
    try {
      sse::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const sse::ConfigError& e) {
      throw sse::ConfigError("--set " + kv + ": " + e.what());
    }
  }
  sse::apply_env_overrides(c);
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  c.validate();
  return c;
}

int report(const sse::ExperimentOutcome& outcome) {
  for (const sse::SeedOutcome& s : outcome.seeds) {
    if (s.ok) {
      std::printf("seed %llu: final success %.3f\n", static_cast<unsigned long long>(s.seed), s.final_success);
    } else {
      std::fprintf(stderr, "seed %llu failed: %s\n", static_cast<unsigned long long>(s.seed), s.error.c_str());
    }
  }
  return outcome.ok ? 0 : kRunFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical subgoal-planning agent for small 2D mazes"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  auto* train = app.add_subcommand("train", "Train one run per seed and write metrics, checkpoints and renders");
  add_common(train, train_opts);

  CommonOptions eval_opts;
  std::string checkpoint;
  int episodes = 100;
  std::uint64_t stream = 0;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin written by train")->required();
  eval->add_option("-n,--episodes", episodes, "Number of episodes");
  eval->add_option("--stream", stream, "Evaluation RNG stream");

  std::string run_dir;
  auto* render = app.add_subcommand("render", "Re-render maze.svg and heatmap.svg from a run directory");
  render->add_option("run_dir", run_dir, "seed_<n> directory of a train run")->required();

  CommonOptions ablate_opts;
  std::string param;
  std::vector<std::string> values;
  auto* ablate = app.add_subcommand("ablate", "Sweep one setting over a list of values");
  add_common(ablate, ablate_opts);
  ablate->add_option("-p,--param", param, "Setting to sweep")->required();
  ablate->add_option("-v,--values", values, "Values, comma separated")->required()->delimiter(',');

  auto* envs = app.add_subcommand("env", "Print a builtin environment in env-file syntax");
  std::string env_name;
  envs->add_option("name", env_name, "Builtin name (omit to list them)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return report(sse::run_experiment(build_config(train_opts)));
    if (*eval) {
      if (episodes < 1) throw sse::ConfigError("--episodes must be >= 1");
      const sse::ExperimentConfig c = build_config(eval_opts);
      const sse::EvalReport r = sse::evaluate_checkpoint(c, checkpoint, episodes, stream);
      std::printf("success_rate %.6f over %d episodes\n", r.success_rate, r.episodes);
      return 0;
    }
    if (*render) {
      sse::render_run_dir(run_dir);
      return 0;
    }
    if (*ablate) {
      const sse::ExperimentConfig c = build_config(ablate_opts);
      int status = 0;
      for (const auto& outcome : sse::run_ablation(c, param, values)) status = std::max(status, report(outcome));
      return status;
    }
    if (*envs) {
      if (env_name.empty()) {
        for (const std::string& n : sse::builtin_env_names()) std::printf("%s\n", n.c_str());
      } else {
        std::cout << sse::env_to_text(sse::builtin_env(env_name));
      }
      return 0;
    }
  } catch (const sse::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kBadConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRunFailed;
  }
  return 0;
}
