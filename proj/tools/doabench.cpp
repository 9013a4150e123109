// Command-line front end: simulation, training, evaluation, and diagnostics
// for the subspace DOA toolkit.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "doa/bench.hpp"
#include "doa/signal_sim.hpp"
#include "doa/surrogate_net.hpp"
#include "doa/trainer.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<long> trials;
  std::optional<std::string> checkpoint;
};

void add_common(CLI::App* sub, CommonArgs* args) {
  sub->add_option("--config", args->config_path, "path to a key=value run configuration")
      ->required();
  sub->add_option("--seed", args->seed, "override the configured seed");
  sub->add_option("--out", args->out_dir, "override the configured output directory");
  sub->add_option("--trials", args->trials, "override the configured trial count");
  sub->add_option("--checkpoint", args->checkpoint, "override the configured checkpoint path");
}

doa::RunConfig load_config(const CommonArgs& args) {
  doa::RunConfig config = doa::parse_config_file(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (args.out_dir) config.out_dir = *args.out_dir;
  if (args.trials) {
    if (*args.trials < 1) throw doa::ConfigError("--trials must be >= 1");
    config.trials = static_cast<int>(*args.trials);
  }
  if (args.checkpoint) config.checkpoint_path = *args.checkpoint;
  return config;
}

std::string default_path(const doa::RunConfig& config, const std::string& filename) {
  return (std::filesystem::path(config.out_dir) / filename).string();
}

int run_simulate(const CommonArgs& args) {
  doa::RunConfig config = load_config(args);
  std::filesystem::create_directories(config.out_dir);
  doa::Scenario scenario = doa::scenario_from_config(config);
  doa::Dataset dataset = doa::generate_dataset(scenario, config.dataset_size);
  std::string path =
      config.dataset_path.empty() ? default_path(config, "dataset.ssn") : config.dataset_path;
  doa::save_dataset(dataset, path);
  std::printf("wrote %zu samples to %s\n", dataset.size(), path.c_str());
  return 0;
}

int run_train(const CommonArgs& args) {
  doa::RunConfig config = load_config(args);
  std::filesystem::create_directories(config.out_dir);

  doa::Dataset dataset;
  if (!config.dataset_path.empty() && std::filesystem::exists(config.dataset_path)) {
    dataset = doa::load_dataset(config.dataset_path);
    std::printf("loaded %zu samples from %s\n", dataset.size(), config.dataset_path.c_str());
  } else {
    doa::Scenario scenario = doa::scenario_from_config(config);
    dataset = doa::generate_dataset(scenario, config.dataset_size);
    if (!config.dataset_path.empty()) {
      doa::save_dataset(dataset, config.dataset_path);
      std::printf("wrote %zu samples to %s\n", dataset.size(), config.dataset_path.c_str());
    }
  }
  if (dataset.empty()) throw doa::ConfigError("training dataset is empty");

  const int snapshots = static_cast<int>(dataset.front().snapshots.cols());
  const int num_lags = std::min(config.tau_max, snapshots);
  doa::SurrogateModel initial = doa::make_surrogate_model(config.num_sensors, num_lags,
                                                          config.epsilon, config.seed);
  std::printf("model: %d sensors, %d lag channels, %zu parameters\n", initial.num_sensors,
              initial.num_lags, doa::parameter_count(initial));

  doa::Hyperparameters hp;
  hp.learning_rate = config.learning_rate;
  hp.batch_size = config.batch_size;
  hp.max_epochs = config.epochs;
  hp.epsilon = config.epsilon;
  hp.tau_max = config.tau_max;
  hp.seed = config.seed;
  hp.m_known = config.m_known;

  std::ofstream log(default_path(config, "train_log.csv"));
  if (!log) throw std::runtime_error("cannot open train_log.csv for writing");
  log << "epoch,train_rmspe,val_rmspe,gap_clamps,root_warnings\n";

  doa::TrainResult result = doa::train(dataset, hp, initial, &log);

  std::string path = config.checkpoint_path.empty() ? default_path(config, "checkpoint.ssn")
                                                    : config.checkpoint_path;
  doa::save_checkpoint(result.model, path);
  std::printf("best validation rmspe %.6g at epoch %d; checkpoint written to %s\n",
              result.report.best_val_rmspe, result.report.best_epoch, path.c_str());
  return 0;
}

int run_eval(const CommonArgs& args) {
  doa::RunConfig config = load_config(args);
  std::filesystem::create_directories(config.out_dir);
  doa::MetricsTable table = doa::run_sweep(config);
  std::string csv_path = default_path(config, "metrics.csv");
  doa::write_metrics_csv(table, csv_path);
  std::fputs(doa::format_metrics(table).c_str(), stdout);
  std::printf("metrics written to %s\n", csv_path.c_str());
  return 0;
}

int run_diagnostic(const CommonArgs& args, const std::string& which) {
  doa::RunConfig config = load_config(args);
  std::vector<std::string> files = doa::emit_diagnostics(config, which);
  for (const std::string& name : files)
    std::printf("wrote %s\n", default_path(config, name).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subspace DOA benchmark toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string action;
  for (const std::string& name :
       {std::string("simulate"), std::string("train"), std::string("eval"),
        std::string("spectrum"), std::string("beampattern"), std::string("eigvals")}) {
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub, &args);
    sub->callback([&action, name]() { action = name; });
  }

  try {
    app.parse(argc, argv);
    if (action == "simulate") return run_simulate(args);
    if (action == "train") return run_train(args);
    if (action == "eval") return run_eval(args);
    return run_diagnostic(args, action);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const doa::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
