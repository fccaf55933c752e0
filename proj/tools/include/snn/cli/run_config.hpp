#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snn/data_io.hpp"
#include "snn/network.hpp"
#include "snn/neuron.hpp"
#include "snn/training.hpp"

namespace snn::cli {

struct DatasetConfig {
  std::string name = "synthetic";  // mnist | cifar10 | synthetic
  std::filesystem::path path;
  std::size_t train_samples = 0;  // 0 keeps the whole split
  std::size_t test_samples = 0;
  bool stratified = true;

  std::size_t synthetic_classes = 10;
  std::size_t synthetic_train_per_class = 50;
  std::size_t synthetic_test_per_class = 10;
  double synthetic_separation = 4.0;
  Shape synthetic_geometry{1, 28, 28};
};

struct SweepConfig {
  std::vector<double> tau{1.001, 1.44, 2.0, 3.0, 5.0};
  std::vector<double> v_th{0.01, 0.5, 1.0, 1.5, 2.5, 4.45};
};

struct PerturbConfig {
  std::filesystem::path checkpoint;  // empty: <out>/checkpoint
  std::size_t samples = 2000;
  double threshold = 0.9;
  std::size_t max_corr_neurons = 1024;
};

/// Everything a command needs. The top-level seed is the only source of
/// randomness; component seeds are derived from it.
struct RunConfig {
  std::filesystem::path out = "runs/default";
  std::uint64_t seed = 1;
  std::size_t jobs = 0;  // 0: hardware concurrency
  DatasetConfig dataset;
  ArchSpec arch;
  LIFParams lif;
  std::size_t t_steps = 10;
  TrainConfig train;
  EvalOptions eval;
  SweepConfig sweep;
  PerturbConfig perturb;

  std::size_t resolved_jobs() const;
  std::filesystem::path checkpoint_path() const;
  /// Seeds for weight init, minibatch order, subsampling, evaluation and the campaign.
  std::uint64_t component_seed(std::uint64_t which) const;
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

enum SeedStream : std::uint64_t {
  seed_init = 1,
  seed_train = 2,
  seed_subsample = 3,
  seed_eval = 4,
  seed_campaign = 5,
};

/// Parses JSON text on top of the defaults; unknown keys are rejected.
RunConfig parse_run_config(const std::string& json_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string dump_run_config(const RunConfig& cfg);

/// Train and test splits named by the config, with arch geometry filled in.
struct LoadedData {
  Dataset train;
  Dataset test;
};
LoadedData load_data(RunConfig& cfg);

}  // namespace snn::cli
