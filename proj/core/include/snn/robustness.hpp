#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "snn/data_io.hpp"
#include "snn/network.hpp"

namespace snn {

struct Classification {
  std::size_t prediction = 0;
  SpikeRecord record;
};

/// Anything that maps an input sequence to a prediction plus its spike record.
using Classifier = std::function<Classification(const InputSequence&)>;

Classifier network_classifier(const Network& net);

struct PerturbationResult {
  std::size_t sample_id = 0;
  std::size_t label = 0;
  /// Number of noise frames at the first misclassification; empty if the
  /// prediction survived all T corrupted frames.
  std::optional<std::size_t> frames_to_failure;
  /// Frame indices in the order they were replaced; never repeats.
  std::vector<std::size_t> corrupted_frames;
  SpikeRecord clean;
  std::optional<SpikeRecord> corrupted;
};

/// Repeat-encode `image`, and if the clean prediction is correct replace
/// random not-yet-corrupted frames with N(0, 1) noise one at a time until the
/// prediction flips (or every frame is noise). Returns nullopt when the clean
/// prediction is already wrong.
std::optional<PerturbationResult> perturb_until_failure(const Classifier& classify,
                                                        const Tensor& image, std::size_t label,
                                                        std::size_t t_steps, std::mt19937_64& rng,
                                                        std::size_t sample_id = 0);

/// Pearson correlation between the columns (neurons) of a [T, n] spike record.
/// Zero-variance trains correlate 0 with everything, including themselves.
Tensor pearson_corr_matrix(const Tensor& layer);

/// Neurons whose train is constant over T (Pearson undefined).
std::size_t count_degenerate_trains(const Tensor& layer);

/// Elementwise mean of equally shaped matrices.
Tensor average_corr_matrices(std::span<const Tensor> matrices);

struct CorrStats {
  double kurtosis = 0.0;  // Fisher excess
  double skewness = 0.0;  // Fisher-Pearson
  double p99 = 0.0;       // linear interpolation
  std::size_t count_above = 0;
  double mean = 0.0;
  std::size_t values = 0;
  /// Fewer than two distinct values; kurtosis and skewness reported as 0.
  bool degenerate = false;
};

/// Statistics over the strict upper triangle of an n x n matrix.
CorrStats corr_distribution_stats(const Tensor& matrix, double threshold = 0.9);

struct CampaignConfig {
  std::size_t n_samples = 2000;
  std::uint64_t seed = 1;
  double threshold = 0.9;
  std::size_t jobs = 1;
  /// Layers wider than this are recorded but skipped for correlation analysis.
  std::size_t max_corr_neurons = 1024;
};

struct LayerCorrelation {
  std::size_t layer = 0;
  std::size_t neurons = 0;
  bool analyzed = false;
  Tensor clean;
  Tensor corrupt;
  CorrStats clean_stats;
  CorrStats corrupt_stats;
  /// Silent or saturated trains, summed over the averaged samples.
  std::uint64_t clean_degenerate_trains = 0;
  std::uint64_t corrupt_degenerate_trains = 0;
};

struct SampleOutcome {
  std::size_t sample_id = 0;
  std::size_t label = 0;
  bool skipped = false;  // clean prediction wrong
  std::optional<std::size_t> frames_to_failure;
};

struct CampaignResult {
  std::vector<LayerCorrelation> layers;
  /// failure_histogram[k] = samples that failed after exactly k noise frames (k >= 1).
  std::vector<std::size_t> failure_histogram;
  std::vector<SampleOutcome> outcomes;
  std::size_t selected = 0;
  std::size_t skipped = 0;
  std::size_t analyzed = 0;
  std::size_t failed = 0;
  std::size_t never_failed = 0;

  /// Index of the penultimate LIF layer (the last one if there is only one).
  std::size_t penultimate_layer() const { return layers.size() >= 2 ? layers.size() - 2 : 0; }
};

/// Runs the noise-injection procedure on n_samples test samples drawn without
/// replacement, then averages per-layer correlation matrices: clean over
/// correctly classified samples, corrupt over samples that eventually failed.
CampaignResult run_robustness_campaign(const Network& net, const Dataset& test,
                                       const CampaignConfig& cfg);

/// Same procedure for any classifier; `layer_sizes` gives the recorded widths.
CampaignResult run_robustness_campaign(const Classifier& classify,
                                       std::span<const std::size_t> layer_sizes,
                                       std::size_t t_steps, const Dataset& test,
                                       const CampaignConfig& cfg);

}  // namespace snn
