#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "snn/data_io.hpp"
#include "snn/encoding.hpp"
#include "snn/network.hpp"

namespace snn {

enum class LossKind { mse_rate, cross_entropy_rate };

std::string to_string(LossKind k);
LossKind loss_from_string(const std::string& name);

struct TrainConfig {
  LossKind loss = LossKind::mse_rate;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;
  /// Stop after patience + 1 consecutive epochs without improvement.
  std::size_t patience = 5;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
  Encoding encoding = Encoding::poisson;

  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update using each parameter's accumulated grad().
/// Throws DivergenceError on non-finite gradients; moments are sized lazily.
void adam_step(std::span<Tensor* const> params, AdamState& state, double lr);

/// mse-on-rate: one-hot [classes]; cross-entropy: scalar holding the label index.
Tensor target_for(std::size_t label, std::size_t classes, LossKind kind);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

/// CSV with header `epoch,train_loss,val_loss,val_acc`.
void write_history_csv(const History& history, std::ostream& out);

struct FitResult {
  Network network;
  History history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch BPTT with Adam and early stopping on validation loss. Returns the
/// parameters of the epoch with the lowest monitored loss (validation loss, or
/// training loss when val_fraction is 0).
FitResult fit(Network net, const Dataset& train, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

struct EvalOptions {
  Encoding encoding = Encoding::poisson;
  std::uint64_t seed = 0x5eed;
  std::size_t batch_size = 100;
  LossKind loss = LossKind::mse_rate;
};

struct EvalResult {
  double accuracy = 0.0;
  std::uint64_t total_spikes = 0;
  double loss = 0.0;
  /// Fraction of samples whose output layer never fired.
  double silent_fraction = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
};

/// Argmax-of-rates accuracy and total spikes over the whole set.
EvalResult evaluate(const Network& net, const Dataset& data, const EvalOptions& opts = {});

/// Input sequence for sample i of a dataset under the given encoding and seed.
InputSequence encode_sample(const Dataset& data, std::size_t i, Encoding encoding,
                            std::size_t t_steps, std::uint64_t seed);

}  // namespace snn
