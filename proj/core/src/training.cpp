#include "snn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "snn/error.hpp"
#include "snn/ops.hpp"

namespace snn {

std::string to_string(LossKind k) { return k == LossKind::mse_rate ? "mse" : "cross-entropy"; }

LossKind loss_from_string(const std::string& name) {
  if (name == "mse" || name == "mse-on-rate") return LossKind::mse_rate;
  if (name == "cross-entropy" || name == "ce" || name == "cross-entropy-on-rate") {
    return LossKind::cross_entropy_rate;
  }
  throw ConfigError("unknown loss '" + name + "' (expected mse or cross-entropy)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
}

void adam_step(std::span<Tensor* const> params, AdamState& state, double lr) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->has_grad()) throw ContractError("adam_step: parameter without gradient");
    if (state.m[k].size() != params[k]->size()) {
      throw DimensionError("adam_step: moment size does not match parameter " +
                           std::to_string(k));
    }
    for (double g : params[k]->grad()) {
      if (!std::isfinite(g)) {
        throw DivergenceError("adam_step: non-finite gradient in parameter " + std::to_string(k) +
                              " at step " + std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->data();
    auto g = params[k]->grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

Tensor target_for(std::size_t label, std::size_t classes, LossKind kind) {
  if (label >= classes) {
    throw DomainError("label " + std::to_string(label) + " outside " + std::to_string(classes) +
                      " classes");
  }
  if (kind == LossKind::cross_entropy_rate) return Tensor::scalar(static_cast<double>(label));
  Tensor t(Shape{classes}, 0.0);
  t[label] = 1.0;
  return t;
}

void write_history_csv(const History& history, std::ostream& out) {
  out << "epoch,train_loss,val_loss,val_acc\n";
  char buf[160];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss,
                  e.val_acc);
    out << buf;
  }
}

InputSequence encode_sample(const Dataset& data, std::size_t i, Encoding encoding,
                            std::size_t t_steps, std::uint64_t seed) {
  Tensor image = data.image(i);
  if (encoding == Encoding::poisson) return poisson_encode(image, t_steps, seed);
  return repeat_encode(image, t_steps);
}

namespace {

constexpr std::uint64_t kTrainStream = 0x7261696e;  // "rain"
constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kSplitStream = 0x73706c74;
constexpr std::uint64_t kValStream = 0x76616c;

Var batch_loss(Tape& tape, const Var& rates, const Dataset& data,
               std::span<const std::size_t> idx, LossKind kind, std::size_t classes) {
  if (kind == LossKind::cross_entropy_rate) {
    std::vector<std::size_t> labels;
    labels.reserve(idx.size());
    for (std::size_t i : idx) labels.push_back(data.labels[i]);
    return ops::cross_entropy_loss(rates, labels);
  }
  Tensor target(Shape{idx.size(), classes}, 0.0);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (data.labels[idx[b]] >= classes) throw DomainError("label outside network class range");
    target[b * classes + data.labels[idx[b]]] = 1.0;
  }
  return ops::mse_loss(rates, tape.constant(std::move(target)));
}

struct Pass {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::uint64_t spikes = 0;
  std::size_t silent = 0;
  std::size_t count = 0;
};

// Inference pass over `data` using fixed per-sample encoding seeds.
Pass inference_pass(const Network& net, const Dataset& data, Encoding encoding, std::uint64_t seed,
                    std::size_t batch_size, LossKind loss) {
  Pass pass;
  const std::size_t classes = net.classes();
  std::vector<std::size_t> idx;
  std::vector<InputSequence> inputs;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    inputs.clear();
    for (std::size_t i : idx) {
      inputs.push_back(encode_sample(data, i, encoding, net.t_steps, derive_seed(seed, i)));
    }
    Tape tape;
    BoundWeights bound = bind_constants(tape, net);
    BatchOutput out = forward_batch(tape, net, bound, batch_frames(inputs), false);
    Var l = batch_loss(tape, out.rates, data, idx, loss, classes);
    pass.loss_sum += l.value().item() * static_cast<double>(idx.size());
    auto rates = out.rates.value().data();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      auto row = rates.subspan(b * classes, classes);
      if (argmax(row) == data.labels[idx[b]]) ++pass.correct;
      if (std::all_of(row.begin(), row.end(), [](double r) { return r == 0.0; })) ++pass.silent;
      pass.spikes += out.spike_counts[b];
    }
    pass.count += idx.size();
  }
  return pass;
}

}  // namespace

EvalResult evaluate(const Network& net, const Dataset& data, const EvalOptions& opts) {
  if (data.size() == 0) throw DomainError("evaluate: empty test set");
  if (opts.batch_size == 0) throw ConfigError("evaluation batch size must be positive");
  Pass pass = inference_pass(net, data, opts.encoding, opts.seed, opts.batch_size, opts.loss);
  EvalResult r;
  r.count = pass.count;
  r.correct = pass.correct;
  r.accuracy = static_cast<double>(pass.correct) / static_cast<double>(pass.count);
  r.total_spikes = pass.spikes;
  r.loss = pass.loss_sum / static_cast<double>(pass.count);
  r.silent_fraction = static_cast<double>(pass.silent) / static_cast<double>(pass.count);
  return r;
}

FitResult fit(Network net, const Dataset& train, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() == 0) throw DomainError("fit: empty training set");
  if (train.classes > net.classes()) {
    throw DimensionError("fit: dataset has " + std::to_string(train.classes) +
                         " classes but network outputs " + std::to_string(net.classes()));
  }

  DatasetSplit split = split_validation(train, cfg.val_fraction, derive_seed(cfg.seed, kSplitStream));
  const Dataset& fit_set = split.train;
  const Dataset& val_set = split.validation;
  if (fit_set.size() == 0) throw DomainError("fit: validation split left no training data");

  const std::size_t classes = net.classes();
  AdamState adam;
  History history;
  std::vector<Tensor> best_weights = net.weights;
  std::vector<Tensor> best_biases = net.biases;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  std::vector<std::size_t> order(fit_set.size());
  std::vector<InputSequence> inputs;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      inputs.clear();
      for (std::size_t i : idx) {
        // Poisson trains are redrawn every epoch.
        inputs.push_back(encode_sample(fit_set, i, cfg.encoding, net.t_steps,
                                       derive_seed(cfg.seed, kTrainStream + epoch, i)));
      }
      for (Tensor* p : net.parameters()) {
        if (!p->has_grad()) p->enable_grad();
        p->zero_grad();
      }
      Tape tape;
      BoundWeights bound = bind_parameters(tape, net);
      BatchOutput out = forward_batch(tape, net, bound, batch_frames(inputs), false);
      Var loss = batch_loss(tape, out.rates, fit_set, idx, cfg.loss, classes);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                              ", batch " + std::to_string(start / cfg.batch_size + 1));
      }
      tape.backward(loss);
      try {
        auto params = net.parameters();
        adam_step(params, adam, cfg.lr);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                              ", batch " + std::to_string(start / cfg.batch_size + 1) + ")");
      }
      loss_sum += value * static_cast<double>(idx.size());
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(fit_set.size());
    double monitored = rec.train_loss;
    if (val_set.size() > 0) {
      Pass pass = inference_pass(net, val_set, cfg.encoding, derive_seed(cfg.seed, kValStream),
                                 cfg.batch_size, cfg.loss);
      rec.val_loss = pass.loss_sum / static_cast<double>(pass.count);
      rec.val_acc = static_cast<double>(pass.correct) / static_cast<double>(pass.count);
      monitored = rec.val_loss;
    } else {
      rec.val_loss = rec.train_loss;
    }
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (monitored < best - 1e-6) {
      best = monitored;
      best_weights = net.weights;
      best_biases = net.biases;
      history.best_epoch = rec.epoch;
      stale = 0;
    } else if (++stale > cfg.patience) {
      history.early_stopped = true;
      break;
    }
  }

  net.weights = std::move(best_weights);
  net.biases = std::move(best_biases);
  for (Tensor& w : net.weights) w = Tensor(w.shape(), w.storage());
  for (Tensor& b : net.biases) b = b.empty() ? Tensor() : Tensor(b.shape(), b.storage());
  return {std::move(net), std::move(history)};
}

}  // namespace snn
