#include "snn/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "snn/encoding.hpp"
#include "snn/error.hpp"

namespace snn {

Classifier network_classifier(const Network& net) {
  return [&net](const InputSequence& input) {
    ForwardResult r = forward(net, input, true);
    return Classification{argmax(r.rates.data()), std::move(*r.record)};
  };
}

std::optional<PerturbationResult> perturb_until_failure(const Classifier& classify,
                                                        const Tensor& image, std::size_t label,
                                                        std::size_t t_steps, std::mt19937_64& rng,
                                                        std::size_t sample_id) {
  InputSequence input = repeat_encode(image, t_steps);
  Classification clean = classify(input);
  if (clean.prediction != label) return std::nullopt;

  PerturbationResult result;
  result.sample_id = sample_id;
  result.label = label;
  result.clean = std::move(clean.record);

  std::vector<std::size_t> remaining(t_steps);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t frame_size = image.size();
  auto frames = input.frames.data();

  while (!remaining.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    const std::size_t slot = pick(rng);
    const std::size_t t = remaining[slot];
    remaining[slot] = remaining.back();
    remaining.pop_back();
    result.corrupted_frames.push_back(t);
    for (std::size_t i = 0; i < frame_size; ++i) frames[t * frame_size + i] = noise(rng);

    Classification noisy = classify(input);
    if (noisy.prediction != label) {
      result.frames_to_failure = result.corrupted_frames.size();
      result.corrupted = std::move(noisy.record);
      break;
    }
  }
  return result;
}

std::size_t count_degenerate_trains(const Tensor& layer) {
  if (layer.rank() != 2) throw DimensionError("spike record layer must be [T, n]");
  const std::size_t t_steps = layer.dim(0), n = layer.dim(1);
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    bool constant = true;
    for (std::size_t t = 1; t < t_steps && constant; ++t) {
      constant = layer[t * n + j] == layer[j];
    }
    count += constant ? 1 : 0;
  }
  return count;
}

Tensor pearson_corr_matrix(const Tensor& layer) {
  if (layer.rank() != 2) {
    throw DimensionError("pearson_corr_matrix: expected [T, n], got " +
                         shape_to_string(layer.shape()));
  }
  const std::size_t t_steps = layer.dim(0), n = layer.dim(1);
  if (t_steps < 2) throw ContractError("pearson_corr_matrix: need at least two timesteps");

  // Centred trains stored neuron-major for contiguous dot products.
  std::vector<double> centred(n * t_steps);
  std::vector<double> norm(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double mean = 0.0;
    for (std::size_t t = 0; t < t_steps; ++t) mean += layer[t * n + j];
    mean /= static_cast<double>(t_steps);
    double ss = 0.0;
    for (std::size_t t = 0; t < t_steps; ++t) {
      const double d = layer[t * n + j] - mean;
      centred[j * t_steps + t] = d;
      ss += d * d;
    }
    norm[j] = std::sqrt(ss);
  }

  Tensor corr(Shape{n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (norm[i] == 0.0) continue;
    corr[i * n + i] = 1.0;
    const double* xi = centred.data() + i * t_steps;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (norm[j] == 0.0) continue;
      const double* xj = centred.data() + j * t_steps;
      double dot = 0.0;
      for (std::size_t t = 0; t < t_steps; ++t) dot += xi[t] * xj[t];
      const double r = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
      corr[i * n + j] = r;
      corr[j * n + i] = r;
    }
  }
  return corr;
}

Tensor average_corr_matrices(std::span<const Tensor> matrices) {
  if (matrices.empty()) throw DomainError("average_corr_matrices: empty list");
  Tensor acc(matrices.front().shape(), 0.0);
  for (const Tensor& m : matrices) {
    if (m.shape() != acc.shape()) {
      throw DimensionError("average_corr_matrices: shape " + shape_to_string(m.shape()) +
                           " differs from " + shape_to_string(acc.shape()));
    }
    for (std::size_t i = 0; i < m.size(); ++i) acc[i] += m[i];
  }
  const double inv = 1.0 / static_cast<double>(matrices.size());
  for (double& v : acc.data()) v *= inv;
  return acc;
}

CorrStats corr_distribution_stats(const Tensor& matrix, double threshold) {
  if (matrix.rank() != 2 || matrix.dim(0) != matrix.dim(1)) {
    throw DimensionError("corr_distribution_stats: expected a square matrix, got " +
                         shape_to_string(matrix.shape()));
  }
  const std::size_t n = matrix.dim(0);
  if (n < 2) throw ContractError("corr_distribution_stats: need n >= 2");

  std::vector<double> values;
  values.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) values.push_back(matrix[i * n + j]);

  CorrStats s;
  s.values = values.size();
  const double count = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= count;
  m3 /= count;
  m4 /= count;
  for (double v : values) s.count_above += v > threshold ? 1 : 0;

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double pos = 0.99 * (count - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  s.p99 = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);

  s.degenerate = sorted.front() == sorted.back() || m2 == 0.0;
  if (!s.degenerate) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

namespace {

struct SampleWork {
  SampleOutcome outcome;
  std::vector<Tensor> clean_corr;
  std::vector<Tensor> corrupt_corr;
  std::vector<std::size_t> clean_degenerate;
  std::vector<std::size_t> corrupt_degenerate;
};

}  // namespace

CampaignResult run_robustness_campaign(const Classifier& classify,
                                       std::span<const std::size_t> layer_sizes,
                                       std::size_t t_steps, const Dataset& test,
                                       const CampaignConfig& cfg) {
  if (cfg.n_samples == 0) throw ConfigError("campaign needs at least one sample");
  if (cfg.n_samples > test.size()) {
    throw ConfigError("campaign requests " + std::to_string(cfg.n_samples) + " samples but the test set has " +
                      std::to_string(test.size()));
  }
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 select_rng(derive_seed(cfg.seed, 0x73656c));
  std::shuffle(order.begin(), order.end(), select_rng);
  order.resize(cfg.n_samples);

  const std::size_t n_layers = layer_sizes.size();
  CampaignResult result;
  result.selected = order.size();
  result.failure_histogram.assign(t_steps + 1, 0);
  result.layers.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto& lc = result.layers[l];
    lc.layer = l;
    lc.neurons = layer_sizes[l];
    lc.analyzed = layer_sizes[l] >= 2 && layer_sizes[l] <= cfg.max_corr_neurons;
    if (lc.analyzed) {
      lc.clean = Tensor(Shape{layer_sizes[l], layer_sizes[l]}, 0.0);
      lc.corrupt = Tensor(Shape{layer_sizes[l], layer_sizes[l]}, 0.0);
    }
  }

  auto process = [&](std::size_t k) {
    SampleWork w;
    const std::size_t id = order[k];
    w.outcome.sample_id = id;
    w.outcome.label = test.labels[id];
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x6e6f6973, id));
    auto r = perturb_until_failure(classify, test.image(id), test.labels[id], t_steps, rng, id);
    if (!r) {
      w.outcome.skipped = true;
      return w;
    }
    w.outcome.frames_to_failure = r->frames_to_failure;
    w.clean_corr.resize(n_layers);
    w.corrupt_corr.resize(n_layers);
    w.clean_degenerate.assign(n_layers, 0);
    w.corrupt_degenerate.assign(n_layers, 0);
    for (std::size_t l = 0; l < n_layers; ++l) {
      if (!result.layers[l].analyzed) continue;
      w.clean_corr[l] = pearson_corr_matrix(r->clean.layers.at(l));
      w.clean_degenerate[l] = count_degenerate_trains(r->clean.layers[l]);
      if (r->corrupted) {
        w.corrupt_corr[l] = pearson_corr_matrix(r->corrupted->layers.at(l));
        w.corrupt_degenerate[l] = count_degenerate_trains(r->corrupted->layers[l]);
      }
    }
    return w;
  };

  // Samples are processed in blocks; reduction happens in selection order so
  // the result does not depend on the number of workers.
  const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
  const std::size_t block = jobs * 4;
  std::vector<SampleWork> work;
  for (std::size_t start = 0; start < order.size(); start += block) {
    const std::size_t end = std::min(order.size(), start + block);
    work.assign(end - start, SampleWork{});
    if (jobs == 1) {
      for (std::size_t k = start; k < end; ++k) work[k - start] = process(k);
    } else {
      std::vector<std::thread> threads;
      std::exception_ptr error;
      std::mutex error_lock;
      for (std::size_t t = 0; t < jobs; ++t) {
        threads.emplace_back([&, t] {
          for (std::size_t k = start + t; k < end; k += jobs) {
            try {
              work[k - start] = process(k);
            } catch (...) {
              std::lock_guard lock(error_lock);
              if (!error) error = std::current_exception();
            }
          }
        });
      }
      for (auto& th : threads) th.join();
      if (error) std::rethrow_exception(error);
    }

    for (SampleWork& w : work) {
      result.outcomes.push_back(w.outcome);
      if (w.outcome.skipped) {
        ++result.skipped;
        continue;
      }
      ++result.analyzed;
      const bool failed = w.outcome.frames_to_failure.has_value();
      if (failed) {
        ++result.failed;
        ++result.failure_histogram[*w.outcome.frames_to_failure];
      } else {
        ++result.never_failed;
      }
      for (std::size_t l = 0; l < n_layers; ++l) {
        auto& lc = result.layers[l];
        if (!lc.analyzed) continue;
        for (std::size_t i = 0; i < lc.clean.size(); ++i) lc.clean[i] += w.clean_corr[l][i];
        lc.clean_degenerate_trains += w.clean_degenerate[l];
        if (failed) {
          for (std::size_t i = 0; i < lc.corrupt.size(); ++i) lc.corrupt[i] += w.corrupt_corr[l][i];
          lc.corrupt_degenerate_trains += w.corrupt_degenerate[l];
        }
      }
    }
  }

  if (result.analyzed == 0) {
    throw DomainError("robustness campaign: no sample was classified correctly");
  }
  for (auto& lc : result.layers) {
    if (!lc.analyzed) continue;
    for (double& v : lc.clean.data()) v /= static_cast<double>(result.analyzed);
    if (result.failed > 0) {
      for (double& v : lc.corrupt.data()) v /= static_cast<double>(result.failed);
    }
    lc.clean_stats = corr_distribution_stats(lc.clean, cfg.threshold);
    lc.corrupt_stats = corr_distribution_stats(lc.corrupt, cfg.threshold);
  }
  return result;
}

CampaignResult run_robustness_campaign(const Network& net, const Dataset& test,
                                       const CampaignConfig& cfg) {
  std::vector<std::size_t> sizes;
  for (const auto& l : net.layers) sizes.push_back(l.neurons());
  if (shape_numel(test.sample_shape()) != shape_numel(net.input_shape)) {
    throw DimensionError("campaign: test sample geometry " + shape_to_string(test.sample_shape()) +
                         " does not match network input " + shape_to_string(net.input_shape));
  }
  return run_robustness_campaign(network_classifier(net), sizes, net.t_steps, test, cfg);
}

}  // namespace snn
