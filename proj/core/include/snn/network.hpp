#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snn/autodiff.hpp"
#include "snn/encoding.hpp"
#include "snn/neuron.hpp"

namespace snn {

enum class LayerKind { linear_lif, conv_lif };

/// One synaptic layer followed by a population of LIF neurons.
struct LayerSpec {
  LayerKind kind = LayerKind::linear_lif;
  Shape in_shape;   // per sample: [features] or [c, h, w]
  Shape out_shape;  // per sample: [features] or [c, h, w]
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool bias = false;
  std::optional<LIFParams> lif_override;

  std::size_t neurons() const { return shape_numel(out_shape); }
};

struct Network {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  /// linear: [in, out]; conv: [out_c, in_c, k, k]
  std::vector<Tensor> weights;
  /// [out] for linear layers with bias, otherwise empty.
  std::vector<Tensor> biases;
  LIFParams lif;
  std::size_t t_steps = 10;

  std::size_t classes() const;
  std::size_t parameter_count() const;
  const LIFParams& layer_params(std::size_t layer) const;
  /// Trainable tensors in a fixed order (weights, then present biases).
  std::vector<Tensor*> parameters();
  /// Replace the network-wide neuron parameters (per-layer overrides kept).
  void set_lif(const LIFParams& params);
};

enum class Arch { mlpsnn, cnnsnn };

std::string to_string(Arch a);
Arch arch_from_string(const std::string& name);

/// Everything needed to construct a network of either family.
struct ArchSpec {
  Arch arch = Arch::mlpsnn;
  Shape input_shape{1, 28, 28};
  std::array<std::size_t, 2> mlp_hidden{256, 128};
  std::array<std::size_t, 3> conv_channels{16, 32, 32};
  std::size_t kernel = 3;
  std::size_t stride = 2;
  std::size_t padding = 1;
  std::size_t cnn_hidden = 128;
  std::size_t classes = 10;
  bool bias = false;
  std::uint64_t init_seed = 1;
};

/// Three fully connected LIF layers over flattened input.
Network build_mlpsnn(std::size_t input_dim, std::array<std::size_t, 2> hidden, std::size_t classes,
                     const LIFParams& lif, std::size_t t_steps = 10, std::uint64_t seed = 1,
                     bool bias = false);

/// Three conv-LIF layers followed by two linear-LIF layers.
Network build_cnnsnn(const Shape& input_chw, std::array<std::size_t, 3> channels,
                     std::size_t hidden, std::size_t classes, const LIFParams& lif,
                     std::size_t t_steps = 10, std::uint64_t seed = 1, std::size_t kernel = 3,
                     std::size_t stride = 2, std::size_t padding = 1, bool bias = false);

Network build_network(const ArchSpec& spec, const LIFParams& lif, std::size_t t_steps);

/// Binary spike trains of one sample: layers[l] is [T, neurons of layer l].
struct SpikeRecord {
  std::vector<Tensor> layers;
};

std::uint64_t count_spikes(const SpikeRecord& record);

/// Network weights bound to a tape, either as constants or as trainable parameters.
struct BoundWeights {
  std::vector<Var> weights;
  std::vector<Var> biases;  // invalid Var where a layer has no bias
};

BoundWeights bind_constants(Tape& tape, const Network& net);
BoundWeights bind_parameters(Tape& tape, Network& net);

struct BatchOutput {
  Var rates;  // [batch, classes]
  std::vector<std::uint64_t> spike_counts;
  std::vector<SpikeRecord> records;  // filled when requested
};

/// Runs T steps over a batch. `frames` is [T, batch, input dims...]; each
/// sample starts from a fresh resting state.
BatchOutput forward_batch(Tape& tape, const Network& net, const BoundWeights& bound,
                          const Tensor& frames, bool record);

/// Pack equally long input sequences into a [T, batch, ...] tensor.
Tensor batch_frames(std::span<const InputSequence> inputs);

struct ForwardResult {
  Tensor rates;  // [classes]
  std::optional<SpikeRecord> record;
  std::uint64_t spike_count = 0;
};

ForwardResult forward(const Network& net, const InputSequence& input, bool record);

/// Index of the largest rate; ties go to the lowest class index.
std::size_t argmax(std::span<const double> rates);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace snn
