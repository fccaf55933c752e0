#include "snn/network.hpp"

#include <cmath>
#include <random>

#include "snn/container.hpp"
#include "snn/error.hpp"
#include "snn/ops.hpp"

namespace snn {

std::size_t Network::classes() const {
  if (layers.empty()) return 0;
  return layers.back().neurons();
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

const LIFParams& Network::layer_params(std::size_t layer) const {
  const auto& override_params = layers.at(layer).lif_override;
  return override_params ? *override_params : lif;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& w : weights) out.push_back(&w);
  for (auto& b : biases)
    if (!b.empty()) out.push_back(&b);
  return out;
}

void Network::set_lif(const LIFParams& params) {
  params.validate();
  lif = params;
}

std::string to_string(Arch a) { return a == Arch::mlpsnn ? "mlpsnn" : "cnnsnn"; }

Arch arch_from_string(const std::string& name) {
  if (name == "mlpsnn" || name == "mlp") return Arch::mlpsnn;
  if (name == "cnnsnn" || name == "cnn") return Arch::cnnsnn;
  throw ConfigError("unknown architecture '" + name + "' (expected mlpsnn or cnnsnn)");
}

namespace {

// Uniform(-b, b) with b = sqrt(6 / fan_in) (He/Kaiming uniform).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

void add_linear(Network& net, std::size_t in, std::size_t out, bool bias, std::mt19937_64& rng) {
  if (in == 0 || out == 0) throw DimensionError("linear layer dimensions must be positive");
  LayerSpec spec;
  spec.kind = LayerKind::linear_lif;
  spec.in_shape = {in};
  spec.out_shape = {out};
  spec.bias = bias;
  net.layers.push_back(spec);
  net.weights.push_back(kaiming_uniform({in, out}, in, rng));
  net.biases.push_back(bias ? Tensor(Shape{out}, 0.0) : Tensor());
}

void add_conv(Network& net, const Shape& in_chw, std::size_t out_c, std::size_t kernel,
              std::size_t stride, std::size_t padding, std::mt19937_64& rng) {
  if (in_chw.size() != 3) throw DimensionError("conv layer needs [c, h, w] input geometry");
  if (out_c == 0) throw DimensionError("conv layer needs a positive channel count");
  const std::size_t oh = ops::conv_output_size(in_chw[1], kernel, stride, padding);
  const std::size_t ow = ops::conv_output_size(in_chw[2], kernel, stride, padding);
  LayerSpec spec;
  spec.kind = LayerKind::conv_lif;
  spec.in_shape = in_chw;
  spec.out_shape = {out_c, oh, ow};
  spec.kernel = kernel;
  spec.stride = stride;
  spec.padding = padding;
  net.layers.push_back(spec);
  net.weights.push_back(
      kaiming_uniform({out_c, in_chw[0], kernel, kernel}, in_chw[0] * kernel * kernel, rng));
  net.biases.emplace_back();
}

}  // namespace

Network build_mlpsnn(std::size_t input_dim, std::array<std::size_t, 2> hidden, std::size_t classes,
                     const LIFParams& lif, std::size_t t_steps, std::uint64_t seed, bool bias) {
  lif.validate();
  if (t_steps == 0) throw DomainError("t_steps must be positive");
  Network net;
  net.input_shape = {input_dim};
  net.lif = lif;
  net.t_steps = t_steps;
  std::mt19937_64 rng(seed);
  add_linear(net, input_dim, hidden[0], bias, rng);
  add_linear(net, hidden[0], hidden[1], bias, rng);
  add_linear(net, hidden[1], classes, bias, rng);
  return net;
}

Network build_cnnsnn(const Shape& input_chw, std::array<std::size_t, 3> channels,
                     std::size_t hidden, std::size_t classes, const LIFParams& lif,
                     std::size_t t_steps, std::uint64_t seed, std::size_t kernel,
                     std::size_t stride, std::size_t padding, bool bias) {
  lif.validate();
  if (t_steps == 0) throw DomainError("t_steps must be positive");
  if (input_chw.size() != 3) {
    throw DimensionError("cnnsnn input geometry must be [c, h, w], got " +
                         shape_to_string(input_chw));
  }
  Network net;
  net.input_shape = input_chw;
  net.lif = lif;
  net.t_steps = t_steps;
  std::mt19937_64 rng(seed);
  Shape geometry = input_chw;
  for (std::size_t c : channels) {
    add_conv(net, geometry, c, kernel, stride, padding, rng);
    geometry = net.layers.back().out_shape;
  }
  add_linear(net, shape_numel(geometry), hidden, bias, rng);
  add_linear(net, hidden, classes, bias, rng);
  return net;
}

Network build_network(const ArchSpec& spec, const LIFParams& lif, std::size_t t_steps) {
  if (spec.arch == Arch::mlpsnn) {
    return build_mlpsnn(shape_numel(spec.input_shape), spec.mlp_hidden, spec.classes, lif, t_steps,
                        spec.init_seed, spec.bias);
  }
  return build_cnnsnn(spec.input_shape, spec.conv_channels, spec.cnn_hidden, spec.classes, lif,
                      t_steps, spec.init_seed, spec.kernel, spec.stride, spec.padding, spec.bias);
}

std::uint64_t count_spikes(const SpikeRecord& record) {
  std::uint64_t total = 0;
  for (const Tensor& layer : record.layers) {
    for (double s : layer.data()) total += s != 0.0 ? 1 : 0;
  }
  return total;
}

BoundWeights bind_constants(Tape& tape, const Network& net) {
  BoundWeights b;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    b.weights.push_back(tape.constant(net.weights[i]));
    b.biases.push_back(net.biases[i].empty() ? Var() : tape.constant(net.biases[i]));
  }
  return b;
}

BoundWeights bind_parameters(Tape& tape, Network& net) {
  BoundWeights b;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    b.weights.push_back(tape.parameter(net.weights[i]));
    b.biases.push_back(net.biases[i].empty() ? Var() : tape.parameter(net.biases[i]));
  }
  return b;
}

Tensor batch_frames(std::span<const InputSequence> inputs) {
  if (inputs.empty()) throw DimensionError("batch_frames: empty batch");
  const Shape& first = inputs.front().frames.shape();
  const std::size_t t_steps = first.at(0);
  const std::size_t per_frame = shape_numel(first) / t_steps;
  Shape shape{t_steps, inputs.size()};
  shape.insert(shape.end(), first.begin() + 1, first.end());
  Tensor out(shape);
  auto dst = out.data();
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const Tensor& f = inputs[b].frames;
    if (f.shape() != first) {
      throw DimensionError("batch_frames: sequence " + shape_to_string(f.shape()) +
                           " differs from " + shape_to_string(first));
    }
    auto src = f.data();
    for (std::size_t t = 0; t < t_steps; ++t) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(t * per_frame), per_frame,
                  dst.begin() + static_cast<std::ptrdiff_t>((t * inputs.size() + b) * per_frame));
    }
  }
  return out;
}

BatchOutput forward_batch(Tape& tape, const Network& net, const BoundWeights& bound,
                          const Tensor& frames, bool record) {
  if (frames.rank() < 3) {
    throw DimensionError("forward: frames must be [T, batch, ...], got " +
                         shape_to_string(frames.shape()));
  }
  const std::size_t t_steps = frames.dim(0);
  const std::size_t batch = frames.dim(1);
  const std::size_t features = shape_numel(net.input_shape);
  if (shape_numel(frames.shape()) != t_steps * batch * features) {
    throw DimensionError("forward: frame geometry " + shape_to_string(frames.shape()) +
                         " does not match network input " + shape_to_string(net.input_shape));
  }
  if (net.layers.empty()) throw DimensionError("forward: network has no layers");

  const std::size_t n_layers = net.layers.size();
  BatchOutput out;
  out.spike_counts.assign(batch, 0);
  if (record) {
    out.records.resize(batch);
    for (auto& r : out.records) {
      for (const auto& layer : net.layers) r.layers.emplace_back(Shape{t_steps, layer.neurons()});
    }
  }

  std::vector<LIFState> states(n_layers);
  std::vector<Var> output_spikes;
  output_spikes.reserve(t_steps);
  Shape input_batch_shape{batch};
  input_batch_shape.insert(input_batch_shape.end(), net.input_shape.begin(),
                           net.input_shape.end());

  for (std::size_t t = 0; t < t_steps; ++t) {
    Tensor frame(input_batch_shape);
    std::copy_n(frames.data().begin() + static_cast<std::ptrdiff_t>(t * batch * features),
                batch * features, frame.data().begin());
    Var x = tape.constant(std::move(frame));

    for (std::size_t l = 0; l < n_layers; ++l) {
      const LayerSpec& spec = net.layers[l];
      Shape in_shape{batch};
      in_shape.insert(in_shape.end(), spec.in_shape.begin(), spec.in_shape.end());
      if (x.shape() != in_shape) x = ops::reshape(x, in_shape);

      Var current;
      if (spec.kind == LayerKind::linear_lif) {
        current = ops::matmul(x, bound.weights[l]);
        if (bound.biases[l].valid()) current = ops::add_row_vector(current, bound.biases[l]);
      } else {
        current = ops::conv2d(x, bound.weights[l], spec.stride, spec.padding);
      }

      const LIFParams& params = net.layer_params(l);
      if (t == 0) states[l] = fresh_state(tape, current.shape(), params);
      LIFStepResult step = lif_step(states[l], current, params);
      states[l] = step.state;
      x = step.spikes;

      const auto spikes = x.value().data();
      const std::size_t neurons = spec.neurons();
      for (std::size_t b = 0; b < batch; ++b) {
        const double* row = spikes.data() + b * neurons;
        std::uint64_t fired = 0;
        for (std::size_t i = 0; i < neurons; ++i) fired += row[i] != 0.0 ? 1 : 0;
        out.spike_counts[b] += fired;
        if (record) {
          std::copy_n(row, neurons,
                      out.records[b].layers[l].data().begin() +
                          static_cast<std::ptrdiff_t>(t * neurons));
        }
      }
    }
    output_spikes.push_back(x);
  }

  Var stacked = ops::stack(output_spikes);
  if (stacked.shape().size() != 3) {
    stacked = ops::reshape(stacked, {t_steps, batch, net.classes()});
  }
  out.rates = ops::mean_over_axis(stacked, 0);
  return out;
}

ForwardResult forward(const Network& net, const InputSequence& input, bool record) {
  Tape tape;
  BoundWeights bound = bind_constants(tape, net);
  const InputSequence* one = &input;
  BatchOutput batch = forward_batch(tape, net, bound, batch_frames({one, 1}), record);
  ForwardResult r;
  r.rates = batch.rates.value().reshaped({net.classes()});
  r.spike_count = batch.spike_counts[0];
  if (record) r.record = std::move(batch.records[0]);
  return r;
}

std::size_t argmax(std::span<const double> rates) {
  if (rates.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (rates[i] > rates[best]) best = i;
  }
  return best;
}

namespace {

Tensor shape_tensor(const Shape& s) {
  std::vector<double> v(s.begin(), s.end());
  const Shape shape{v.size()};
  return Tensor(shape, std::move(v));
}

Shape tensor_shape(const Tensor& t) {
  Shape s;
  for (double v : t.data()) s.push_back(static_cast<std::size_t>(v));
  return s;
}

Tensor lif_tensor(const LIFParams& p) {
  return Tensor::from_list({p.tau, p.v_th, p.v_reset,
                            p.surrogate == Surrogate::arctan ? 0.0 : 1.0, p.alpha,
                            p.grad_through_reset ? 1.0 : 0.0,
                            p.firing == FiringMode::heaviside ? 0.0 : 1.0});
}

LIFParams lif_from_tensor(const Tensor& t) {
  if (t.size() != 7) throw FormatError("checkpoint LIF block has wrong size");
  LIFParams p;
  p.tau = t[0];
  p.v_th = t[1];
  p.v_reset = t[2];
  p.surrogate = t[3] == 0.0 ? Surrogate::arctan : Surrogate::sigmoid;
  p.alpha = t[4];
  p.grad_through_reset = t[5] != 0.0;
  p.firing = t[6] == 0.0 ? FiringMode::heaviside : FiringMode::smooth;
  return p;
}

}  // namespace

void save_network(const Network& net, const std::filesystem::path& path) {
  Container c;
  c.put("format", std::string("network"));
  c.put("lif", lif_tensor(net.lif));
  c.put("t_steps", Tensor::from_list({static_cast<double>(net.t_steps)}));
  c.put("input_shape", shape_tensor(net.input_shape));
  c.put("layer_count", Tensor::from_list({static_cast<double>(net.layers.size())}));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const std::string prefix = "layer." + std::to_string(i) + ".";
    c.put(prefix + "kind", std::string(l.kind == LayerKind::linear_lif ? "linear-lif" : "conv-lif"));
    c.put(prefix + "in_shape", shape_tensor(l.in_shape));
    c.put(prefix + "out_shape", shape_tensor(l.out_shape));
    c.put(prefix + "conv", Tensor::from_list({static_cast<double>(l.kernel),
                                              static_cast<double>(l.stride),
                                              static_cast<double>(l.padding)}));
    Tensor w = net.weights[i];
    c.put(prefix + "weight", Tensor(w.shape(), w.storage()));
    if (!net.biases[i].empty()) {
      c.put(prefix + "bias", Tensor(net.biases[i].shape(), net.biases[i].storage()));
    }
    if (l.lif_override) c.put(prefix + "lif", lif_tensor(*l.lif_override));
  }
  c.save(path);
}

Network load_network(const std::filesystem::path& path) {
  Container c = Container::load(path);
  if (!c.contains("format") || c.text("format") != "network") {
    throw FormatError(path.string() + " is not a network checkpoint");
  }
  Network net;
  net.lif = lif_from_tensor(c.tensor("lif"));
  net.t_steps = static_cast<std::size_t>(c.tensor("t_steps").item());
  net.input_shape = tensor_shape(c.tensor("input_shape"));
  const auto n = static_cast<std::size_t>(c.tensor("layer_count").item());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string prefix = "layer." + std::to_string(i) + ".";
    LayerSpec l;
    const std::string& kind = c.text(prefix + "kind");
    if (kind == "linear-lif") {
      l.kind = LayerKind::linear_lif;
    } else if (kind == "conv-lif") {
      l.kind = LayerKind::conv_lif;
    } else {
      throw FormatError("unknown layer kind '" + kind + "'");
    }
    l.in_shape = tensor_shape(c.tensor(prefix + "in_shape"));
    l.out_shape = tensor_shape(c.tensor(prefix + "out_shape"));
    const Tensor& conv = c.tensor(prefix + "conv");
    l.kernel = static_cast<std::size_t>(conv[0]);
    l.stride = static_cast<std::size_t>(conv[1]);
    l.padding = static_cast<std::size_t>(conv[2]);
    if (c.contains(prefix + "lif")) l.lif_override = lif_from_tensor(c.tensor(prefix + "lif"));
    l.bias = c.contains(prefix + "bias");
    net.weights.push_back(c.tensor(prefix + "weight"));
    net.biases.push_back(l.bias ? c.tensor(prefix + "bias") : Tensor());
    net.layers.push_back(std::move(l));
  }
  for (const Tensor& w : net.weights) {
    if (!w.all_finite()) throw FormatError("checkpoint contains non-finite weights");
  }
  return net;
}

}  // namespace snn
