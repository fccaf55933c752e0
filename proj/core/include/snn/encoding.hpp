#pragma once

#include <cstdint>
#include <string>

#include "snn/tensor.hpp"

namespace snn {

enum class Encoding { poisson, repeat };

std::string to_string(Encoding e);
Encoding encoding_from_string(const std::string& name);

/// T frames of network input; frames has shape [T, feature dims...].
struct InputSequence {
  Tensor frames;
  Encoding encoding = Encoding::repeat;

  std::size_t t_steps() const { return frames.rank() ? frames.dim(0) : 0; }
  Shape frame_shape() const { return Shape(frames.shape().begin() + 1, frames.shape().end()); }
};

/// Independent Bernoulli(pixel) draw per frame and pixel. Pixels must lie in [0, 1].
InputSequence poisson_encode(const Tensor& image, std::size_t t_steps, std::uint64_t seed);

/// T identical copies of the image.
InputSequence repeat_encode(const Tensor& image, std::size_t t_steps);

/// Deterministic 64-bit mix of a seed with stream identifiers (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace snn
