#include "snn/encoding.hpp"

#include <algorithm>
#include <random>

#include "snn/error.hpp"

namespace snn {

std::string to_string(Encoding e) { return e == Encoding::poisson ? "poisson" : "repeat"; }

Encoding encoding_from_string(const std::string& name) {
  if (name == "poisson") return Encoding::poisson;
  if (name == "repeat") return Encoding::repeat;
  throw ConfigError("unknown encoding '" + name + "' (expected poisson or repeat)");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Shape sequence_shape(const Tensor& image, std::size_t t_steps) {
  if (t_steps == 0) throw DomainError("encoder needs at least one timestep");
  Shape shape{t_steps};
  shape.insert(shape.end(), image.shape().begin(), image.shape().end());
  return shape;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

InputSequence poisson_encode(const Tensor& image, std::size_t t_steps, std::uint64_t seed) {
  for (double p : image.data()) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("poisson_encode: pixel value " + std::to_string(p) + " outside [0, 1]");
    }
  }
  Tensor frames(sequence_shape(image, t_steps));
  std::mt19937_64 rng(seed);
  // 53-bit uniform in [0, 1): p = 1 always fires, p = 0 never does.
  constexpr double kScale = 1.0 / 9007199254740992.0;
  const auto pixels = image.data();
  auto out = frames.data();
  for (std::size_t t = 0; t < t_steps; ++t) {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * kScale;
      out[t * pixels.size() + i] = u < pixels[i] ? 1.0 : 0.0;
    }
  }
  return {std::move(frames), Encoding::poisson};
}

InputSequence repeat_encode(const Tensor& image, std::size_t t_steps) {
  Tensor frames(sequence_shape(image, t_steps));
  const auto pixels = image.data();
  auto out = frames.data();
  for (std::size_t t = 0; t < t_steps; ++t) {
    std::copy(pixels.begin(), pixels.end(), out.begin() + static_cast<std::ptrdiff_t>(t * pixels.size()));
  }
  return {std::move(frames), Encoding::repeat};
}

}  // namespace snn
