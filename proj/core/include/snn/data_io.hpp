#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

/// Images in [0, 1] with class labels. images is [N, sample dims...].
struct Dataset {
  Tensor images;
  std::vector<std::size_t> labels;
  std::size_t classes = 10;
  std::string name;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  Tensor image(std::size_t i) const;
  /// Throws DomainError if a label or pixel is out of range.
  void validate() const;
};

/// MNIST IDX pair (magic 0x00000803 images / 0x00000801 labels, big-endian).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// CIFAR-10 binary batches: 3073-byte records, label then 3x32x32 planar pixels.
Dataset load_cifar10_binary(std::span<const std::filesystem::path> paths);

/// Class-conditional intensity images: pixel p belongs to class (p mod classes);
/// own-class pixels have mean base*(1+separation), others base, plus Gaussian jitter.
Dataset synthetic_rates(std::size_t classes, std::size_t per_class, const Shape& geometry,
                        double separation, std::uint64_t seed, double base = 0.1,
                        double jitter = 0.05);

/// Deterministic subset of n samples; stratified keeps per-class counts balanced.
Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed, bool stratified);

/// Rows `indices` of `data`, in the given order.
Dataset select(const Dataset& data, std::span<const std::size_t> indices);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
};

/// Seeded shuffle, then the last round(fraction * N) samples become validation.
DatasetSplit split_validation(const Dataset& data, double fraction, std::uint64_t seed);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace snn
