#include "snn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "snn/container.hpp"
#include "snn/error.hpp"

namespace snn {

Shape Dataset::sample_shape() const {
  return Shape(images.shape().begin() + 1, images.shape().end());
}

Tensor Dataset::image(std::size_t i) const { return images.slice(i); }

void Dataset::validate() const {
  if (images.rank() == 0 || images.dim(0) != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(labels.size()) + " labels for images " +
                         shape_to_string(images.shape()));
  }
  for (std::size_t l : labels) {
    if (l >= classes) throw DomainError("label " + std::to_string(l) + " outside class range");
  }
  for (double p : images.data()) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("pixel value outside [0, 1]");
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) throw FormatError("IDX header truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  // Headers are validated before the bulk payload is read.
  std::ifstream img_in(images_path, std::ios::binary);
  if (!img_in) throw ConfigError("cannot open " + images_path.string());
  std::ifstream lab_in(labels_path, std::ios::binary);
  if (!lab_in) throw ConfigError("cannot open " + labels_path.string());
  std::string img(16, '\0');
  std::string lab(8, '\0');
  img.resize(static_cast<std::size_t>(img_in.read(img.data(), 16).gcount()));
  lab.resize(static_cast<std::size_t>(lab_in.read(lab.data(), 8).gcount()));
  if (read_be32(img, 0) != 0x00000803) {
    throw FormatError(images_path.string() + ": bad IDX image magic");
  }
  if (read_be32(lab, 0) != 0x00000801) {
    throw FormatError(labels_path.string() + ": bad IDX label magic");
  }
  read_be32(img, 12);
  {
    std::ostringstream rest;
    rest << img_in.rdbuf();
    img += rest.str();
  }
  {
    std::ostringstream rest;
    rest << lab_in.rdbuf();
    lab += rest.str();
  }
  const std::size_t n_images = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  const std::size_t n_labels = read_be32(lab, 4);
  if (n_images != n_labels) {
    throw FormatError("IDX image count " + std::to_string(n_images) + " != label count " +
                      std::to_string(n_labels));
  }
  if (img.size() != 16 + n_images * rows * cols) {
    throw FormatError(images_path.string() + ": expected " +
                      std::to_string(16 + n_images * rows * cols) + " bytes, found " +
                      std::to_string(img.size()));
  }
  if (lab.size() != 8 + n_labels) {
    throw FormatError(labels_path.string() + ": expected " + std::to_string(8 + n_labels) +
                      " bytes, found " + std::to_string(lab.size()));
  }

  Dataset d;
  d.name = "mnist";
  d.classes = 10;
  d.images = Tensor(Shape{n_images, 1, rows, cols});
  auto px = d.images.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<unsigned char>(img[16 + i]) / 255.0;
  }
  d.labels.resize(n_labels);
  for (std::size_t i = 0; i < n_labels; ++i) {
    const auto label = static_cast<unsigned char>(lab[8 + i]);
    if (label >= 10) throw FormatError("IDX label " + std::to_string(label) + " out of range");
    d.labels[i] = label;
  }
  return d;
}

Dataset load_cifar10_binary(std::span<const std::filesystem::path> paths) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  constexpr std::size_t kRecord = 1 + kPixels;
  std::vector<std::string> blobs;
  std::size_t total = 0;
  for (const auto& p : paths) {
    blobs.push_back(read_file(p));
    if (blobs.back().size() % kRecord != 0) {
      throw FormatError(p.string() + ": length " + std::to_string(blobs.back().size()) +
                        " is not a multiple of 3073");
    }
    total += blobs.back().size() / kRecord;
  }
  Dataset d;
  d.name = "cifar10";
  d.classes = 10;
  d.images = Tensor(Shape{total, 3, 32, 32});
  d.labels.reserve(total);
  auto px = d.images.data();
  std::size_t row = 0;
  for (const std::string& blob : blobs) {
    for (std::size_t off = 0; off < blob.size(); off += kRecord, ++row) {
      const auto label = static_cast<unsigned char>(blob[off]);
      if (label >= 10) {
        throw FormatError("CIFAR-10 label " + std::to_string(label) + " out of range");
      }
      d.labels.push_back(label);
      for (std::size_t i = 0; i < kPixels; ++i) {
        px[row * kPixels + i] = static_cast<unsigned char>(blob[off + 1 + i]) / 255.0;
      }
    }
  }
  return d;
}

Dataset synthetic_rates(std::size_t classes, std::size_t per_class, const Shape& geometry,
                        double separation, std::uint64_t seed, double base, double jitter) {
  if (classes == 0) throw DomainError("synthetic_rates: need at least one class");
  if (separation < 0.0) throw DomainError("synthetic_rates: separation must be >= 0");
  const std::size_t pixels = shape_numel(geometry);
  const std::size_t n = classes * per_class;
  Dataset d;
  d.name = "synthetic";
  d.classes = classes;
  Shape shape{n};
  shape.insert(shape.end(), geometry.begin(), geometry.end());
  d.images = Tensor(shape);
  d.labels.resize(n);

  const double high = std::min(1.0, base * (1.0 + separation));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, jitter);
  auto px = d.images.data();
  // Interleave classes so any prefix stays roughly balanced.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % classes;
    d.labels[i] = label;
    for (std::size_t p = 0; p < pixels; ++p) {
      const double mean = (p % classes == label) ? high : base;
      px[i * pixels + p] = std::clamp(mean + noise(rng), 0.0, 1.0);
    }
  }
  return d;
}

Dataset select(const Dataset& data, std::span<const std::size_t> indices) {
  const Shape sample = data.sample_shape();
  const std::size_t per = shape_numel(sample);
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample.begin(), sample.end());
  Dataset out;
  out.name = data.name;
  out.classes = data.classes;
  out.images = Tensor(shape);
  out.labels.reserve(indices.size());
  auto src = data.images.data();
  auto dst = out.images.data();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= data.size()) throw DimensionError("select: index out of range");
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * per), per,
                dst.begin() + static_cast<std::ptrdiff_t>(k * per));
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed, bool stratified) {
  if (n > data.size()) {
    throw DomainError("subsample: requested " + std::to_string(n) + " of " +
                      std::to_string(data.size()) + " samples");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  if (!stratified) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(chosen.begin(), chosen.end());
  } else {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
    for (auto& [label, idx] : by_class) std::shuffle(idx.begin(), idx.end(), rng);
    // Round-robin over classes keeps counts within one of each other.
    std::vector<std::size_t> cursor(by_class.size(), 0);
    while (chosen.size() < n) {
      bool progressed = false;
      std::size_t c = 0;
      for (auto& [label, idx] : by_class) {
        if (chosen.size() == n) break;
        if (cursor[c] < idx.size()) {
          chosen.push_back(idx[cursor[c]++]);
          progressed = true;
        }
        ++c;
      }
      if (!progressed) break;
    }
    std::sort(chosen.begin(), chosen.end());
  }
  return select(data, chosen);
}

DatasetSplit split_validation(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw DomainError("validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  const std::size_t n_train = data.size() - n_val;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {select(data, train), select(data, val)};
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  Container c;
  c.put("format", std::string("dataset"));
  c.put("name", data.name);
  c.put("images", Tensor(data.images.shape(), data.images.storage()));
  std::vector<double> labels(data.labels.begin(), data.labels.end());
  const Shape label_shape{labels.size()};
  c.put("labels", Tensor(label_shape, std::move(labels)));
  c.put("classes", Tensor::from_list({static_cast<double>(data.classes)}));
  c.save(path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  Container c = Container::load(path);
  if (!c.contains("format") || c.text("format") != "dataset") {
    throw FormatError(path.string() + " is not a dataset container");
  }
  Dataset d;
  d.name = c.text("name");
  d.images = c.tensor("images");
  for (double l : c.tensor("labels").data()) d.labels.push_back(static_cast<std::size_t>(l));
  d.classes = static_cast<std::size_t>(c.tensor("classes").item());
  d.validate();
  return d;
}

}  // namespace snn
