#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include "snn/tensor.hpp"

namespace snn {

/// Named-entry binary container shared by network checkpoints, datasets and
/// correlation matrices.
///
/// Layout (all integers and floats little-endian):
///
///     "SNNCKPT1"                      8-byte magic
///     u32 version (= 1)
///     u32 entry count
///     per entry, sorted by name:
///       u32 name length, name bytes (UTF-8)
///       u8  type: 1 = f64 array, 2 = text
///       f64 array: u32 rank, u64 dims[rank], f64 values[prod(dims)]
///       text:      u64 length, bytes
class Container {
 public:
  using Entry = std::variant<Tensor, std::string>;

  void put(const std::string& name, Tensor value);
  void put(const std::string& name, std::string text);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& tensor(const std::string& name) const;
  const std::string& text(const std::string& name) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::string serialize() const;
  static Container deserialize(const std::string& bytes);

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path);

 private:
  std::map<std::string, Entry> entries_;
};

inline constexpr char kContainerMagic[] = "SNNCKPT1";

/// Single-tensor convenience wrappers (entry name "data").
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace snn
