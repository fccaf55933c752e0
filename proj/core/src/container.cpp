#include "snn/container.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "snn/error.hpp"

namespace snn {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kTypeTensor = 1;
constexpr std::uint8_t kTypeText = 2;

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("container truncated");
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Container::put(const std::string& name, Tensor value) { entries_[name] = std::move(value); }

void Container::put(const std::string& name, std::string text) {
  entries_[name] = std::move(text);
}

const Tensor& Container::tensor(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("container has no entry '" + name + "'");
  if (const auto* t = std::get_if<Tensor>(&it->second)) return *t;
  throw FormatError("container entry '" + name + "' is not an array");
}

const std::string& Container::text(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("container has no entry '" + name + "'");
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw FormatError("container entry '" + name + "' is not text");
}

std::string Container::serialize() const {
  std::string out(kContainerMagic, 8);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, entry] : entries_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    if (const auto* t = std::get_if<Tensor>(&entry)) {
      put_le<std::uint8_t>(out, kTypeTensor);
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
      for (std::size_t d : t->shape()) put_le<std::uint64_t>(out, d);
      for (double v : t->data()) put_le<double>(out, v);
    } else {
      const auto& s = std::get<std::string>(entry);
      put_le<std::uint8_t>(out, kTypeText);
      put_le<std::uint64_t>(out, s.size());
      out += s;
    }
  }
  return out;
}

Container Container::deserialize(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 8, kContainerMagic, 8) != 0) {
    throw FormatError("not an SNNCKPT1 container (bad magic)");
  }
  Reader r(bytes);
  r.get_bytes(8);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  Container c;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.get_bytes(name_len);
    const auto type = r.get<std::uint8_t>();
    if (type == kTypeTensor) {
      const auto rank = r.get<std::uint32_t>();
      if (rank > 16) throw FormatError("container entry '" + name + "' has implausible rank");
      Shape shape(rank);
      std::size_t numel = 1;
      for (auto& d : shape) {
        d = static_cast<std::size_t>(r.get<std::uint64_t>());
        numel *= d;
      }
      r.need(numel * sizeof(double));
      std::vector<double> data(numel);
      for (double& v : data) v = r.get<double>();
      c.put(name, Tensor(std::move(shape), std::move(data)));
    } else if (type == kTypeText) {
      const auto len = r.get<std::uint64_t>();
      c.put(name, r.get_bytes(static_cast<std::size_t>(len)));
    } else {
      throw FormatError("container entry '" + name + "' has unknown type " + std::to_string(type));
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after container entries");
  return c;
}

void Container::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  Container c;
  c.put("data", t);
  c.save(path);
}

Tensor load_tensor(const std::filesystem::path& path) { return Container::load(path).tensor("data"); }

}  // namespace snn
