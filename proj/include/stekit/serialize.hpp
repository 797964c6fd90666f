#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stekit/tensor.hpp"

namespace stekit {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

template <typename S>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() { return Dtype::f32; }
template <>
constexpr Dtype dtype_of<double>() { return Dtype::f64; }

inline const char kTensorMagic[4] = {'S', 'T', 'E', 'K'};
inline constexpr std::uint16_t kTensorVersion = 1;

namespace detail {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), std::streamsize(n));
}

template <typename U>
void put_le(std::ostream& os, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i)
    buf[i] = char((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& is, const std::string& context, const char* field) {
  char buf[sizeof(U)];
  is.read(buf, sizeof(U));
  if (std::size_t(is.gcount()) != sizeof(U))
    throw io_error(context + ": truncated while reading " + field);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= U(std::uint8_t(buf[i])) << (8 * i);
  return v;
}

}  // namespace detail

template <typename S>
void write_tensor(std::ostream& os, const Tensor<S>& t) {
  detail::put_bytes(os, kTensorMagic, 4);
  detail::put_le<std::uint16_t>(os, kTensorVersion);
  detail::put_le<std::uint8_t>(os, std::uint8_t(dtype_of<S>()));
  detail::put_le<std::uint8_t>(os, std::uint8_t(t.rank()));
  for (std::size_t e : t.shape()) detail::put_le<std::uint64_t>(os, e);
  if constexpr (std::is_same_v<S, float>) {
    for (std::size_t i = 0; i < t.size(); ++i)
      detail::put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(t[i]));
  } else {
    for (std::size_t i = 0; i < t.size(); ++i)
      detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(t[i]));
  }
}

struct TensorHeader {
  Dtype dtype;
  Shape extents;
};

inline TensorHeader read_tensor_header(std::istream& is,
                                       const std::string& context) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != std::string(kTensorMagic, 4))
    throw io_error(context + ": bad magic, expected \"STEK\"");
  const auto version =
      detail::get_le<std::uint16_t>(is, context, "format version");
  if (version != kTensorVersion)
    throw io_error(context + ": unsupported format version " +
                   std::to_string(version));
  const auto dtype = detail::get_le<std::uint8_t>(is, context, "dtype code");
  if (dtype > 1)
    throw io_error(context + ": unknown dtype code " + std::to_string(dtype));
  const auto rank = detail::get_le<std::uint8_t>(is, context, "rank");
  TensorHeader h{Dtype(dtype), {}};
  for (std::uint8_t i = 0; i < rank; ++i) {
    const auto e = detail::get_le<std::uint64_t>(is, context, "extent");
    if (e == 0) throw io_error(context + ": zero extent");
    h.extents.push_back(std::size_t(e));
  }
  return h;
}

template <typename S>
Tensor<S> read_tensor_payload(std::istream& is, const TensorHeader& h,
                              const std::string& context) {
  const std::size_t n = shape_numel(h.extents);
  std::vector<S> data(n);
  const std::size_t word = h.dtype == Dtype::f32 ? 4 : 8;
  std::vector<char> raw(n * word);
  is.read(raw.data(), std::streamsize(raw.size()));
  if (std::size_t(is.gcount()) != raw.size())
    throw io_error(context + ": truncated payload, expected " +
                   std::to_string(raw.size()) + " bytes, got " +
                   std::to_string(is.gcount()));
  for (std::size_t i = 0; i < n; ++i) {
    if (h.dtype == Dtype::f32) {
      std::uint32_t v = 0;
      for (std::size_t b = 0; b < 4; ++b)
        v |= std::uint32_t(std::uint8_t(raw[i * 4 + b])) << (8 * b);
      data[i] = S(std::bit_cast<float>(v));
    } else {
      std::uint64_t v = 0;
      for (std::size_t b = 0; b < 8; ++b)
        v |= std::uint64_t(std::uint8_t(raw[i * 8 + b])) << (8 * b);
      data[i] = S(std::bit_cast<double>(v));
    }
  }
  return Tensor<S>(h.extents, std::move(data));
}

/// Read a tensor, converting to S if the stored dtype differs.
template <typename S>
Tensor<S> read_tensor(std::istream& is, const std::string& context) {
  return read_tensor_payload<S>(is, read_tensor_header(is, context), context);
}

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

inline AnyTensor read_tensor_any(std::istream& is, const std::string& context) {
  const TensorHeader h = read_tensor_header(is, context);
  if (h.dtype == Dtype::f32)
    return read_tensor_payload<float>(is, h, context);
  return read_tensor_payload<double>(is, h, context);
}

template <typename S>
void save_tensor(const std::string& path, const Tensor<S>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error(path + ": cannot open for writing");
  write_tensor(os, t);
  if (!os) throw io_error(path + ": write failed");
}

template <typename S>
Tensor<S> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error(path + ": cannot open");
  return read_tensor<S>(is, path);
}

inline AnyTensor load_tensor_any(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error(path + ": cannot open");
  return read_tensor_any(is, path);
}

// ---- checkpoints --------------------------------------------------------------

/// Named tensors behind a structured-text header:
///   stekit-checkpoint 1
///   spec <stack notation or ->
///   meta <key> <value>        (0 or more)
///   entries <n>
///   <name>                    (n lines)
///   <n binary tensor records>
struct Checkpoint {
  std::string spec = "-";
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, AnyTensor>> entries;

  std::string meta_value(const std::string& key, std::string fallback = "")
      const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return fallback;
  }
};

inline void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << "stekit-checkpoint 1\n";
  os << "spec " << ckpt.spec << "\n";
  for (const auto& [k, v] : ckpt.meta) os << "meta " << k << " " << v << "\n";
  os << "entries " << ckpt.entries.size() << "\n";
  for (const auto& [name, tensor] : ckpt.entries) os << name << "\n";
  for (const auto& [name, tensor] : ckpt.entries)
    std::visit([&os](const auto& t) { write_tensor(os, t); }, tensor);
}

inline Checkpoint read_checkpoint(std::istream& is,
                                  const std::string& context) {
  Checkpoint ckpt;
  std::string line;
  if (!std::getline(is, line) || line != "stekit-checkpoint 1")
    throw io_error(context + ": not a stekit checkpoint (bad header line)");
  std::size_t count = 0;
  bool have_entries = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "spec") {
      ckpt.spec = line.substr(5);
    } else if (key == "meta") {
      std::string name, value;
      ls >> name;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta.emplace_back(name, value);
    } else if (key == "entries") {
      ls >> count;
      have_entries = true;
      break;
    } else {
      throw io_error(context + ": unexpected header line \"" + line + "\"");
    }
  }
  if (!have_entries)
    throw io_error(context + ": missing entries line");
  std::vector<std::string> names(count);
  for (std::size_t i = 0; i < count; ++i)
    if (!std::getline(is, names[i]) || names[i].empty())
      throw io_error(context + ": truncated entry name list");
  for (std::size_t i = 0; i < count; ++i)
    ckpt.entries.emplace_back(
        names[i], read_tensor_any(is, context + ": entry " + names[i]));
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error(path + ": cannot open for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw io_error(path + ": write failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error(path + ": cannot open");
  return read_checkpoint(is, path);
}

template <typename S>
Tensor<S> checkpoint_tensor(const Checkpoint& ckpt, const std::string& name) {
  for (const auto& [n, t] : ckpt.entries)
    if (n == name)
      return std::visit(
          [](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, Tensor<S>>) return v;
            else {
              Tensor<S> out(v.shape());
              for (std::size_t i = 0; i < v.size(); ++i) out[i] = S(v[i]);
              return out;
            }
          },
          t);
  throw io_error("checkpoint has no entry named \"" + name + "\"");
}

/// FNV-1a over a byte string; used to record freeze integrity in metrics.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace stekit
