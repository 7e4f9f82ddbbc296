#pragma once

// Weight file layout (all integers little-endian):
//
//   "MCDF"                                   4-byte magic
//   u32 version                              currently 1
//   u32 n_layers, d_model, n_heads, d_ff, n_t, max_len
//   f64 ln_eps                               IEEE-754 bits as u64
//   u32 tensor_count
//   tensor_count x {
//     u32 name_length, name bytes,
//     u32 rank, u64 dims[rank],
//     f64 payload[prod(dims)]                row-major
//   }
//   u64 checksum                             FNV-1a 64 over every payload byte,
//                                            in record order

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/error.hpp"
#include "mcdrop/model.hpp"

namespace mcdrop {

inline constexpr char kWeightMagic[4] = {'M', 'C', 'D', 'F'};
inline constexpr std::uint32_t kWeightFormatVersion = 1;

class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const unsigned char> bytes) noexcept {
    for (unsigned char b : bytes) {
      state_ ^= b;
      state_ *= kPrime;
    }
  }
  void update(std::string_view s) noexcept {
    update(std::span(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  Fnv1a64 h;
  h.update(s);
  return h.digest();
}

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& str() const noexcept { return buf_; }
  std::size_t size() const noexcept { return buf_.size(); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw IoError("weight file is truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::uint32_t narrow_u32(std::size_t v, const char* field) {
  if (v > 0xFFFFFFFFULL) throw ConfigError(std::string(field) + " does not fit the weight format");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline std::string serialize_weights(const Parameters& params) {
  const ModelConfig& c = params.config;
  detail::ByteWriter w;
  w.bytes(std::string_view(kWeightMagic, 4));
  w.u32(kWeightFormatVersion);
  w.u32(detail::narrow_u32(c.n_layers, "n_layers"));
  w.u32(detail::narrow_u32(c.d_model, "d_model"));
  w.u32(detail::narrow_u32(c.n_heads, "n_heads"));
  w.u32(detail::narrow_u32(c.d_ff, "d_ff"));
  w.u32(detail::narrow_u32(c.n_t, "n_t"));
  w.u32(detail::narrow_u32(c.max_len, "max_len"));
  w.f64(c.ln_eps);

  std::uint32_t count = 0;
  for_each_tensor(params, [&](const TensorView<const double>&) { ++count; });
  w.u32(count);

  Fnv1a64 checksum;
  for_each_tensor(params, [&](const TensorView<const double>& t) {
    w.u32(detail::narrow_u32(t.name.size(), "tensor name"));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u64(d);
    const std::size_t start = w.size();
    for (std::size_t i = 0; i < t.element_count(); ++i) w.f64(t.data[i]);
    checksum.update(std::string_view(w.str()).substr(start));
  });
  w.u64(checksum.digest());
  return w.str();
}

inline Parameters deserialize_weights(std::string_view data) {
  detail::ByteReader r(data);
  if (r.bytes(4) != std::string_view(kWeightMagic, 4)) throw IoError("not a weight file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) throw UnsupportedVersion(version);

  ModelConfig c;
  c.n_layers = r.u32();
  c.d_model = r.u32();
  c.n_heads = r.u32();
  c.d_ff = r.u32();
  c.n_t = r.u32();
  c.max_len = r.u32();
  c.ln_eps = r.f64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ShapeMismatch(std::string("invalid model config in weight file: ") + e.what());
  }
  // Header bytes are outside the checksum; refuse to allocate more than the
  // file could possibly hold.
  const double implied = static_cast<double>(c.n_t + c.max_len) * static_cast<double>(c.d_model) +
                         static_cast<double>(c.n_layers) *
                             (4.0 * static_cast<double>(c.d_model * c.d_model) +
                              2.0 * static_cast<double>(c.d_model * c.d_ff)) +
                         static_cast<double>(c.d_model * c.n_t);
  if (implied > static_cast<double>(r.remaining()) / 8.0)
    throw ShapeMismatch("model config implies more parameters than the file contains");
  Parameters params = allocate_parameters(c);

  std::vector<TensorView<double>> expected;
  for_each_tensor(params, [&](const TensorView<double>& t) { expected.push_back(t); });
  const std::uint32_t count = r.u32();
  if (count != expected.size())
    throw ShapeMismatch("weight file holds " + std::to_string(count) + " tensors, config implies " +
                        std::to_string(expected.size()));

  Fnv1a64 checksum;
  for (const auto& t : expected) {
    const std::string_view name = r.bytes(r.u32());
    if (name != t.name)
      throw ShapeMismatch("expected tensor '" + t.name + "', found '" + std::string(name) + "'");
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.u64());
    if (dims != t.dims) throw ShapeMismatch("tensor '" + t.name + "' has unexpected dimensions");
    const std::size_t n = t.element_count();
    if (r.remaining() / 8 < n) throw IoError("weight file is truncated");
    const std::string_view payload = r.bytes(n * 8);
    checksum.update(payload);
    detail::ByteReader pr(payload);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = pr.f64();
  }
  const std::uint64_t stored = r.u64();
  if (stored != checksum.digest()) throw ChecksumMismatch("weight file checksum mismatch");
  if (r.remaining() != 0) throw IoError("trailing bytes after weight file checksum");
  return params;
}

inline void save_weights(const Parameters& params, const std::filesystem::path& path) {
  const std::string bytes = serialize_weights(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline Parameters load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return deserialize_weights(bytes);
}

}  // namespace mcdrop
