// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

/*
 * FFPB model container.
 *
 * All integers little-endian, FP32 payloads IEEE-754 binary32.
 *
 *   "FFPB"                     4 bytes magic
 *   version                    u32 (= 1)
 *   tensor count               u32
 *   per tensor:
 *     name length, name        u16, UTF-8 bytes
 *     role                     u8 (0 weight, 1 activation)
 *     dtype                    u8 (0 FP32, 1 FFP8)
 *     [FFP8 only] x, y, z, b   u8, u8, u8, i16
 *     rank                     u8
 *     extents                  u32 * rank
 *     payload                  FP32: 4 bytes/element
 *                              FFP8: 1 byte/code when n <= 8, else 2 bytes (u16)
 *   layer count                u32
 *   per layer:
 *     name length, name        u16, bytes
 *     kind                     u8 (0 input, 1 dense, 2 relu, 3 output)
 *     reference count          u16
 *     references               (u16 length, bytes) * count
 *   metadata count             u32
 *   per entry:                 (u16 length, key bytes), (u32 length, value bytes)
 *
 * Writing is canonical: read_bundle followed by write_bundle reproduces the
 * input stream byte for byte.
 */

#ifndef FFP8_BUNDLE_HPP
#define FFP8_BUNDLE_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "ffp8/error.hpp"
#include "ffp8/format.hpp"
#include "ffp8/tensor.hpp"

namespace ffp8 {

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr char kBundleMagic[4] = {'F', 'F', 'P', 'B'};

enum class LayerKind : std::uint8_t { input = 0, dense = 1, relu = 2, output = 3 };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::input: return "input";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::output: return "output";
  }
  return "?";
}

/// A dense layer references its weight matrix [out, in] first, then its
/// bias vector [out].
struct Layer {
  std::string name;
  LayerKind kind = LayerKind::input;
  std::vector<std::string> tensors;

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelBundle {
  std::vector<Layer> layers;
  std::vector<Tensor> tensors;
  std::vector<std::pair<std::string, std::string>> metadata;

  const Tensor* find(std::string_view name) const {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const Tensor& t) { return t.name == name; });
    return it == tensors.end() ? nullptr : &*it;
  }
  Tensor* find(std::string_view name) {
    return const_cast<Tensor*>(static_cast<const ModelBundle&>(*this).find(name));
  }

  const std::string* meta(std::string_view key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return &v;
    return nullptr;
  }
  void set_meta(const std::string& key, std::string value) {
    for (auto& [k, v] : metadata)
      if (k == key) {
        v = std::move(value);
        return;
      }
    metadata.emplace_back(key, std::move(value));
  }

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Throws DuplicateTensorName / UnresolvedReference / ShapeMismatch.
inline void validate_bundle(const ModelBundle& m) {
  std::set<std::string_view> names;
  for (const Tensor& t : m.tensors) {
    if (!names.insert(t.name).second) throw Error(Errc::DuplicateTensorName, "tensor '" + t.name + "' appears twice");
    const std::size_t payload = t.is_fp32() ? t.values().size() : t.encoded().codes.size();
    if (payload != t.element_count())
      throw Error(Errc::ShapeMismatch, "tensor '" + t.name + "' payload length differs from its shape");
  }
  for (const Layer& l : m.layers)
    for (const std::string& ref : l.tensors)
      if (!names.count(ref))
        throw Error(Errc::UnresolvedReference, "layer '" + l.name + "' references missing tensor '" + ref + "'");
}

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }

  void put_f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

  void put_string16(std::string_view s) {
    if (s.size() > 0xFFFF) throw Error(Errc::MalformedStream, "string longer than 65535 bytes");
    put(static_cast<std::uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void put_string32(std::string_view s) {
    if (s.size() > 0xFFFFFFFFu) throw Error(Errc::MalformedStream, "string too long");
    put(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void put_bytes(std::span<const char> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    static_assert(std::is_integral_v<T>);
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_string16() { return get_bytes(get<std::uint16_t>()); }
  std::string get_string32() { return get_bytes(get<std::uint32_t>()); }

  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  void need(std::size_t n) const {
    if (remaining() < n)
      throw Error(Errc::TruncatedStream, "needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                                             ", " + std::to_string(remaining()) + " left");
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::size_t code_bytes(const Format& fmt) { return fmt.width() <= 8 ? 1 : 2; }

}  // namespace detail

inline std::vector<std::uint8_t> write_bundle(const ModelBundle& m) {
  validate_bundle(m);
  detail::ByteWriter w;
  w.put_bytes(kBundleMagic);
  w.put(kBundleVersion);
  w.put(static_cast<std::uint32_t>(m.tensors.size()));
  for (const Tensor& t : m.tensors) {
    w.put_string16(t.name);
    w.put(static_cast<std::uint8_t>(t.role));
    w.put(static_cast<std::uint8_t>(t.is_fp32() ? 0 : 1));
    if (t.is_encoded()) {
      const Format& f = t.encoded().format;
      w.put(static_cast<std::uint8_t>(f.sign_bits()));
      w.put(static_cast<std::uint8_t>(f.exp_bits()));
      w.put(static_cast<std::uint8_t>(f.frac_bits()));
      w.put(static_cast<std::int16_t>(f.bias()));
    }
    if (t.shape.size() > 0xFF) throw Error(Errc::MalformedStream, "tensor '" + t.name + "' has rank above 255");
    w.put(static_cast<std::uint8_t>(t.shape.size()));
    for (std::uint32_t d : t.shape) {
      if (d == 0) throw Error(Errc::ShapeMismatch, "tensor '" + t.name + "' has a zero extent");
      w.put(d);
    }
    if (t.is_fp32()) {
      for (float v : t.values()) w.put_f32(v);
    } else {
      const EncodedPayload& enc = t.encoded();
      const bool wide = detail::code_bytes(enc.format) == 2;
      for (Code c : enc.codes) {
        if (wide)
          w.put(static_cast<std::uint16_t>(c));
        else
          w.put(static_cast<std::uint8_t>(c));
      }
    }
  }
  w.put(static_cast<std::uint32_t>(m.layers.size()));
  for (const Layer& l : m.layers) {
    w.put_string16(l.name);
    w.put(static_cast<std::uint8_t>(l.kind));
    if (l.tensors.size() > 0xFFFF) throw Error(Errc::MalformedStream, "layer '" + l.name + "' has too many tensors");
    w.put(static_cast<std::uint16_t>(l.tensors.size()));
    for (const std::string& ref : l.tensors) w.put_string16(ref);
  }
  w.put(static_cast<std::uint32_t>(m.metadata.size()));
  for (const auto& [k, v] : m.metadata) {
    w.put_string16(k);
    w.put_string32(v);
  }
  return w.take();
}

inline ModelBundle read_bundle(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < 4 || std::memcmp(bytes.data(), kBundleMagic, 4) != 0)
    throw Error(Errc::BadMagic, "stream does not start with \"FFPB\"");
  r.get_bytes(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion) throw Error(Errc::BadVersion, "unsupported container version " + std::to_string(version));

  ModelBundle m;
  const auto tensor_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    Tensor t;
    t.name = r.get_string16();
    const auto role = r.get<std::uint8_t>();
    if (role > 1) throw Error(Errc::MalformedStream, "tensor '" + t.name + "' has role byte " + std::to_string(role));
    t.role = static_cast<Role>(role);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw Error(Errc::MalformedStream, "tensor '" + t.name + "' has dtype byte " + std::to_string(dtype));
    std::optional<Format> fmt;
    if (dtype == 1) {
      const int x = r.get<std::uint8_t>();
      const int y = r.get<std::uint8_t>();
      const int z = r.get<std::uint8_t>();
      const int b = r.get<std::int16_t>();
      try {
        fmt = Format::make(x, y, z, b);
      } catch (const Error& e) {
        throw Error(Errc::MalformedStream, "tensor '" + t.name + "' carries an invalid format: " + e.what());
      }
    }
    const auto rank = r.get<std::uint8_t>();
    std::size_t count = 1;
    for (int d = 0; d < rank; ++d) {
      const auto extent = r.get<std::uint32_t>();
      if (extent == 0) throw Error(Errc::MalformedStream, "tensor '" + t.name + "' has a zero extent");
      t.shape.push_back(extent);
      count *= extent;
      if (count > r.remaining()) throw Error(Errc::TruncatedStream, "tensor '" + t.name + "' payload exceeds the stream");
    }
    if (!fmt) {
      r.need(count * 4);
      std::vector<float> values(count);
      for (float& v : values) v = r.get_f32();
      t.payload = std::move(values);
    } else {
      const bool wide = detail::code_bytes(*fmt) == 2;
      r.need(count * (wide ? 2 : 1));
      EncodedPayload enc{*fmt, std::vector<Code>(count)};
      for (Code& c : enc.codes) {
        c = wide ? r.get<std::uint16_t>() : r.get<std::uint8_t>();
        if ((std::uint32_t{c} >> fmt->width()) != 0)
          throw Error(Errc::MalformedStream, "tensor '" + t.name + "' holds a code wider than its format");
      }
      t.payload = std::move(enc);
    }
    m.tensors.push_back(std::move(t));
  }

  const auto layer_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    Layer l;
    l.name = r.get_string16();
    const auto kind = r.get<std::uint8_t>();
    if (kind > 3) throw Error(Errc::MalformedStream, "layer '" + l.name + "' has kind byte " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    const auto refs = r.get<std::uint16_t>();
    for (std::uint16_t k = 0; k < refs; ++k) l.tensors.push_back(r.get_string16());
    m.layers.push_back(std::move(l));
  }

  const auto meta_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = r.get_string16();
    std::string value = r.get_string32();
    m.metadata.emplace_back(std::move(key), std::move(value));
  }
  if (r.remaining() != 0)
    throw Error(Errc::TrailingData, std::to_string(r.remaining()) + " bytes after the metadata section");
  validate_bundle(m);
  return m;
}

inline ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::TruncatedStream, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_bundle(bytes);
}

inline void save_bundle(const ModelBundle& m, const std::string& path) {
  const std::vector<std::uint8_t> bytes = write_bundle(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::MalformedStream, "failed writing " + path);
}

}  // namespace ffp8

#endif  // FFP8_BUNDLE_HPP
