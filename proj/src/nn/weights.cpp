// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/nn/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cwtrnn/core/byteio.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/fileio.hpp"

namespace cwtrnn::nn {

namespace {

enum class DType : std::uint8_t { kF32 = 0, kF16 = 1, kInt8 = 2, kF64 = 3 };

const std::vector<std::size_t>& shape_of(const WeightSet::Value& v) {
  return std::visit([](const auto& t) -> const std::vector<std::size_t>& {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Tensor>) {
      return t.shape();
    } else {
      return t.shape;
    }
  }, v);
}

std::size_t numel_of(const WeightSet::Value& v) {
  return std::visit([](const auto& t) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, F64Array>) {
      return t.values.size();
    } else {
      return t.numel();
    }
  }, v);
}

}  // namespace

void WeightSet::add(std::string name, Value value) {
  if (contains(name)) throw FormatError(FormatErrorKind::kDuplicateName, "weight '" + name + "'");
  const auto& shape = shape_of(value);
  if (shape.empty() || shape.size() > 4) {
    throw ShapeError("weight '" + name + "' has unsupported rank " + std::to_string(shape.size()));
  }
  if (numel_of(value) != shape_numel(shape)) {
    throw FormatError(FormatErrorKind::kSizeMismatch, "weight '" + name + "' payload does not match its shape");
  }
  entries_.push_back({std::move(name), std::move(value)});
}

bool WeightSet::contains(std::string_view name) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const WeightSet::Value& WeightSet::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw InvalidArgument("missing weight '" + std::string(name) + "'");
}

const Tensor& WeightSet::tensor(std::string_view name, std::span<const std::size_t> shape) const {
  const auto* t = std::get_if<Tensor>(&get(name));
  if (!t) throw InvalidArgument("weight '" + std::string(name) + "' is quantized, expected f32");
  if (!shape.empty() && !std::equal(shape.begin(), shape.end(), t->shape().begin(), t->shape().end())) {
    throw ShapeError("weight '" + std::string(name) + "' has shape " + t->shape_string() + ", expected " +
                     shape_string(shape));
  }
  return *t;
}

const std::vector<double>& WeightSet::f64(std::string_view name) const {
  const auto* a = std::get_if<F64Array>(&get(name));
  if (!a) throw InvalidArgument("weight '" + std::string(name) + "' is not an f64 array");
  return a->values;
}

std::vector<std::uint8_t> encode_weights(const WeightSet& weights) {
  std::vector<std::uint8_t> out;
  byteio::Writer w(out);
  w.bytes(std::string_view(kWeightsMagic, 8));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.size()));
  for (const auto& e : weights.entries()) {
    if (e.name.size() > 0xFFFF) throw InvalidArgument("weight name longer than 65535 bytes");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name);
    const auto& shape = shape_of(e.value);
    DType dtype = DType::kF32;
    if (const auto* q = std::get_if<QuantizedTensor>(&e.value)) {
      dtype = q->mode == QuantMode::kF16 ? DType::kF16 : DType::kInt8;
    } else if (std::holds_alternative<F64Array>(e.value)) {
      dtype = DType::kF64;
    }
    w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("dimension exceeds u32");
      w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    }
    switch (dtype) {
      case DType::kF32:
        for (float v : std::get<Tensor>(e.value).data()) w.put<float>(v);
        break;
      case DType::kF16:
        for (auto v : std::get<QuantizedTensor>(e.value).f16) w.put<std::uint16_t>(v);
        break;
      case DType::kInt8: {
        const auto& q = std::get<QuantizedTensor>(e.value);
        w.put<float>(q.scale);
        w.put<std::int32_t>(q.zero_point);
        for (auto v : q.i8) w.put<std::int8_t>(v);
        break;
      }
      case DType::kF64:
        for (double v : std::get<F64Array>(e.value).values) w.put<double>(v);
        break;
    }
  }
  return out;
}

WeightSet decode_weights(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes);
  if (bytes.size() < 8) throw FormatError(FormatErrorKind::kTruncated, "file shorter than the magic");
  const auto magic = r.bytes(8);
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kWeightsMagic))) {
    throw FormatError(FormatErrorKind::kBadMagic,
                      "expected WGTS0001, found '" + std::string(reinterpret_cast<const char*>(magic.data()), 8) +
                          "'");
  }
  WeightSet set;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.string(r.get<std::uint16_t>());
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint8_t>();
    if (rank == 0 || rank > 4) {
      throw FormatError(FormatErrorKind::kBadValue, "weight '" + name + "' has rank " + std::to_string(rank));
    }
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    const std::size_t n = shape_numel(shape);
    const std::size_t elem = dtype == 0 ? 4 : dtype == 1 ? 2 : dtype == 3 ? 8 : 1;
    switch (dtype) {
      case 0: {
        if (r.remaining() / elem < n) throw FormatError(FormatErrorKind::kSizeMismatch, "weight '" + name + "'");
        std::vector<float> data(n);
        for (auto& v : data) v = r.get<float>();
        set.add(std::move(name), Tensor(std::move(shape), std::move(data)));
        break;
      }
      case 1: {
        if (r.remaining() / elem < n) throw FormatError(FormatErrorKind::kSizeMismatch, "weight '" + name + "'");
        QuantizedTensor q;
        q.mode = QuantMode::kF16;
        q.shape = std::move(shape);
        q.f16.resize(n);
        for (auto& v : q.f16) v = r.get<std::uint16_t>();
        set.add(std::move(name), std::move(q));
        break;
      }
      case 2: {
        QuantizedTensor q;
        q.mode = QuantMode::kInt8;
        q.scale = r.get<float>();
        q.zero_point = r.get<std::int32_t>();
        if (!(q.scale > 0.0f) || !std::isfinite(q.scale)) {
          throw FormatError(FormatErrorKind::kBadValue, "weight '" + name + "' has non-positive scale");
        }
        if (r.remaining() < n) throw FormatError(FormatErrorKind::kSizeMismatch, "weight '" + name + "'");
        q.shape = std::move(shape);
        q.i8.resize(n);
        for (auto& v : q.i8) v = r.get<std::int8_t>();
        set.add(std::move(name), std::move(q));
        break;
      }
      case 3: {
        if (r.remaining() / elem < n) throw FormatError(FormatErrorKind::kSizeMismatch, "weight '" + name + "'");
        F64Array a{std::move(shape), std::vector<double>(n)};
        for (auto& v : a.values) v = r.get<double>();
        set.add(std::move(name), std::move(a));
        break;
      }
      default:
        throw FormatError(FormatErrorKind::kBadValue, "weight '" + name + "' has dtype " + std::to_string(dtype));
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatErrorKind::kSizeMismatch, std::to_string(r.remaining()) + " trailing bytes");
  }
  return set;
}

void save_weights(const std::filesystem::path& path, const WeightSet& weights) {
  write_file(path, encode_weights(weights));
}

WeightSet load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

}  // namespace cwtrnn::nn
