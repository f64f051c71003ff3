// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cwtrnn/nn/quantize.hpp"
#include "cwtrnn/nn/tensor.hpp"

namespace cwtrnn::nn {

inline constexpr char kWeightsMagic[8] = {'W', 'G', 'T', 'S', '0', '0', '0', '1'};

// Double-precision array for metadata that must survive a roundtrip exactly.
struct F64Array {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  friend bool operator==(const F64Array&, const F64Array&) = default;
};

/// Ordered set of named tensors as stored in a `.wgts` file.
///
/// Layout (little-endian): magic, u32 entry count, then per entry
/// u16 name length, UTF-8 name, u8 dtype (0 f32, 1 f16, 2 int8, 3 f64),
/// u8 rank, rank x u32 dims, for int8 an f32 scale and i32 zero point, then
/// the payload of product(dims) elements.
class WeightSet {
 public:
  using Value = std::variant<Tensor, QuantizedTensor, F64Array>;
  struct Entry {
    std::string name;
    Value value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  // Throws FormatError(kDuplicateName) when the name is taken.
  void add(std::string name, Value value);
  bool contains(std::string_view name) const noexcept;
  // Throws InvalidArgument naming the missing entry.
  const Value& get(std::string_view name) const;
  // f32 tensor by name; also checks the shape when `shape` is non-empty.
  const Tensor& tensor(std::string_view name, std::span<const std::size_t> shape = {}) const;
  const std::vector<double>& f64(std::string_view name) const;

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  friend bool operator==(const WeightSet&, const WeightSet&) = default;

 private:
  std::vector<Entry> entries_;
};

std::vector<std::uint8_t> encode_weights(const WeightSet& weights);
WeightSet decode_weights(std::span<const std::uint8_t> bytes);
void save_weights(const std::filesystem::path& path, const WeightSet& weights);
WeightSet load_weights(const std::filesystem::path& path);

}  // namespace cwtrnn::nn
