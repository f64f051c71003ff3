// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/core/types.hpp"

namespace cwtrnn {

// Binary dataset container (.rfds), little-endian throughout:
//
//   magic        8 bytes  "RFDS0001"
//   class_count  u16
//   timesteps    u32
//   record_count u64
//   class_names  class_count x (u16 byte length, UTF-8 bytes)
//   records      record_count x (u16 class_id, i16 snr_db, 2*timesteps f32 I/Q interleaved)
inline constexpr char kDatasetMagic[8] = {'R', 'F', 'D', 'S', '0', '0', '0', '1'};

struct DatasetHeader {
  std::vector<std::string> class_names;
  std::uint32_t timesteps = 0;
  std::uint64_t record_count = 0;

  std::size_t record_bytes() const noexcept { return 4 + 8 * static_cast<std::size_t>(timesteps); }
  // Bytes before the first record.
  std::size_t header_bytes() const noexcept;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<LabeledExample> examples;

  std::size_t timesteps() const noexcept {
    return examples.empty() ? 0 : examples.front().signal.size();
  }
};

void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples,
                   std::span<const std::string> class_names);
Dataset read_dataset(const std::filesystem::path& path);

// In-memory encode/decode of the same layout.
std::vector<std::uint8_t> encode_dataset(std::span<const LabeledExample> examples,
                                         std::span<const std::string> class_names,
                                         std::uint32_t timesteps);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

/// Streams records to disk; the record count is fixed up front so the
/// header can be written first. `finish()` verifies the promised count.
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, std::vector<std::string> class_names,
                std::uint32_t timesteps, std::uint64_t record_count);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const LabeledExample& example);
  void finish();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  DatasetHeader header_;
  std::uint64_t written_ = 0;
  bool finished_ = false;
  std::vector<std::uint8_t> buffer_;
};

/// Sequential reader that validates each record without materializing the
/// whole file.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetHeader& header() const noexcept { return header_; }
  // False once all records are consumed. Throws on truncation or bad class ids.
  bool next(LabeledExample& out);

 private:
  std::ifstream in_;
  DatasetHeader header_;
  std::uint64_t consumed_ = 0;
  std::vector<std::uint8_t> buffer_;
};

struct SplitOptions {
  double train_fraction = 0.8;
  // Shuffle and split each (class_id, snr_db) group separately.
  bool stratify = false;
};

/// Deterministic shuffle-then-split. Unstratified splits have sizes
/// floor(n * f) and n - floor(n * f); stratified splits keep the same total
/// and apportion it across groups by largest remainder.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_dataset(
    std::span<const LabeledExample> examples, const SplitOptions& options, Rng& rng);

}  // namespace cwtrnn
