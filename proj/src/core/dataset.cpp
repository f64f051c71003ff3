// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cwtrnn/core/byteio.hpp"
#include "cwtrnn/core/error.hpp"

namespace cwtrnn {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kTruncated: return "truncated";
    case FormatErrorKind::kClassOutOfRange: return "class id out of range";
    case FormatErrorKind::kMixedLengths: return "mixed lengths";
    case FormatErrorKind::kDuplicateName: return "duplicate name";
    case FormatErrorKind::kSizeMismatch: return "size mismatch";
    case FormatErrorKind::kBadValue: return "bad value";
  }
  return "format error";
}

double IQSignal::mean_power() const noexcept {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : samples) acc += std::norm(s);
  return acc / static_cast<double>(samples.size());
}

bool IQSignal::all_finite() const noexcept {
  return std::all_of(samples.begin(), samples.end(), [](const Complex& s) {
    return std::isfinite(s.real()) && std::isfinite(s.imag());
  });
}

std::size_t DatasetHeader::header_bytes() const noexcept {
  std::size_t n = 8 + 2 + 4 + 8;
  for (const auto& name : class_names) n += 2 + name.size();
  return n;
}

namespace {

void encode_header(byteio::Writer& w, const DatasetHeader& h) {
  if (h.class_names.size() > 0xFFFF) {
    throw InvalidArgument("too many class names: " + std::to_string(h.class_names.size()));
  }
  w.bytes(std::string_view(kDatasetMagic, 8));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(h.class_names.size()));
  w.put<std::uint32_t>(h.timesteps);
  w.put<std::uint64_t>(h.record_count);
  for (const auto& name : h.class_names) {
    if (name.size() > 0xFFFF) throw InvalidArgument("class name longer than 65535 bytes");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
  }
}

DatasetHeader decode_header(byteio::Reader& r) {
  auto magic = r.bytes(8);
  if (!std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kDatasetMagic))) {
    throw FormatError(FormatErrorKind::kBadMagic,
                      "expected RFDS0001, found '" +
                          std::string(reinterpret_cast<const char*>(magic.data()), 8) + "'");
  }
  DatasetHeader h;
  const auto class_count = r.get<std::uint16_t>();
  h.timesteps = r.get<std::uint32_t>();
  h.record_count = r.get<std::uint64_t>();
  h.class_names.reserve(class_count);
  for (std::uint16_t c = 0; c < class_count; ++c) {
    const auto len = r.get<std::uint16_t>();
    h.class_names.push_back(r.string(len));
  }
  return h;
}

void check_example(const LabeledExample& ex, const DatasetHeader& h) {
  if (ex.signal.size() != h.timesteps) {
    throw FormatError(FormatErrorKind::kMixedLengths,
                      "record has " + std::to_string(ex.signal.size()) + " timesteps, container has " +
                          std::to_string(h.timesteps));
  }
  if (ex.class_id >= h.class_names.size()) {
    throw FormatError(FormatErrorKind::kClassOutOfRange,
                      "class_id " + std::to_string(ex.class_id) + " >= class_count " +
                          std::to_string(h.class_names.size()));
  }
}

void encode_record(byteio::Writer& w, const LabeledExample& ex) {
  w.put<std::uint16_t>(ex.class_id);
  w.put<std::int16_t>(ex.snr_db);
  for (const auto& s : ex.signal.samples) {
    w.put<float>(static_cast<float>(s.real()));
    w.put<float>(static_cast<float>(s.imag()));
  }
}

LabeledExample decode_record(byteio::Reader& r, const DatasetHeader& h) {
  LabeledExample ex;
  ex.class_id = r.get<std::uint16_t>();
  ex.snr_db = r.get<std::int16_t>();
  if (ex.class_id >= h.class_names.size()) {
    throw FormatError(FormatErrorKind::kClassOutOfRange,
                      "class_id " + std::to_string(ex.class_id) + " >= class_count " +
                          std::to_string(h.class_names.size()));
  }
  ex.signal.samples.resize(h.timesteps);
  for (auto& s : ex.signal.samples) {
    const float i = r.get<float>();
    const float q = r.get<float>();
    s = Complex(i, q);
  }
  return ex;
}

std::uint32_t common_length(std::span<const LabeledExample> examples) {
  if (examples.empty()) return 0;
  const std::size_t t = examples.front().signal.size();
  for (const auto& ex : examples) {
    if (ex.signal.size() != t) {
      throw FormatError(FormatErrorKind::kMixedLengths,
                        "examples have " + std::to_string(t) + " and " + std::to_string(ex.signal.size()) +
                            " timesteps");
    }
  }
  return static_cast<std::uint32_t>(t);
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(std::span<const LabeledExample> examples,
                                         std::span<const std::string> class_names,
                                         std::uint32_t timesteps) {
  DatasetHeader h{{class_names.begin(), class_names.end()}, timesteps, examples.size()};
  std::vector<std::uint8_t> out;
  out.reserve(h.header_bytes() + h.record_bytes() * examples.size());
  byteio::Writer w(out);
  encode_header(w, h);
  for (const auto& ex : examples) {
    check_example(ex, h);
    encode_record(w, ex);
  }
  return out;
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes);
  DatasetHeader h = decode_header(r);
  const std::size_t payload = r.remaining();
  if (h.record_count > payload / h.record_bytes()) {
    throw FormatError(FormatErrorKind::kTruncated,
                      "header promises " + std::to_string(h.record_count) + " records (" +
                          std::to_string(h.record_count * h.record_bytes()) + " bytes), payload has " +
                          std::to_string(payload) + " bytes");
  }
  if (payload != h.record_count * h.record_bytes()) {
    throw FormatError(FormatErrorKind::kSizeMismatch,
                      "trailing bytes after " + std::to_string(h.record_count) + " records");
  }
  Dataset d;
  d.examples.reserve(h.record_count);
  for (std::uint64_t i = 0; i < h.record_count; ++i) d.examples.push_back(decode_record(r, h));
  d.class_names = std::move(h.class_names);
  return d;
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples,
                   std::span<const std::string> class_names) {
  const std::uint32_t t = common_length(examples);
  DatasetWriter writer(path, {class_names.begin(), class_names.end()}, t, examples.size());
  for (const auto& ex : examples) writer.append(ex);
  writer.finish();
}

Dataset read_dataset(const std::filesystem::path& path) {
  DatasetReader reader(path);
  Dataset d;
  d.class_names = reader.header().class_names;
  d.examples.reserve(reader.header().record_count);
  LabeledExample ex;
  while (reader.next(ex)) d.examples.push_back(std::move(ex));
  return d;
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, std::vector<std::string> class_names,
                             std::uint32_t timesteps, std::uint64_t record_count)
    : path_(path), header_{std::move(class_names), timesteps, record_count} {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  std::vector<std::uint8_t> head;
  byteio::Writer w(head);
  encode_header(w, header_);
  out_.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  buffer_.reserve(header_.record_bytes());
}

DatasetWriter::~DatasetWriter() = default;

void DatasetWriter::append(const LabeledExample& example) {
  if (finished_) throw InvalidArgument("append after finish");
  if (written_ >= header_.record_count) {
    throw FormatError(FormatErrorKind::kSizeMismatch,
                      "more records than the declared " + std::to_string(header_.record_count));
  }
  check_example(example, header_);
  buffer_.clear();
  byteio::Writer w(buffer_);
  encode_record(w, example);
  out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  ++written_;
}

void DatasetWriter::finish() {
  if (finished_) return;
  finished_ = true;
  if (written_ != header_.record_count) {
    throw FormatError(FormatErrorKind::kSizeMismatch, "wrote " + std::to_string(written_) +
                                                          " records, declared " +
                                                          std::to_string(header_.record_count));
  }
  out_.flush();
  if (!out_) throw IoError("write to '" + path_.string() + "' failed");
  out_.close();
}

DatasetReader::DatasetReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open '" + path.string() + "'");
  // Fixed part first, then the names.
  std::vector<std::uint8_t> fixed(22);
  in_.read(reinterpret_cast<char*>(fixed.data()), 22);
  fixed.resize(static_cast<std::size_t>(in_.gcount()));
  {
    byteio::Reader r(fixed);
    auto magic = r.bytes(std::min<std::size_t>(8, fixed.size()));
    if (magic.size() < 8 ||
        !std::equal(magic.begin(), magic.end(), reinterpret_cast<const std::uint8_t*>(kDatasetMagic))) {
      if (magic.size() == 8) {
        throw FormatError(FormatErrorKind::kBadMagic,
                          "expected RFDS0001, found '" +
                              std::string(reinterpret_cast<const char*>(magic.data()), 8) + "'");
      }
      throw FormatError(FormatErrorKind::kTruncated, "file shorter than the header");
    }
  }
  byteio::Reader r(fixed);
  r.bytes(8);
  const auto class_count = r.get<std::uint16_t>();
  header_.timesteps = r.get<std::uint32_t>();
  header_.record_count = r.get<std::uint64_t>();
  for (std::uint16_t c = 0; c < class_count; ++c) {
    std::uint8_t len_raw[2];
    in_.read(reinterpret_cast<char*>(len_raw), 2);
    if (in_.gcount() != 2) throw FormatError(FormatErrorKind::kTruncated, "class name table");
    byteio::Reader lr(len_raw);
    const auto len = lr.get<std::uint16_t>();
    std::string name(len, '\0');
    in_.read(name.data(), len);
    if (static_cast<std::size_t>(in_.gcount()) != len) {
      throw FormatError(FormatErrorKind::kTruncated, "class name table");
    }
    header_.class_names.push_back(std::move(name));
  }
  // Check the payload size against the header before reading.
  const auto here = in_.tellg();
  in_.seekg(0, std::ios::end);
  const auto end = in_.tellg();
  in_.seekg(here);
  const auto payload = static_cast<std::uint64_t>(end - here);
  const std::uint64_t expected = header_.record_count * header_.record_bytes();
  if (header_.record_count > payload / header_.record_bytes() || payload < expected) {
    throw FormatError(FormatErrorKind::kTruncated,
                      "header promises " + std::to_string(header_.record_count) + " records (" +
                          std::to_string(expected) + " bytes), payload has " + std::to_string(payload) +
                          " bytes");
  }
  if (payload > expected) {
    throw FormatError(FormatErrorKind::kSizeMismatch,
                      "trailing bytes after " + std::to_string(header_.record_count) + " records");
  }
  buffer_.resize(header_.record_bytes());
}

bool DatasetReader::next(LabeledExample& out) {
  if (consumed_ >= header_.record_count) return false;
  in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
  if (static_cast<std::size_t>(in_.gcount()) != buffer_.size()) {
    throw FormatError(FormatErrorKind::kTruncated, "record " + std::to_string(consumed_));
  }
  byteio::Reader r(buffer_);
  out = decode_record(r, header_);
  ++consumed_;
  return true;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_dataset(
    std::span<const LabeledExample> examples, const SplitOptions& options, Rng& rng) {
  if (examples.empty()) throw InvalidArgument("split_dataset: empty input");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw InvalidArgument("split_dataset: train_fraction must be in (0, 1)");
  }
  const std::size_t n = examples.size();
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * options.train_fraction));

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  if (!options.stratify) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  } else {
    // Groups in (class, snr) order keep the apportioning deterministic.
    std::map<std::pair<std::uint16_t, std::int16_t>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[{examples[i].class_id, examples[i].snr_db}].push_back(i);
    struct Share {
      std::vector<std::size_t>* members;
      std::size_t take;
      double remainder;
      std::size_t order;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (auto& [key, members] : groups) {
      rng.shuffle(std::span(members));
      const double exact = static_cast<double>(members.size()) * options.train_fraction;
      const auto take = static_cast<std::size_t>(std::floor(exact));
      shares.push_back({&members, take, exact - static_cast<double>(take), shares.size()});
      assigned += take;
    }
    std::vector<Share*> by_remainder;
    for (auto& s : shares) by_remainder.push_back(&s);
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [](const Share* a, const Share* b) { return a->remainder > b->remainder; });
    for (std::size_t k = 0; assigned < n_train && k < by_remainder.size(); ++k) {
      if (by_remainder[k]->take < by_remainder[k]->members->size()) {
        ++by_remainder[k]->take;
        ++assigned;
      }
    }
    for (const auto& s : shares) {
      train_idx.insert(train_idx.end(), s.members->begin(),
                       s.members->begin() + static_cast<std::ptrdiff_t>(s.take));
      val_idx.insert(val_idx.end(), s.members->begin() + static_cast<std::ptrdiff_t>(s.take),
                     s.members->end());
    }
    rng.shuffle(std::span(train_idx));
    rng.shuffle(std::span(val_idx));
  }

  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  out.first.reserve(train_idx.size());
  out.second.reserve(val_idx.size());
  for (auto i : train_idx) out.first.push_back(examples[i]);
  for (auto i : val_idx) out.second.push_back(examples[i]);
  return out;
}

}  // namespace cwtrnn
