#include <cstring>
#include <fstream>
#include <map>

#include "cwtrnn/core/byteio.hpp"
#include "cwtrnn/core/dataset.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/fileio.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cwtrnn;

namespace {

LabeledExample make_example(std::uint16_t cls, std::int16_t snr, std::size_t t, float base) {
  LabeledExample ex;
  ex.class_id = cls;
  ex.snr_db = snr;
  for (std::size_t i = 0; i < t; ++i) ex.signal.samples.emplace_back(base + static_cast<float>(i), -base * 0.5f);
  return ex;
}

FormatErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected a FormatError");
  return FormatErrorKind::kBadValue;
}

}  // namespace

TEST_CASE("byte layout matches the documented offsets") {
  const std::vector<std::string> names = {"a", "bc"};
  std::vector<LabeledExample> ex = {make_example(1, -4, 2, 0.25f)};
  const auto bytes = encode_dataset(ex, names, 2);
  // 8 magic + 2 + 4 + 8, then (2+1) + (2+2) for names, then 4 + 2*2*4 per record.
  REQUIRE(bytes.size() == 22 + 7 + 20);
  CHECK(std::memcmp(bytes.data(), "RFDS0001", 8) == 0);
  CHECK(bytes[8] == 2);
  CHECK(bytes[9] == 0);
  CHECK(bytes[10] == 2);
  CHECK(bytes[14] == 1);
  CHECK(bytes[22] == 1);
  CHECK(bytes[24] == 'a');
  CHECK(bytes[25] == 2);
  CHECK(bytes[27] == 'b');
  const std::size_t rec = 29;
  CHECK(bytes[rec] == 1);
  CHECK(bytes[rec + 1] == 0);
  // -4 as i16 little-endian.
  CHECK(bytes[rec + 2] == 0xFC);
  CHECK(bytes[rec + 3] == 0xFF);
  float i0;
  std::memcpy(&i0, bytes.data() + rec + 4, 4);
  CHECK(i0 == 0.25f);
  float q1;
  std::memcpy(&q1, bytes.data() + rec + 16, 4);
  CHECK(q1 == -0.125f);
  DatasetHeader h{names, 2, 1};
  CHECK(h.header_bytes() == 29);
  CHECK(h.record_bytes() == 20);
}

TEST_CASE("write then read is bit exact") {
  testutil::TempDir dir("ds");
  const std::vector<std::string> names = {"tone1", "tone2", "tone3"};
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 30; ++i) {
    ex.push_back(make_example(static_cast<std::uint16_t>(i % 3), static_cast<std::int16_t>(i - 10), 16, 0.1f * i));
  }
  ex[3].snr_db = kNoiselessSnrDb;
  write_dataset(dir / "d.rfds", ex, names);
  const Dataset d = read_dataset(dir / "d.rfds");
  CHECK(d.class_names == names);
  CHECK(d.examples == ex);
  CHECK(d.timesteps() == 16);

  const auto bytes = read_file(dir / "d.rfds");
  CHECK(bytes == encode_dataset(ex, names, 16));
  const Dataset d2 = decode_dataset(bytes);
  CHECK(d2.examples == ex);

  write_dataset(dir / "e.rfds", d.examples, d.class_names);
  CHECK(read_file(dir / "e.rfds") == bytes);
}

TEST_CASE("empty dataset roundtrips") {
  const std::vector<std::string> names = {"x"};
  const auto bytes = encode_dataset({}, names, 128);
  const auto d = decode_dataset(bytes);
  CHECK(d.examples.empty());
  CHECK(d.class_names == names);
}

TEST_CASE("malformed containers are rejected with a specific kind") {
  const std::vector<std::string> names = {"a", "b"};
  std::vector<LabeledExample> ex = {make_example(0, 0, 4, 1.0f), make_example(1, 2, 4, 2.0f)};
  const auto good = encode_dataset(ex, names, 4);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(kind_of([&] { decode_dataset(bad_magic); }) == FormatErrorKind::kBadMagic);

  auto truncated = good;
  truncated.pop_back();
  CHECK(kind_of([&] { decode_dataset(truncated); }) == FormatErrorKind::kTruncated);
  CHECK(kind_of([&] { decode_dataset(std::span(good).first(10)); }) == FormatErrorKind::kTruncated);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(kind_of([&] { decode_dataset(trailing); }) == FormatErrorKind::kSizeMismatch);

  auto out_of_range = good;
  DatasetHeader h{names, 4, 2};
  out_of_range[h.header_bytes()] = 5;
  CHECK(kind_of([&] { decode_dataset(out_of_range); }) == FormatErrorKind::kClassOutOfRange);

  // A header promising an absurd record count must not allocate.
  auto huge = good;
  for (int i = 14; i < 22; ++i) huge[i] = 0xFF;
  CHECK(kind_of([&] { decode_dataset(huge); }) == FormatErrorKind::kTruncated);

  testutil::TempDir dir("bad");
  for (auto* bytes : {&bad_magic, &truncated, &trailing, &out_of_range, &huge}) {
    write_file(dir / "x.rfds", *bytes);
    CHECK_THROWS_AS(read_dataset(dir / "x.rfds"), FormatError);
  }
  CHECK_THROWS_AS(read_dataset(dir / "missing.rfds"), IoError);
}

TEST_CASE("encoding validates records") {
  const std::vector<std::string> names = {"a"};
  std::vector<LabeledExample> mixed = {make_example(0, 0, 4, 1.0f), make_example(0, 0, 5, 1.0f)};
  CHECK(kind_of([&] { encode_dataset(mixed, names, 4); }) == FormatErrorKind::kMixedLengths);
  std::vector<LabeledExample> wrong_class = {make_example(1, 0, 4, 1.0f)};
  CHECK(kind_of([&] { encode_dataset(wrong_class, names, 4); }) == FormatErrorKind::kClassOutOfRange);
}

TEST_CASE("streaming writer enforces the declared count") {
  testutil::TempDir dir("writer");
  const std::vector<std::string> names = {"a"};
  {
    DatasetWriter w(dir / "short.rfds", names, 4, 2);
    w.append(make_example(0, 0, 4, 1.0f));
    CHECK(kind_of([&] { w.finish(); }) == FormatErrorKind::kSizeMismatch);
  }
  {
    DatasetWriter w(dir / "long.rfds", names, 4, 1);
    w.append(make_example(0, 0, 4, 1.0f));
    CHECK(kind_of([&] { w.append(make_example(0, 0, 4, 1.0f)); }) == FormatErrorKind::kSizeMismatch);
  }
  CHECK_THROWS_AS(DatasetWriter(dir / "no" / "such" / "dir.rfds", names, 4, 1), IoError);
}

TEST_CASE("streaming reader yields records in order") {
  testutil::TempDir dir("reader");
  const std::vector<std::string> names = {"a", "b"};
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 5; ++i) ex.push_back(make_example(static_cast<std::uint16_t>(i % 2), 0, 3, float(i)));
  write_dataset(dir / "r.rfds", ex, names);
  DatasetReader r(dir / "r.rfds");
  CHECK(r.header().record_count == 5);
  LabeledExample got;
  for (int i = 0; i < 5; ++i) {
    REQUIRE(r.next(got));
    CHECK(got == ex[static_cast<std::size_t>(i)]);
  }
  CHECK_FALSE(r.next(got));
}

TEST_CASE("split sizes and stratification") {
  std::vector<LabeledExample> ex;
  for (std::uint16_t c = 0; c < 3; ++c)
    for (std::int16_t s : {0, 10})
      for (int i = 0; i < 10; ++i) ex.push_back(make_example(c, s, 2, float(i)));

  Rng rng(5);
  auto [train, val] = split_dataset(ex, {0.8, false}, rng);
  CHECK(train.size() == 48);
  CHECK(val.size() == 12);

  Rng rng2(5);
  auto [strain, sval] = split_dataset(ex, {0.8, true}, rng2);
  CHECK(strain.size() == 48);
  std::map<std::pair<int, int>, int> per_group;
  for (const auto& e : strain) ++per_group[{e.class_id, e.snr_db}];
  for (const auto& [k, n] : per_group) CHECK(n == 8);

  // Deterministic under equal seeds.
  Rng rng3(5);
  auto again = split_dataset(ex, {0.8, true}, rng3);
  CHECK(again.first == strain);

  Rng rng4(1);
  CHECK_THROWS_AS(split_dataset({}, {}, rng4), InvalidArgument);
  CHECK_THROWS_AS(split_dataset(ex, {1.0, false}, rng4), InvalidArgument);
}

TEST_CASE("noiseless records keep the sentinel SNR") {
  std::vector<LabeledExample> ex = {make_example(0, kNoiselessSnrDb, 2, 1.0f)};
  const std::vector<std::string> names = {"a"};
  CHECK(decode_dataset(encode_dataset(ex, names, 2)).examples[0].snr_db == kNoiselessSnrDb);
}
