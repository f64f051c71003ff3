#include <algorithm>
#include <cmath>
#include <set>

#include "cwtrnn/core/dataset.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/fileio.hpp"
#include "cwtrnn/cwt/cwt.hpp"
#include "cwtrnn/datagen/datagen.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cwtrnn;
using namespace cwtrnn::datagen;

namespace {

std::size_t nearest_index(const std::vector<double>& grid, double f) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (std::fabs(grid[i] - f) < std::fabs(grid[best] - f)) best = i;
  return best;
}

// Local maxima of sum_t A(t, f) that reach a quarter of the global maximum.
std::set<std::size_t> marginal_peaks(const cwt::Spectrogram& spec) {
  std::vector<double> m(spec.freq_count, 0.0);
  for (std::size_t t = 0; t < spec.timesteps; ++t)
    for (std::size_t f = 0; f < spec.freq_count; ++f) m[f] += spec.amp(t, f);
  const double top = *std::max_element(m.begin(), m.end());
  std::set<std::size_t> peaks;
  for (std::size_t f = 0; f < m.size(); ++f) {
    const bool left = f == 0 || m[f] > m[f - 1];
    const bool right = f + 1 == m.size() || m[f] > m[f + 1];
    if (left && right && m[f] >= 0.25 * top) peaks.insert(f);
  }
  return peaks;
}

}  // namespace

TEST_CASE("chirp values") {
  const auto s = gen_chirp();
  REQUIRE(s.size() == 128);
  CHECK(s[0].real() == doctest::Approx(0.309017).epsilon(1e-6));
  CHECK(s[0].imag() == doctest::Approx(-0.951057).epsilon(1e-6));
  for (const auto& v : s.samples) CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("chirp ridge rises before the instantaneous frequency passes Nyquist") {
  // f_inst(t) = t / 100 Hz, so t = 10 and t = 25 sit at 0.1 and 0.25 Hz.
  const auto spec = cwt::cwt(gen_chirp(), cwt::nominal_params());
  const auto grid = cwt::nominal_frequency_grid();
  CHECK(cwt::ridge_index(spec, 25) > cwt::ridge_index(spec, 10));
  CHECK(grid[cwt::ridge_index(spec, 10)] == doctest::Approx(0.1).epsilon(0.2));
  CHECK(grid[cwt::ridge_index(spec, 25)] == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("tone spec and table parsing") {
  const auto tones = parse_tones("0.02, 0.05,0.09");
  CHECK(tones.frequencies == std::vector<double>{0.02, 0.05, 0.09});
  CHECK_THROWS_AS(parse_tones("0.02,0.6"), InvalidArgument);
  CHECK_THROWS_AS(parse_tones("0.02,0.02"), InvalidArgument);
  CHECK_THROWS_AS(parse_tones("0.02,abc"), InvalidArgument);

  const auto table = QrfClassTable::default_table();
  CHECK(table.size() == 11);
  CHECK(table.name(0) == "1");
  CHECK(table.name(9) == "1+5");
  CHECK(table.name(10) == "1+2+3+4+5");
  CHECK_NOTHROW(table.validate(5));
  CHECK_THROWS_AS(table.validate(4), InvalidArgument);

  const auto weighted = QrfClassTable::parse("0.5*1+2; 3");
  CHECK(weighted.entries[0][0].coefficient == 0.5);
  CHECK(weighted.name(0) == "0.5*1+2");
  CHECK(QrfClassTable::parse(weighted.name(0)).entries[0] == weighted.entries[0]);
  CHECK_THROWS_AS(QrfClassTable::parse("1;;2"), InvalidArgument);
  CHECK_THROWS_AS(QrfClassTable::parse("0"), InvalidArgument);
  CHECK_THROWS_AS(QrfClassTable::parse("1;x"), InvalidArgument);
  CHECK_THROWS_AS(QrfClassTable::parse("1;1").validate(5), InvalidArgument);
  CHECK_THROWS_AS(QrfClassTable::parse("1+1").validate(5), InvalidArgument);
}

TEST_CASE("tone mixes have unit power; singletons have constant magnitude") {
  const auto table = QrfClassTable::default_table();
  const ToneSpec tones;
  Rng rng(51);
  for (std::size_t c = 0; c < table.size(); ++c) {
    for (int k = 0; k < 20; ++k) {
      const auto s = gen_tone_mix(c, table, tones, 128, rng);
      CHECK(std::fabs(s.mean_power() - 1.0) < 1e-9);
      if (c < 5)
        for (const auto& v : s.samples) REQUIRE(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(gen_tone_mix(11, table, tones, 128, rng), InvalidArgument);
}

TEST_CASE("random phases differ across examples, fixed phases do not") {
  const auto table = QrfClassTable::default_table();
  Rng rng(52);
  ToneSpec tones;
  CHECK(gen_tone_mix(0, table, tones, 16, rng) != gen_tone_mix(0, table, tones, 16, rng));
  tones.phase_policy = PhasePolicy::kFixed;
  CHECK(gen_tone_mix(0, table, tones, 16, rng) == gen_tone_mix(0, table, tones, 16, rng));
  CHECK(gen_tone_mix(0, table, tones, 16, rng)[0] == Complex(1.0, 0.0));
}

TEST_CASE("class {1,5} shows two ridges at the nearest grid frequencies") {
  const auto table = QrfClassTable::default_table();
  const ToneSpec tones;
  const auto grid = cwt::nominal_frequency_grid();
  Rng rng(53);
  const auto spec = cwt::cwt(gen_tone_mix(9, table, tones, 128, rng), cwt::nominal_params());
  CHECK(marginal_peaks(spec) == std::set<std::size_t>{nearest_index(grid, 0.02), nearest_index(grid, 0.25)});
}

TEST_CASE("AWGN calibration") {
  Rng rng(54);
  const auto s = gen_tone(0.1, 10000);
  const auto same = add_awgn(s, INFINITY, rng);
  CHECK(same.signal == s);

  const auto zero_db = add_awgn(s, 0.0, rng);
  double ni = 0, nq = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Complex d = zero_db.signal[i] - s[i];
    ni += d.real() * d.real();
    nq += d.imag() * d.imag();
  }
  CHECK(ni / s.size() == doctest::Approx(0.5).epsilon(0.05));
  CHECK(nq / s.size() == doctest::Approx(0.5).epsilon(0.05));

  for (double snr : {-20.0, 0.0, 10.0, 18.0}) CHECK(std::fabs(add_awgn(s, snr, rng).measured_snr_db - snr) < 0.2);

  IQSignal silent;
  silent.samples.assign(10, Complex{});
  CHECK_THROWS_AS(add_awgn(silent, 10.0, rng), InvalidArgument);
}

TEST_CASE("classes are separable by marginal peaks at high SNR") {
  // A long envelope resolves adjacent tones; 100 examples per class at +18 dB.
  const auto table = QrfClassTable::default_table();
  const ToneSpec tones;
  const auto grid = cwt::nominal_frequency_grid();
  const cwt::CwtPlan plan(cwt::MorletParams{cwt::FixedSigma{16.0}, grid, 4.0}, 128);
  Rng rng(55);
  std::size_t hits = 0, total = 0;
  for (std::size_t c = 0; c < table.size(); ++c) {
    std::set<std::size_t> expected;
    for (const auto& t : table.entries[c]) expected.insert(nearest_index(grid, tones.frequencies[t.tone]));
    for (int k = 0; k < 100; ++k) {
      const auto noisy = add_awgn(gen_tone_mix(c, table, tones, 128, rng), 18.0, rng);
      hits += marginal_peaks(plan.transform(noisy.signal)) == expected;
      ++total;
    }
  }
  CHECK(static_cast<double>(hits) / total >= 0.95);
}

TEST_CASE("dataset generation counts, order and determinism") {
  QrfOptions o;
  o.per_class_per_snr = 2;
  o.snrs = {0};
  o.seed = 7;
  CHECK(qrf_record_count(o) == 22);
  const auto ex = gen_qrf_examples(o);
  REQUIRE(ex.size() == 22);
  CHECK(ex[0].class_id == 0);
  CHECK(ex[21].class_id == 10);
  CHECK(ex[3].snr_db == 0);

  o.snrs = snr_grid(-20, 18, 2);
  CHECK(o.snrs.size() == 20);
  CHECK(o.snrs.back() == 18);
  o.per_class_per_snr = 1000;
  CHECK(qrf_record_count(o) == 220000);

  o.per_class_per_snr = 3;
  testutil::TempDir dir("gen");
  write_qrf_dataset(dir / "a.rfds", o);
  o.threads = 4;
  write_qrf_dataset(dir / "b.rfds", o);
  CHECK(read_file(dir / "a.rfds") == read_file(dir / "b.rfds"));
  const auto d = read_dataset(dir / "a.rfds");
  CHECK(d.examples.size() == 11 * 20 * 3);
  CHECK(d.class_names == QrfClassTable::default_table().names());
  // Per-example streams: any record can be regenerated alone.
  const auto one = gen_qrf_example(o, 100);
  CHECK(d.examples[100].class_id == one.class_id);
  CHECK(d.examples[100].snr_db == one.snr_db);
  CHECK(d.examples[100].signal[5].real() == static_cast<float>(one.signal[5].real()));

  o.seed = 8;
  write_qrf_dataset(dir / "c.rfds", o);
  CHECK(read_file(dir / "a.rfds") != read_file(dir / "c.rfds"));
}
