// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/datagen/datagen.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "cwtrnn/core/dataset.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/parallel.hpp"

namespace cwtrnn::datagen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(std::string_view s, std::string_view what) {
  std::string buf(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(buf, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (buf.empty() || used != buf.size()) throw InvalidArgument("bad " + std::string(what) + " '" + buf + "'");
  return v;
}

std::string format_coefficient(double c) {
  std::ostringstream os;
  os.precision(17);
  os << c;
  return os.str();
}

}  // namespace

IQSignal gen_chirp(std::size_t timesteps, double sample_rate_hz) {
  IQSignal s;
  s.sample_rate_hz = sample_rate_hz;
  s.samples.reserve(timesteps);
  for (std::size_t n = 0; n < timesteps; ++n) {
    const double t = static_cast<double>(n) / sample_rate_hz;
    const double arg = std::numbers::pi * (0.1 + t * t / 100.0);
    s.samples.emplace_back(std::sin(arg), -std::cos(arg));
  }
  return s;
}

IQSignal gen_tone(double frequency, std::size_t timesteps, double phase, double amplitude) {
  IQSignal s;
  s.samples.reserve(timesteps);
  for (std::size_t n = 0; n < timesteps; ++n) {
    s.samples.push_back(std::polar(amplitude, kTwoPi * frequency * static_cast<double>(n) + phase));
  }
  return s;
}

void ToneSpec::validate() const {
  if (frequencies.empty()) throw InvalidArgument("at least one tone is required");
  if (amplitudes.size() != frequencies.size()) {
    throw InvalidArgument("tone amplitudes (" + std::to_string(amplitudes.size()) + ") do not match frequencies (" +
                          std::to_string(frequencies.size()) + ")");
  }
  std::set<double> seen;
  for (double f : frequencies) {
    if (!(f > 0.0 && f < 0.5)) throw InvalidArgument("tone frequency " + std::to_string(f) + " outside (0, 0.5)");
    if (!seen.insert(f).second) throw InvalidArgument("duplicate tone frequency " + std::to_string(f));
  }
  if (phase_policy == PhasePolicy::kFixed && !fixed_phases.empty() && fixed_phases.size() != frequencies.size()) {
    throw InvalidArgument("fixed phases do not match the tone count");
  }
}

ToneSpec parse_tones(std::string_view list) {
  ToneSpec spec;
  spec.frequencies.clear();
  for (auto part : split(list, ',')) spec.frequencies.push_back(parse_double(part, "tone frequency"));
  spec.amplitudes.assign(spec.frequencies.size(), 1.0);
  spec.validate();
  return spec;
}

QrfClassTable QrfClassTable::parse(std::string_view text) {
  QrfClassTable table;
  for (auto entry : split(text, ';')) {
    if (entry.empty()) throw InvalidArgument("empty class entry in '" + std::string(text) + "'");
    std::vector<Term> terms;
    for (auto term : split(entry, '+')) {
      Term t;
      std::string_view index = term;
      if (const auto star = term.find('*'); star != std::string_view::npos) {
        t.coefficient = parse_double(trim(term.substr(0, star)), "coefficient");
        index = trim(term.substr(star + 1));
      }
      std::size_t k = 0;
      const auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), k);
      if (ec != std::errc() || ptr != index.data() + index.size() || k == 0) {
        throw InvalidArgument("bad tone index '" + std::string(index) + "' in class '" + std::string(entry) + "'");
      }
      t.tone = k - 1;
      terms.push_back(t);
    }
    table.entries.push_back(std::move(terms));
  }
  return table;
}

QrfClassTable QrfClassTable::default_table() { return parse(kDefaultClassTable); }

std::string QrfClassTable::name(std::size_t class_id) const {
  std::string s;
  for (const auto& t : entries.at(class_id)) {
    if (!s.empty()) s += "+";
    if (t.coefficient != 1.0) s += format_coefficient(t.coefficient) + "*";
    s += std::to_string(t.tone + 1);
  }
  return s;
}

std::vector<std::string> QrfClassTable::names() const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < entries.size(); ++c) out.push_back(name(c));
  return out;
}

void QrfClassTable::validate(std::size_t tone_count) const {
  if (entries.empty()) throw InvalidArgument("class table is empty");
  if (entries.size() > 0xFFFF) throw InvalidArgument("class table has more than 65535 entries");
  std::set<std::string> seen;
  for (std::size_t c = 0; c < entries.size(); ++c) {
    if (entries[c].empty()) throw InvalidArgument("class " + std::to_string(c) + " is empty");
    std::set<std::size_t> tones;
    for (const auto& t : entries[c]) {
      if (t.tone >= tone_count) {
        throw InvalidArgument("class '" + name(c) + "' uses tone " + std::to_string(t.tone + 1) + " of " +
                              std::to_string(tone_count));
      }
      if (!tones.insert(t.tone).second) throw InvalidArgument("class '" + name(c) + "' repeats a tone");
      if (!std::isfinite(t.coefficient) || t.coefficient == 0.0) {
        throw InvalidArgument("class '" + name(c) + "' has a zero or non-finite coefficient");
      }
    }
    if (!seen.insert(name(c)).second) throw InvalidArgument("duplicate class '" + name(c) + "'");
  }
}

IQSignal gen_tone_mix(std::size_t class_id, const QrfClassTable& table, const ToneSpec& tones,
                      std::size_t timesteps, Rng& rng) {
  if (class_id >= table.size()) {
    throw InvalidArgument("class " + std::to_string(class_id) + " outside a table of " +
                          std::to_string(table.size()));
  }
  if (timesteps == 0) throw InvalidArgument("signal length must be at least 1");
  IQSignal s;
  s.samples.assign(timesteps, Complex{});
  for (const auto& term : table.entries[class_id]) {
    if (term.tone >= tones.frequencies.size()) throw InvalidArgument("class uses an undefined tone");
    double phase = 0.0;
    if (tones.phase_policy == PhasePolicy::kRandom) {
      phase = kTwoPi * rng.uniform();
    } else if (!tones.fixed_phases.empty()) {
      phase = tones.fixed_phases[term.tone];
    }
    const double a = term.coefficient * tones.amplitudes[term.tone];
    const double f = tones.frequencies[term.tone];
    for (std::size_t n = 0; n < timesteps; ++n) {
      s.samples[n] += std::polar(a, kTwoPi * f * static_cast<double>(n) + phase);
    }
  }
  const double p = s.mean_power();
  if (!(p > 0.0)) throw InvalidArgument("class '" + table.name(class_id) + "' has zero power");
  const double g = 1.0 / std::sqrt(p);
  for (auto& v : s.samples) v *= g;
  return s;
}

NoisySignal add_awgn(const IQSignal& signal, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return {signal, snr_db};
  if (std::isnan(snr_db)) throw InvalidArgument("SNR is NaN");
  const double p = signal.mean_power();
  if (!(p > 0.0)) throw InvalidArgument("cannot set an SNR on a zero-power signal");
  const double variance = p / std::pow(10.0, snr_db / 10.0);
  const double sd = std::sqrt(variance / 2.0);
  NoisySignal out{signal, 0.0};
  double noise_power = 0.0;
  for (auto& v : out.signal.samples) {
    const Complex n(sd * rng.normal(), sd * rng.normal());
    noise_power += std::norm(n);
    v += n;
  }
  noise_power /= static_cast<double>(signal.size());
  out.measured_snr_db = 10.0 * std::log10(p / noise_power);
  return out;
}

std::vector<int> snr_grid(int min_db, int max_db, int step_db) {
  if (step_db <= 0) throw InvalidArgument("SNR step must be positive");
  if (min_db > max_db) throw InvalidArgument("SNR min exceeds max");
  std::vector<int> g;
  for (int s = min_db; s <= max_db; s += step_db) g.push_back(s);
  return g;
}

std::size_t qrf_record_count(const QrfOptions& o) noexcept {
  return o.table.size() * o.snrs.size() * o.per_class_per_snr;
}

LabeledExample gen_qrf_example(const QrfOptions& o, std::size_t index) {
  const std::size_t per_class = o.snrs.size() * o.per_class_per_snr;
  const std::size_t cls = index / per_class;
  const std::size_t snr_index = (index % per_class) / o.per_class_per_snr;
  Rng rng = Rng::derive(o.seed, index);
  LabeledExample ex;
  ex.class_id = static_cast<std::uint16_t>(cls);
  ex.snr_db = static_cast<std::int16_t>(o.snrs[snr_index]);
  const auto clean = gen_tone_mix(cls, o.table, o.tones, o.timesteps, rng);
  ex.signal = add_awgn(clean, o.snrs[snr_index], rng).signal;
  return ex;
}

namespace {

void validate_options(const QrfOptions& o) {
  o.tones.validate();
  o.table.validate(o.tones.frequencies.size());
  if (o.timesteps == 0) throw InvalidArgument("timesteps must be positive");
  if (o.snrs.empty()) throw InvalidArgument("SNR grid is empty");
  for (int s : o.snrs) {
    if (s < -32768 || s >= kNoiselessSnrDb) throw InvalidArgument("SNR " + std::to_string(s) + " dB out of range");
  }
}

}  // namespace

std::vector<LabeledExample> gen_qrf_examples(const QrfOptions& options) {
  validate_options(options);
  std::vector<LabeledExample> out(qrf_record_count(options));
  parallel_for(out.size(), options.threads, [&](std::size_t i) { out[i] = gen_qrf_example(options, i); });
  return out;
}

void write_qrf_dataset(const std::filesystem::path& path, const QrfOptions& options) {
  validate_options(options);
  const std::size_t total = qrf_record_count(options);
  DatasetWriter writer(path, options.table.names(), static_cast<std::uint32_t>(options.timesteps), total);
  constexpr std::size_t kChunk = 8192;
  std::vector<LabeledExample> chunk;
  for (std::size_t start = 0; start < total; start += kChunk) {
    const std::size_t n = std::min(kChunk, total - start);
    chunk.assign(n, {});
    parallel_for(n, options.threads, [&](std::size_t i) { chunk[i] = gen_qrf_example(options, start + i); });
    for (const auto& ex : chunk) writer.append(ex);
  }
  writer.finish();
}

}  // namespace cwtrnn::datagen
