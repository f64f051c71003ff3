// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cwtrnn/bench/bench.hpp"
#include "cwtrnn/cnnref/cnn.hpp"
#include "cwtrnn/core/dataset.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/fileio.hpp"
#include "cwtrnn/cwt/cwt.hpp"
#include "cwtrnn/datagen/datagen.hpp"
#include "cwtrnn/plot/svg.hpp"
#include "cwtrnn/rnn/io.hpp"
#include "cwtrnn/rnn/metrics.hpp"
#include "cwtrnn/rnn/train.hpp"
#include "json.hpp"

namespace cwtrnn::cli {

namespace {

namespace fs = std::filesystem;

// Bad flag values found after parsing. Reported with usage text, exit 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stored in the snr field of records that carry no noise.
constexpr std::int16_t kNoiselessSnr = std::numeric_limits<std::int16_t>::max();

struct Globals {
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

template <class F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string kind = "qrf";
  fs::path out;
  int snr_min = -20, snr_max = 18, snr_step = 2;
  std::size_t per_class = 1000;
  std::size_t timesteps = 128;
  std::string tones;
  std::string classes = std::string(datagen::kDefaultClassTable);
  double chirp_snr = std::numeric_limits<double>::infinity();
};

void add_gen(CLI::App& app, GenArgs& a) {
  auto* c = app.add_subcommand("gen", "Generate a synthetic .rfds dataset");
  c->add_option("--kind", a.kind, "chirp or qrf")->check(CLI::IsMember({"chirp", "qrf"}))->capture_default_str();
  c->add_option("--out", a.out, "Output .rfds file")->required();
  c->add_option("--snr-min", a.snr_min, "Lowest SNR in dB (qrf)")->capture_default_str();
  c->add_option("--snr-max", a.snr_max, "Highest SNR in dB (qrf)")->capture_default_str();
  c->add_option("--snr-step", a.snr_step, "SNR step in dB (qrf)")->capture_default_str();
  c->add_option("--per-class", a.per_class, "Records per class per SNR level (qrf)")->capture_default_str();
  c->add_option("--timesteps", a.timesteps, "Samples per record")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--tones", a.tones, "Tone frequencies in cycles/sample, comma separated (qrf)");
  c->add_option("--classes", a.classes, "Class table, e.g. \"1;2;1+2\" (qrf)")->capture_default_str();
  c->add_option("--chirp-snr", a.chirp_snr, "Add noise at this SNR in dB (chirp)");
}

int run_gen(const GenArgs& a, const Globals& g, std::ostream& err) {
  if (a.kind == "chirp") {
    LabeledExample e;
    e.signal = datagen::gen_chirp(a.timesteps);
    e.snr_db = kNoiselessSnr;
    if (std::isfinite(a.chirp_snr)) {
      Rng rng(g.seed);
      e.signal = datagen::add_awgn(e.signal, a.chirp_snr, rng).signal;
      e.snr_db = static_cast<std::int16_t>(std::lround(a.chirp_snr));
    }
    const std::vector<std::string> names = {"chirp"};
    write_dataset(a.out, std::span(&e, 1), names);
    err << "wrote 1 chirp record of " << a.timesteps << " samples to " << a.out.string() << "\n";
    return kOk;
  }
  datagen::QrfOptions o;
  as_usage([&] {
    if (!a.tones.empty()) o.tones = datagen::parse_tones(a.tones);
    o.table = datagen::QrfClassTable::parse(a.classes);
    o.table.validate(o.tones.frequencies.size());
    if (a.snr_step <= 0 || a.snr_min > a.snr_max) throw InvalidArgument("SNR range needs min <= max and step > 0");
    o.snrs = datagen::snr_grid(a.snr_min, a.snr_max, a.snr_step);
    return 0;
  });
  if (a.per_class == 0) throw UsageError("--per-class must be positive");
  o.per_class_per_snr = a.per_class;
  o.timesteps = a.timesteps;
  o.seed = g.seed;
  o.threads = g.threads;
  datagen::write_qrf_dataset(a.out, o);
  err << "wrote " << datagen::qrf_record_count(o) << " records (" << o.table.size() << " classes x " << o.snrs.size()
      << " SNR levels x " << o.per_class_per_snr << ") to " << a.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- cwt

struct CwtArgs {
  fs::path input;
  std::size_t index = 0;
  double sigma = 2.0;
  double cycles = 0.0;
  std::size_t freqs = 32;
  double fmin = 0.0;
  double fmax = 0.3;
  bool linear = false;
  double sample_rate = 1.0;
  fs::path csv, bin, svg;
};

void add_cwt(CLI::App& app, CwtArgs& a) {
  auto* c = app.add_subcommand("cwt", "Morlet spectrogram of one signal");
  c->add_option("--input", a.input, ".rfds dataset or raw interleaved f32 I/Q file")->required();
  c->add_option("--index", a.index, "Record index in an .rfds input")->capture_default_str();
  auto* sigma = c->add_option("--sigma", a.sigma, "Envelope width in seconds")->capture_default_str();
  auto* cycles = c->add_option("--cycles", a.cycles, "Envelope width in carrier cycles (sigma = n / f)");
  sigma->excludes(cycles);
  c->add_option("--freqs", a.freqs, "Number of grid frequencies")->capture_default_str();
  c->add_option("--fmin", a.fmin, "Lowest frequency in Hz (default 1/T)");
  c->add_option("--fmax", a.fmax, "Highest frequency in Hz")->capture_default_str();
  c->add_flag("--linear", a.linear, "Linear instead of log frequency spacing");
  c->add_option("--sample-rate", a.sample_rate, "Sample rate of raw input in Hz")->capture_default_str();
  c->add_option("--csv", a.csv, "CSV output: t,f_hz,amplitude,phase");
  c->add_option("--bin", a.bin, "Binary output: T x F x (amplitude, phase) little-endian f32");
  c->add_option("--svg", a.svg, "Amplitude heatmap");
}

IQSignal read_signal(const CwtArgs& a) {
  if (a.input.extension() == ".rfds") {
    const Dataset d = read_dataset(a.input);
    if (a.index >= d.examples.size()) {
      throw UsageError("--index " + std::to_string(a.index) + " but the dataset holds " +
                       std::to_string(d.examples.size()) + " records");
    }
    return d.examples[a.index].signal;
  }
  const auto bytes = read_file(a.input);
  if (bytes.empty() || bytes.size() % 8 != 0) {
    throw FormatError(FormatErrorKind::kTruncated, a.input.string() + ": raw I/Q input must hold f32 pairs");
  }
  std::vector<Complex> s(bytes.size() / 8);
  for (std::size_t i = 0; i < s.size(); ++i) {
    float re, im;
    std::memcpy(&re, bytes.data() + 8 * i, 4);
    std::memcpy(&im, bytes.data() + 8 * i + 4, 4);
    s[i] = {re, im};
  }
  return IQSignal(std::move(s), a.sample_rate);
}

int run_cwt(const CwtArgs& a, std::ostream& out, std::ostream& err) {
  const IQSignal signal = read_signal(a);
  const std::size_t T = signal.size();
  const double fs_hz = signal.sample_rate_hz;
  cwt::MorletParams p;
  as_usage([&] {
    if (a.cycles > 0.0) p.sigma = cwt::FixedCycles{a.cycles};
    else p.sigma = cwt::FixedSigma{a.sigma};
    const double fmin = a.fmin > 0.0 ? a.fmin : fs_hz / static_cast<double>(T);
    p.frequencies = cwt::frequency_grid(a.freqs, fmin, a.fmax, a.linear ? cwt::GridSpacing::kLinear : cwt::GridSpacing::kLog,
                                        fs_hz);
    p.validate();
    return 0;
  });
  const auto spec = cwt::cwt(signal, p);
  const std::size_t F = spec.freq_count;
  auto csv_text = [&] {
    std::ostringstream os;
    os << "t,f_hz,amplitude,phase\n";
    char buf[128];
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", t, spec.frequencies[f], spec.amp(t, f), spec.phi(t, f));
        os << buf;
      }
    return os.str();
  };
  bool wrote = false;
  if (!a.csv.empty()) {
    write_text(a.csv, csv_text());
    wrote = true;
  }
  if (!a.bin.empty()) {
    std::vector<std::uint8_t> bytes(T * F * 8);
    for (std::size_t i = 0; i < T * F; ++i) {
      const auto amp = static_cast<float>(spec.amplitude[i]), ph = static_cast<float>(spec.phase[i]);
      std::memcpy(bytes.data() + 8 * i, &amp, 4);
      std::memcpy(bytes.data() + 8 * i + 4, &ph, 4);
    }
    write_file(a.bin, bytes);
    wrote = true;
  }
  if (!a.svg.empty()) {
    plot::Heatmap h;
    h.title = "Morlet amplitude";
    h.x_label = "time step";
    h.y_label = "frequency index (low to high)";
    h.rows = F;
    h.cols = T;
    h.values.resize(F * T);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) h.values[f * T + t] = spec.amp(t, f);
    write_text(a.svg, plot::heatmap_svg(h));
    wrote = true;
  }
  if (!wrote) out << csv_text();
  err << "transformed " << T << " samples on " << F << " frequencies, spread " << fmt("%.6g", cwt::frequency_spread(spec))
      << " Hz^2\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  fs::path dataset, val_dataset, out, curves, curves_svg;
  double val_fraction = 0.2;
  std::string task = "class";
  std::string snr_bins = "9";
  std::string snr_binning = "select";
  std::size_t epochs = 100, batch = 512, hidden = 64, micro_batch = 128;
  double dropout = 0.2, lr = 1e-3, weight_decay = 0.01, gamma = 0.99, grad_clip = 0.0;
  std::string schedule = "linear", loss = "all";
  double sigma = 2.0;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* c = app.add_subcommand("train", "Train the CWT-RNN classifier");
  c->add_option("--dataset", a.dataset, "Training .rfds dataset")->required();
  c->add_option("--val-dataset", a.val_dataset, "Validation .rfds dataset (default: split from --dataset)");
  c->add_option("--val-fraction", a.val_fraction, "Stratified validation share when no --val-dataset")
      ->capture_default_str()->check(CLI::Range(0.0, 0.95));
  c->add_option("--task", a.task, "class or snr")->check(CLI::IsMember({"class", "snr"}))->capture_default_str();
  c->add_option("--snr-bins", a.snr_bins, "9, 5, or a comma list of SNR levels")->capture_default_str();
  c->add_option("--snr-binning", a.snr_binning, "select (exact levels) or pool (nearest lower level)")
      ->check(CLI::IsMember({"select", "pool"}))->capture_default_str();
  c->add_option("--epochs", a.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--batch", a.batch)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--micro-batch", a.micro_batch, "Gradient work unit")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--hidden", a.hidden, "Hidden width H")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--dropout", a.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.99));
  c->add_option("--lr", a.lr, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--weight-decay", a.weight_decay)->capture_default_str()->check(CLI::NonNegativeNumber);
  c->add_option("--schedule", a.schedule, "constant, linear or exponential")
      ->check(CLI::IsMember({"constant", "linear", "exponential"}))->capture_default_str();
  c->add_option("--gamma", a.gamma, "Exponential decay per epoch")->capture_default_str();
  c->add_option("--loss", a.loss, "all (mean over timesteps) or final")->check(CLI::IsMember({"all", "final"}))
      ->capture_default_str();
  c->add_option("--grad-clip", a.grad_clip, "Global gradient norm clip, 0 = off")->capture_default_str();
  c->add_option("--sigma", a.sigma, "Morlet envelope width in seconds")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--out", a.out, "Output weights .wgts")->required();
  c->add_option("--curves", a.curves, "Per-epoch CSV: epoch,lr,train_loss,val_loss,val_accuracy");
  c->add_option("--curves-svg", a.curves_svg, "Per-epoch loss and accuracy plot");
}

rnn::TaskSpec task_spec(const std::string& task, const std::string& bins, const std::string& binning) {
  rnn::TaskSpec s;
  s.task = task == "snr" ? rnn::Task::kSnr : rnn::Task::kClass;
  s.binning = binning == "pool" ? rnn::SnrBinning::kPool : rnn::SnrBinning::kSelect;
  if (s.task == rnn::Task::kSnr) {
    if (bins == "9" || bins == "5") {
      s.snr_levels = rnn::snr_bin_preset(bins == "9" ? 9 : 5);
    } else {
      std::stringstream ss(bins);
      for (std::string item; std::getline(ss, item, ',');) {
        try {
          std::size_t used = 0;
          s.snr_levels.push_back(std::stoi(item, &used));
          if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
          throw UsageError("--snr-bins: '" + item + "' is not an integer level");
        }
      }
      if (s.snr_levels.size() < 2) throw UsageError("--snr-bins needs 9, 5 or at least two levels");
    }
  }
  return s;
}

struct Prepared {
  rnn::FeatureSet features;
  std::vector<std::string> class_names;
};

Prepared prepare(const Dataset& d, const rnn::TaskSpec& spec, const cwt::MorletParams& p, std::size_t threads) {
  const auto labels = rnn::map_task(d, spec);
  if (labels.indices.empty()) throw FormatError(FormatErrorKind::kBadValue, "no records match the task");
  std::vector<LabeledExample> kept;
  kept.reserve(labels.indices.size());
  for (std::size_t i : labels.indices) kept.push_back(d.examples[i]);
  return {rnn::make_features(kept, labels.labels, p, threads), labels.class_names};
}

int run_train(const TrainArgs& a, const Globals& g, std::ostream& err) {
  const auto spec = task_spec(a.task, a.snr_bins, a.snr_binning);
  Dataset train_ds = read_dataset(a.dataset);
  if (train_ds.examples.empty()) throw FormatError(FormatErrorKind::kBadValue, "training dataset is empty");
  Dataset val_ds;
  if (!a.val_dataset.empty()) {
    val_ds = read_dataset(a.val_dataset);
  } else if (a.val_fraction > 0.0) {
    Rng split_rng = Rng::derive(g.seed, 11);
    auto [tr, va] = split_dataset(train_ds.examples, {1.0 - a.val_fraction, true}, split_rng);
    val_ds = {train_ds.class_names, std::move(va)};
    train_ds.examples = std::move(tr);
  }
  const std::size_t T = train_ds.timesteps();
  cwt::MorletParams p;
  as_usage([&] {
    p.sigma = cwt::FixedSigma{a.sigma};
    p.frequencies = cwt::nominal_frequency_grid(T);
    p.validate();
    return 0;
  });
  const auto tr = prepare(train_ds, spec, p, g.threads);
  Prepared va;
  if (!val_ds.examples.empty()) {
    if (val_ds.timesteps() != T) throw FormatError(FormatErrorKind::kMixedLengths, "validation records differ in length");
    va = prepare(val_ds, spec, p, g.threads);
  }

  rnn::RnnConfig mc;
  mc.freq_count = p.frequencies.size();
  mc.hidden = a.hidden;
  mc.classes = tr.class_names.size();
  mc.dropout = static_cast<float>(a.dropout);
  Rng init_rng = Rng::derive(g.seed, 10);
  auto model = rnn::RnnModel::init(mc, init_rng);

  rnn::TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.micro_batch = a.micro_batch;
  tc.optimizer.lr = a.lr;
  tc.optimizer.weight_decay = a.weight_decay;
  tc.schedule.kind = a.schedule == "constant" ? rnn::ScheduleKind::kConstant
                     : a.schedule == "exponential" ? rnn::ScheduleKind::kExponential
                                                   : rnn::ScheduleKind::kLinear;
  tc.schedule.gamma = a.gamma;
  tc.loss = a.loss == "final" ? rnn::LossMode::kFinalOnly : rnn::LossMode::kAllTimesteps;
  tc.grad_clip = a.grad_clip;
  tc.seed = Rng::derive(g.seed, 12).next_u64();
  tc.threads = g.threads;
  as_usage([&] {
    tc.validate();
    return 0;
  });

  err << "training on " << tr.features.size() << " examples, validating on " << va.features.size() << ", "
      << mc.classes << " classes, " << model.parameter_count() << " parameters\n";
  const auto result = rnn::train(std::move(model), tr.features, va.features.size() ? &va.features : nullptr, tc,
                                 [&](const rnn::EpochStats& s) {
                                   err << "epoch " << s.epoch + 1 << "/" << tc.epochs << " lr " << fmt("%.3g", s.lr)
                                       << " train_loss " << fmt("%.4f", s.train_loss) << " val_loss "
                                       << fmt("%.4f", s.val_loss) << " val_acc " << fmt("%.4f", s.val_accuracy) << "\n";
                                 });
  rnn::save_bundle(a.out, {result.model, p, spec});
  if (!a.curves.empty()) {
    std::ostringstream os;
    os << "epoch,lr,train_loss,val_loss,val_accuracy\n";
    char buf[160];
    for (const auto& s : result.curves) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", s.epoch, s.lr, s.train_loss, s.val_loss, s.val_accuracy);
      os << buf;
    }
    write_text(a.curves, os.str());
  }
  if (!a.curves_svg.empty()) {
    plot::LineChart chart;
    chart.title = "Training curves";
    chart.x_label = "epoch";
    chart.y_label = "loss / accuracy";
    plot::Series tl{"train loss", {}}, vl{"val loss", {}}, acc{"val accuracy", {}};
    for (const auto& s : result.curves) {
      tl.y.push_back(s.train_loss);
      vl.y.push_back(s.val_loss);
      acc.y.push_back(s.val_accuracy);
    }
    chart.series = {tl, vl, acc};
    write_text(a.curves_svg, plot::line_chart_svg(chart));
  }
  err << "saved " << a.out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  fs::path weights, dataset, per_timestep, confusion, json;
  std::string model = "rnn";
  std::string precision = "f32";
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* c = app.add_subcommand("eval", "Evaluate trained weights on a dataset");
  c->add_option("--weights", a.weights, ".wgts file")->required();
  c->add_option("--dataset", a.dataset, ".rfds dataset")->required();
  c->add_option("--model", a.model, "rnn or cnn")->check(CLI::IsMember({"rnn", "cnn"}))->capture_default_str();
  c->add_option("--precision", a.precision, "f32, f16 or int8")->check(CLI::IsMember({"f32", "f16", "int8"}))
      ->capture_default_str();
  c->add_option("--per-timestep", a.per_timestep, "CSV: t,accuracy (rnn)");
  c->add_option("--confusion", a.confusion, "CSV confusion matrix, rows are labels");
  c->add_option("--json", a.json, "Write the metrics JSON here instead of the output stream");
}

std::string confusion_csv(const std::vector<std::vector<std::size_t>>& m, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "label";
  for (const auto& n : names) os << "," << n;
  os << "\n";
  for (std::size_t l = 0; l < m.size(); ++l) {
    os << names[l];
    for (std::size_t v : m[l]) os << "," << v;
    os << "\n";
  }
  return os.str();
}

int run_eval(const EvalArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const auto precision = nn::parse_precision(a.precision);
  const Dataset d = read_dataset(a.dataset);
  if (d.examples.empty()) throw FormatError(FormatErrorKind::kBadValue, "dataset is empty");
  nlohmann::json j;
  j["model"] = a.model;
  j["precision"] = a.precision;
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::string> names;

  if (a.model == "rnn") {
    const auto bundle = rnn::load_bundle(a.weights);
    const auto prep = prepare(d, bundle.task, bundle.cwt, g.threads);
    if (prep.class_names.size() != bundle.model.config.classes) {
      throw FormatError(FormatErrorKind::kSizeMismatch, "dataset task has " + std::to_string(prep.class_names.size()) +
                                                            " classes, the model " +
                                                            std::to_string(bundle.model.config.classes));
    }
    const rnn::RnnInference inf(bundle.model, precision);
    const auto r = rnn::evaluate(inf, prep.features, g.threads);
    j["count"] = r.count;
    j["accuracy"] = r.accuracy;
    j["loss"] = r.loss;
    j["first_timestep_accuracy"] = r.per_timestep.front();
    confusion = r.confusion;
    names = prep.class_names;
    for (std::size_t c = 0; c < names.size(); ++c) j["per_class"].push_back({{"name", names[c]}, {"recall", r.per_class_recall[c]}});
    if (!a.per_timestep.empty()) {
      std::ostringstream os;
      os << "t,accuracy\n";
      for (std::size_t t = 0; t < r.per_timestep.size(); ++t) os << t << "," << fmt("%.9g", r.per_timestep[t]) << "\n";
      write_text(a.per_timestep, os.str());
    }
  } else {
    if (!a.per_timestep.empty()) throw UsageError("--per-timestep applies to the rnn model only");
    cnnref::CnnConfig cfg;
    cfg.timesteps = d.timesteps();
    const cnnref::Cnn net(nn::load_weights(a.weights), precision, cfg);
    if (d.class_names.size() > cfg.classes) {
      throw FormatError(FormatErrorKind::kSizeMismatch, "dataset has more classes than the CNN head");
    }
    names = d.class_names;
    confusion.assign(names.size(), std::vector<std::size_t>(cfg.classes, 0));
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t lo = 0; lo < d.examples.size(); lo += 256) {
      const std::size_t n = std::min<std::size_t>(256, d.examples.size() - lo);
      std::vector<float> x;
      x.reserve(n * 2 * cfg.timesteps);
      for (std::size_t i = 0; i < n; ++i) cnnref::append_iq_rows(d.examples[lo + i].signal, x);
      const auto probs = net.forward(x, n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::span<const float> row(probs.data() + i * cfg.classes, cfg.classes);
        const auto label = d.examples[lo + i].class_id;
        const auto pred = rnn::argmax(row);
        ++confusion[label][pred];
        correct += pred == label;
        loss -= std::log(std::max(row[label], 1e-30f));
      }
    }
    const double n = static_cast<double>(d.examples.size());
    j["count"] = d.examples.size();
    j["accuracy"] = static_cast<double>(correct) / n;
    j["loss"] = loss / n;
    for (auto& row : confusion) row.resize(names.size());
  }
  if (!a.confusion.empty()) write_text(a.confusion, confusion_csv(confusion, names));
  const std::string text = j.dump(2) + "\n";
  if (a.json.empty()) out << text;
  else write_text(a.json, text);
  err << a.model << " " << a.precision << " accuracy " << fmt("%.4f", j["accuracy"].get<double>()) << " on " << d.examples.size()
      << " records\n";
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string model = "rnn";
  std::vector<std::string> precisions = {"f32", "f16", "int8"};
  std::vector<std::size_t> batches = {1, 5, 32, 1024};
  std::size_t warmup = 10, runs = 100, timesteps = 128;
  bool cold = false;
  fs::path weights;
  std::vector<fs::path> outputs;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  auto* c = app.add_subcommand("bench", "Warm or cold inference latency");
  c->add_option("--model", a.model, "rnn or cnn")->check(CLI::IsMember({"rnn", "cnn"}))->capture_default_str();
  c->add_option("--precision", a.precisions, "Comma list of f32, f16, int8")
      ->delimiter(',')->check(CLI::IsMember({"f32", "f16", "int8"}))->capture_default_str();
  c->add_option("--batch-sizes", a.batches, "Comma list of batch sizes")->delimiter(',')->capture_default_str()
      ->check(CLI::PositiveNumber);
  c->add_option("--warmup", a.warmup, "Untimed runs before measuring")->capture_default_str();
  c->add_option("--runs", a.runs, "Measured runs (fresh processes with --cold)")->capture_default_str()
      ->check(CLI::PositiveNumber);
  c->add_option("--timesteps", a.timesteps, "Sequence length")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_flag("--cold", a.cold, "Time the first call in a fresh process");
  c->add_option("--weights", a.weights, "Weights file (random when omitted)");
  c->add_option("--out", a.outputs, "Report files; format from extension .csv, .json or .svg");
}

int run_bench(const BenchArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  bench::BenchPlan plan;
  plan.model = bench::parse_model(a.model);
  plan.precisions.clear();
  for (const auto& p : a.precisions) plan.precisions.push_back(nn::parse_precision(p));
  plan.batch_sizes = a.batches;
  plan.warmup_runs = a.warmup;
  plan.measured_runs = a.runs;
  plan.timesteps = a.timesteps;
  plan.cold = a.cold;
  plan.weights = a.weights;
  plan.threads = g.threads;
  plan.seed = g.seed;
  std::vector<bench::ReportFormat> formats;
  as_usage([&] {
    plan.validate();
    for (const auto& o : a.outputs) formats.push_back(bench::format_for(o));
    return 0;
  });
  const auto report = plan.cold ? bench::bench_cold(plan, fs::read_symlink("/proc/self/exe")) : bench::bench_warm(plan);
  for (std::size_t i = 0; i < a.outputs.size(); ++i) bench::write_report(a.outputs[i], report, formats[i]);
  if (a.outputs.empty()) out << bench::to_csv(report);
  for (const auto& row : report.rows) {
    err << bench::to_string(row.model) << " " << nn::to_string(row.precision) << " batch " << row.batch
        << (row.cold ? " cold " : " warm ") << fmt("%.4f", row.stats.mean_ms) << " +- " << fmt("%.4f", row.stats.std_ms)
        << " ms\n";
  }
  return kOk;
}

struct ChildArgs {
  std::string model = "rnn", precision = "f32";
  std::size_t batch = 1, timesteps = 128, threads = 1;
  std::uint64_t seed = 0;
  std::int64_t spawn_ns = 0;
  fs::path weights;
};

void add_child(CLI::App& app, ChildArgs& a) {
  auto* c = app.add_subcommand(std::string(bench::kColdChildCommand), "");
  c->group("");
  c->add_option("--model", a.model)->required();
  c->add_option("--precision", a.precision)->required();
  c->add_option("--batch", a.batch)->required();
  c->add_option("--timesteps", a.timesteps)->required();
  c->add_option("--threads", a.threads);
  c->add_option("--seed", a.seed);
  c->add_option("--spawn-ns", a.spawn_ns)->required();
  c->add_option("--weights", a.weights);
}

int run_child(const ChildArgs& a, std::ostream& out) {
  bench::ColdChildRequest r;
  r.model = bench::parse_model(a.model);
  r.precision = nn::parse_precision(a.precision);
  r.batch = a.batch;
  r.timesteps = a.timesteps;
  r.threads = a.threads;
  r.seed = a.seed;
  r.spawn_ns = a.spawn_ns;
  r.weights = a.weights;
  out << fmt("%.6f", bench::run_cold_child(r)) << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"CWT-RNN online RF classifier toolkit", "cwtrnn"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file mirroring the flags; [gen], [train], ... sections per subcommand");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();

  GenArgs gen;
  CwtArgs cwt_args;
  TrainArgs train;
  EvalArgs eval;
  BenchArgs bench_args;
  ChildArgs child;
  add_gen(app, gen);
  add_cwt(app, cwt_args);
  add_train(app, train);
  add_eval(app, eval);
  add_bench(app, bench_args);
  add_child(app, child);
  for (auto* sub : app.get_subcommands({})) sub->allow_config_extras(CLI::config_extras_mode::error);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (app.got_subcommand("gen")) return run_gen(gen, g, err);
    if (app.got_subcommand("cwt")) return run_cwt(cwt_args, out, err);
    if (app.got_subcommand("train")) return run_train(train, g, err);
    if (app.got_subcommand("eval")) return run_eval(eval, g, out, err);
    if (app.got_subcommand("bench")) return run_bench(bench_args, g, out, err);
    if (app.got_subcommand(std::string(bench::kColdChildCommand))) return run_child(child, out);
    err << app.help();
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace cwtrnn::cli
