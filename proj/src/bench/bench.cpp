// SPDX-License-Identifier: Apache-2.0
#include "cwtrnn/bench/bench.hpp"

#include <spawn.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include "cwtrnn/cnnref/cnn.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/fileio.hpp"
#include "cwtrnn/core/parallel.hpp"
#include "cwtrnn/core/rng.hpp"
#include "cwtrnn/plot/svg.hpp"
#include "cwtrnn/rnn/io.hpp"
#include "cwtrnn/rnn/model.hpp"
#include "json.hpp"

extern char** environ;

namespace cwtrnn::bench {

using nn::Precision;

std::string_view to_string(ModelKind k) { return k == ModelKind::kRnn ? "rnn" : "cnn"; }

ModelKind parse_model(std::string_view name) {
  if (name == "rnn") return ModelKind::kRnn;
  if (name == "cnn") return ModelKind::kCnn;
  throw InvalidArgument("unknown model '" + std::string(name) + "' (expected rnn or cnn)");
}

void BenchPlan::validate() const {
  if (measured_runs == 0) throw InvalidArgument("measured runs must be >= 1");
  if (precisions.empty() || batch_sizes.empty()) throw InvalidArgument("bench plan needs precisions and batch sizes");
  if (std::find(batch_sizes.begin(), batch_sizes.end(), std::size_t{0}) != batch_sizes.end()) {
    throw InvalidArgument("batch sizes must be positive");
  }
  if (threads == 0 || timesteps == 0) throw InvalidArgument("threads and timesteps must be positive");
}

Stats summarize(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("no samples to summarize");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  Stats st;
  st.runs = s.size();
  st.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : s) ss += (v - st.mean_ms) * (v - st.mean_ms);
  st.std_ms = s.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  st.min_ms = s.front();
  auto pct = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  st.p50_ms = pct(0.5);
  st.p99_ms = pct(0.99);
  return st;
}

Environment environment(std::size_t threads) {
  Environment e;
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) e.cpu_model = line.substr(line.find_first_not_of(" \t", colon + 1));
      break;
    }
  }
  if (e.cpu_model.empty()) {
    utsname u{};
    e.cpu_model = uname(&u) == 0 ? std::string(u.machine) : "unknown";
  }
  e.logical_cpus = std::max(1u, std::thread::hardware_concurrency());
  e.threads = threads;
#if defined(__clang__)
  e.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  e.compiler = "gcc " __VERSION__;
#else
  e.compiler = "unknown";
#endif
  std::vector<std::string> simd;
#ifdef __AVX2__
  simd.push_back("avx2");
#endif
#ifdef __FMA__
  simd.push_back("fma");
#endif
#ifdef __F16C__
  simd.push_back("f16c");
#endif
  for (const auto& s : simd) e.simd += (e.simd.empty() ? "" : "+") + s;
  if (e.simd.empty()) e.simd = "scalar";
  return e;
}

std::vector<double> time_runs(const std::function<void()>& fn, std::size_t warmup, std::size_t runs) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> ms;
  ms.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return ms;
}

std::int64_t monotonic_ns() noexcept {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

rnn::RnnModel load_rnn(const std::filesystem::path& weights, std::uint64_t seed) {
  if (!weights.empty()) return rnn::load_bundle(weights).model;
  Rng rng = Rng::derive(seed, 1);
  return rnn::RnnModel::init(rnn::RnnConfig{}, rng);
}

nn::WeightSet load_cnn_weights(const std::filesystem::path& weights, const cnnref::CnnConfig& cfg, std::uint64_t seed) {
  if (!weights.empty()) return nn::load_weights(weights);
  Rng rng = Rng::derive(seed, 1);
  return cnnref::random_cnn_weights(cfg, rng);
}

// Row blocks per thread; each block owns its output slice.
struct Split {
  std::size_t threads, batch;
  std::size_t blocks() const { return std::min(threads, batch); }
  std::pair<std::size_t, std::size_t> block(std::size_t k) const {
    const std::size_t chunk = (batch + blocks() - 1) / blocks();
    const std::size_t lo = std::min(batch, k * chunk);
    return {lo, std::min(batch, lo + chunk) - lo};
  }
};

struct RnnWorkload {
  rnn::RnnInference inference;
  std::vector<float> input, output;
  std::vector<rnn::RnnInference::Scratch> scratch;
  Split split;
  std::size_t timesteps;

  void operator()() {
    const auto& c = inference.config();
    const std::size_t in_stride = timesteps * c.input_width(), out_stride = timesteps * c.classes;
    parallel_for(split.blocks(), split.threads, [&](std::size_t k) {
      const auto [lo, n] = split.block(k);
      if (n) inference.forward(input.data() + lo * in_stride, n, timesteps, output.data() + lo * out_stride, scratch[k]);
    });
  }
};

struct CnnWorkload {
  std::unique_ptr<cnnref::Cnn> net;
  std::vector<float> input, output;
  Split split;

  void operator()() {
    const auto& c = net->config();
    parallel_for(split.blocks(), split.threads, [&](std::size_t k) {
      const auto [lo, n] = split.block(k);
      if (n) net->forward(input.data() + lo * 2 * c.timesteps, n, output.data() + lo * c.classes);
    });
  }
};

std::function<void()> build_workload(ModelKind model, Precision precision, std::size_t batch, std::size_t timesteps,
                                     std::size_t threads, const std::filesystem::path& weights, std::uint64_t seed,
                                     std::vector<float>* input_override = nullptr) {
  const Split split{threads, batch};
  if (model == ModelKind::kRnn) {
    auto w = std::make_shared<RnnWorkload>();
    w->inference = rnn::RnnInference(load_rnn(weights, seed), precision);
    const auto& c = w->inference.config();
    w->input = input_override ? std::move(*input_override) : random_values(batch * timesteps * c.input_width(), seed + 2);
    if (w->input.size() != batch * timesteps * c.input_width()) throw ShapeError("bench input has the wrong size");
    w->output.resize(batch * timesteps * c.classes);
    w->scratch.resize(split.blocks());
    w->split = split;
    w->timesteps = timesteps;
    return [w] { (*w)(); };
  }
  auto w = std::make_shared<CnnWorkload>();
  cnnref::CnnConfig cfg;
  cfg.timesteps = timesteps;
  w->net = std::make_unique<cnnref::Cnn>(load_cnn_weights(weights, cfg, seed), precision, cfg);
  w->input = input_override ? std::move(*input_override) : random_values(batch * 2 * timesteps, seed + 2);
  if (w->input.size() != batch * 2 * timesteps) throw ShapeError("bench input has the wrong size");
  w->output.resize(batch * cfg.classes);
  w->split = split;
  return [w] { (*w)(); };
}

std::size_t input_size(ModelKind model, std::size_t batch, std::size_t timesteps) {
  return model == ModelKind::kRnn ? batch * timesteps * rnn::RnnConfig{}.input_width() : batch * 2 * timesteps;
}

}  // namespace

std::function<void()> make_workload(const BenchPlan& plan, Precision precision, std::size_t batch) {
  plan.validate();
  return build_workload(plan.model, precision, batch, plan.timesteps, plan.threads, plan.weights, plan.seed);
}

BenchReport bench_warm(const BenchPlan& plan) {
  plan.validate();
  BenchReport report;
  report.environment = environment(plan.threads);
  const std::size_t P = plan.precisions.size();
  std::vector<std::vector<Stats>> stats(P);
  for (std::size_t batch : plan.batch_sizes) {
    std::vector<std::function<void()>> fns;
    for (Precision p : plan.precisions) fns.push_back(make_workload(plan, p, batch));
    for (const auto& fn : fns)
      for (std::size_t i = 0; i < plan.warmup_runs; ++i) fn();
    // Precisions take turns run by run so clock drift affects each alike.
    std::vector<std::vector<double>> ms(P);
    for (std::size_t r = 0; r < plan.measured_runs; ++r)
      for (std::size_t k = 0; k < P; ++k) ms[k].push_back(time_runs(fns[k], 0, 1).front());
    for (std::size_t k = 0; k < P; ++k) stats[k].push_back(summarize(ms[k]));
  }
  for (std::size_t k = 0; k < P; ++k)
    for (std::size_t j = 0; j < plan.batch_sizes.size(); ++j)
      report.rows.push_back({plan.model, plan.precisions[k], plan.batch_sizes[j], false, stats[k][j]});
  return report;
}

std::vector<std::string> cold_child_args(const ColdChildRequest& r) {
  std::vector<std::string> a = {std::string(kColdChildCommand),
                                "--model", std::string(to_string(r.model)),
                                "--precision", std::string(nn::to_string(r.precision)),
                                "--batch", std::to_string(r.batch),
                                "--timesteps", std::to_string(r.timesteps),
                                "--threads", std::to_string(r.threads),
                                "--seed", std::to_string(r.seed),
                                "--spawn-ns", std::to_string(r.spawn_ns)};
  if (!r.weights.empty()) {
    a.push_back("--weights");
    a.push_back(r.weights.string());
  }
  return a;
}

double run_cold_child(const ColdChildRequest& r) {
  // The input stands in for data already resident on an online receiver, so its synthesis is not charged.
  const auto s0 = monotonic_ns();
  auto input = random_values(input_size(r.model, r.batch, r.timesteps), r.seed + 2);
  const auto synth_ns = monotonic_ns() - s0;
  const auto fn = build_workload(r.model, r.precision, r.batch, r.timesteps, r.threads, r.weights, r.seed, &input);
  fn();
  const auto end = monotonic_ns();
  return static_cast<double>(end - r.spawn_ns - synth_ns) / 1e6;
}

namespace {

double spawn_trial(const std::filesystem::path& exe, ColdChildRequest req) {
  int fds[2];
  if (pipe(fds) != 0) throw Error("pipe failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);

  req.spawn_ns = monotonic_ns();
  std::vector<std::string> args = cold_child_args(req);
  args.insert(args.begin(), exe.string());
  std::vector<char*> argv;
  for (auto& s : args) argv.push_back(s.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(fds[1]);
  if (rc != 0) {
    close(fds[0]);
    throw Error("cannot spawn " + exe.string() + ": " + std::strerror(rc));
  }
  std::string out;
  char buf[256];
  for (ssize_t n; (n = read(fds[0], buf, sizeof buf)) > 0;) out.append(buf, static_cast<std::size_t>(n));
  close(fds[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error("cold-start child failed (status " + std::to_string(status) + "): " + out);
  }
  try {
    return std::stod(out);
  } catch (const std::exception&) {
    throw Error("cold-start child printed '" + out + "'");
  }
}

}  // namespace

BenchReport bench_cold(const BenchPlan& plan, const std::filesystem::path& executable) {
  plan.validate();
  std::filesystem::path weights = plan.weights;
  std::filesystem::path scratch_dir;
  if (weights.empty()) {
    scratch_dir = std::filesystem::temp_directory_path() /
                  ("cwtrnn-cold-" + std::to_string(getpid()) + "-" + std::to_string(monotonic_ns()));
    std::filesystem::create_directories(scratch_dir);
    weights = scratch_dir / "weights.wgts";
    if (plan.model == ModelKind::kRnn) {
      rnn::RnnBundle b;
      b.model = load_rnn({}, plan.seed);
      b.cwt = cwt::nominal_params();
      rnn::save_bundle(weights, b);
    } else {
      cnnref::CnnConfig cfg;
      cfg.timesteps = plan.timesteps;
      nn::save_weights(weights, load_cnn_weights({}, cfg, plan.seed));
    }
  }
  BenchReport report;
  report.environment = environment(plan.threads);
  try {
    for (Precision p : plan.precisions) {
      for (std::size_t batch : plan.batch_sizes) {
        std::vector<double> ms;
        for (std::size_t i = 0; i < plan.measured_runs; ++i) {
          ms.push_back(spawn_trial(executable, {plan.model, p, batch, plan.timesteps, plan.threads, weights, plan.seed, 0}));
        }
        report.rows.push_back({plan.model, p, batch, true, summarize(ms)});
      }
    }
  } catch (...) {
    if (!scratch_dir.empty()) std::filesystem::remove_all(scratch_dir);
    throw;
  }
  if (!scratch_dir.empty()) std::filesystem::remove_all(scratch_dir);
  return report;
}

std::string to_csv(const BenchReport& r) {
  std::ostringstream os;
  os << "model,precision,batch,cold,mean_ms,std_ms,min_ms,p50_ms,p99_ms,runs\n";
  char buf[256];
  for (const auto& row : r.rows) {
    const auto& s = row.stats;
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%zu\n", to_string(row.model).data(),
                  nn::to_string(row.precision).data(), row.batch, row.cold ? "true" : "false", s.mean_ms, s.std_ms,
                  s.min_ms, s.p50_ms, s.p99_ms, s.runs);
    os << buf;
  }
  return os.str();
}

std::string to_json(const BenchReport& r) {
  nlohmann::json j;
  j["environment"] = {{"cpu_model", r.environment.cpu_model},
                      {"logical_cpus", r.environment.logical_cpus},
                      {"threads", r.environment.threads},
                      {"compiler", r.environment.compiler},
                      {"simd", r.environment.simd}};
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    const auto& s = row.stats;
    j["rows"].push_back({{"model", to_string(row.model)},
                         {"precision", nn::to_string(row.precision)},
                         {"batch", row.batch},
                         {"cold", row.cold},
                         {"mean_ms", s.mean_ms},
                         {"std_ms", s.std_ms},
                         {"min_ms", s.min_ms},
                         {"p50_ms", s.p50_ms},
                         {"p99_ms", s.p99_ms},
                         {"runs", s.runs}});
  }
  return j.dump(2) + "\n";
}

BenchReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    BenchReport r;
    const auto& e = j.at("environment");
    r.environment = {e.at("cpu_model").get<std::string>(), e.at("logical_cpus").get<std::size_t>(),
                     e.at("threads").get<std::size_t>(), e.at("compiler").get<std::string>(),
                     e.at("simd").get<std::string>()};
    for (const auto& row : j.at("rows")) {
      BenchRow b;
      b.model = parse_model(row.at("model").get<std::string>());
      b.precision = nn::parse_precision(row.at("precision").get<std::string>());
      b.batch = row.at("batch").get<std::size_t>();
      b.cold = row.at("cold").get<bool>();
      b.stats = {row.at("mean_ms").get<double>(), row.at("std_ms").get<double>(), row.at("min_ms").get<double>(),
                 row.at("p50_ms").get<double>(), row.at("p99_ms").get<double>(), row.at("runs").get<std::size_t>()};
      r.rows.push_back(b);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatErrorKind::kBadValue, std::string("bench report JSON: ") + e.what());
  }
}

std::string to_svg(const BenchReport& r) {
  plot::BarChart chart;
  chart.title = "Inference time per batch (" + r.environment.cpu_model + ", " + std::to_string(r.environment.threads) +
                " thread" + (r.environment.threads == 1 ? "" : "s") + ")";
  chart.y_label = "ms";
  for (const auto& row : r.rows) {
    chart.bars.push_back({std::string(to_string(row.model)) + " " + std::string(nn::to_string(row.precision)) + " b" +
                              std::to_string(row.batch) + (row.cold ? " cold" : ""),
                          row.stats.mean_ms, row.stats.std_ms});
  }
  return plot::bar_chart_svg(chart);
}

ReportFormat format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::kCsv;
  if (ext == ".json") return ReportFormat::kJson;
  if (ext == ".svg") return ReportFormat::kSvg;
  throw InvalidArgument("report path " + path.string() + " needs a .csv, .json or .svg extension");
}

void write_report(const std::filesystem::path& path, const BenchReport& report, ReportFormat format) {
  if (report.rows.empty()) throw InvalidArgument("empty bench report");
  std::string text;
  switch (format) {
    case ReportFormat::kCsv: text = to_csv(report); break;
    case ReportFormat::kJson: text = to_json(report); break;
    case ReportFormat::kSvg: text = to_svg(report); break;
  }
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace cwtrnn::bench
