// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwtrnn/nn/quantize.hpp"

namespace cwtrnn::bench {

enum class ModelKind { kRnn, kCnn };

std::string_view to_string(ModelKind kind);
// "rnn" or "cnn"; throws InvalidArgument otherwise.
ModelKind parse_model(std::string_view name);

struct BenchPlan {
  ModelKind model = ModelKind::kRnn;
  std::vector<nn::Precision> precisions = {nn::Precision::kF32, nn::Precision::kF16, nn::Precision::kInt8};
  std::vector<std::size_t> batch_sizes = {1, 5, 32, 1024};
  std::size_t warmup_runs = 10;
  std::size_t measured_runs = 100;
  bool cold = false;
  // Threads inside the timed region; batches are split into contiguous row blocks.
  std::size_t threads = 1;
  std::size_t timesteps = 128;
  // RNN bundle or CNN weight set; random weights from `seed` when empty.
  std::filesystem::path weights;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Stats {
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample standard deviation (n - 1)
  double min_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  std::size_t runs = 0;

  friend bool operator==(const Stats&, const Stats&) = default;
};

// Percentiles interpolate linearly between order statistics.
Stats summarize(std::span<const double> samples_ms);

struct BenchRow {
  ModelKind model = ModelKind::kRnn;
  nn::Precision precision = nn::Precision::kF32;
  std::size_t batch = 1;
  bool cold = false;
  Stats stats;

  friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct Environment {
  std::string cpu_model;
  std::size_t logical_cpus = 0;
  std::size_t threads = 1;
  std::string compiler;
  std::string simd;

  friend bool operator==(const Environment&, const Environment&) = default;
};

Environment environment(std::size_t threads);

struct BenchReport {
  Environment environment;
  std::vector<BenchRow> rows;

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

/// Calls fn `warmup` times untimed, then `runs` times with a steady clock
/// around each call. Returns the per-run milliseconds.
std::vector<double> time_runs(const std::function<void()>& fn, std::size_t warmup, std::size_t runs);

/// A forward pass over a preloaded random batch, ready to be timed.
std::function<void()> make_workload(const BenchPlan& plan, nn::Precision precision, std::size_t batch);

// One row per (precision, batch), precisions outermost. Within a batch size
// the precisions are timed in alternation, one run each per round.
BenchReport bench_warm(const BenchPlan& plan);

/// Fresh-process first-call timing. Each trial spawns `executable` with
/// cold_child_args(); the child loads the weights, builds the model and runs
/// one forward pass. Random weights are written to a temporary file first
/// when the plan names none.
BenchReport bench_cold(const BenchPlan& plan, const std::filesystem::path& executable);

struct ColdChildRequest {
  ModelKind model = ModelKind::kRnn;
  nn::Precision precision = nn::Precision::kF32;
  std::size_t batch = 1;
  std::size_t timesteps = 128;
  std::size_t threads = 1;
  std::filesystem::path weights;
  std::uint64_t seed = 0;
  std::int64_t spawn_ns = 0;  // CLOCK_MONOTONIC at spawn in the parent
};

// Name of the hidden CLI subcommand and its arguments.
inline constexpr std::string_view kColdChildCommand = "bench-cold-child";
std::vector<std::string> cold_child_args(const ColdChildRequest& request);

/// Runs in the child. Returns milliseconds from the parent's spawn time to
/// the end of the first forward pass, minus the time spent synthesizing the
/// input batch.
double run_cold_child(const ColdChildRequest& request);

std::int64_t monotonic_ns() noexcept;

enum class ReportFormat { kCsv, kJson, kSvg };

// Columns: model,precision,batch,cold,mean_ms,std_ms,min_ms,p50_ms,p99_ms,runs.
std::string to_csv(const BenchReport& report);
std::string to_json(const BenchReport& report);
BenchReport report_from_json(std::string_view json);
// Bars of mean +- 1 sigma; log axis when the means span more than 10x.
std::string to_svg(const BenchReport& report);
// Throws InvalidArgument for an empty report, IoError when writing fails.
void write_report(const std::filesystem::path& path, const BenchReport& report, ReportFormat format);
// From the extension: .csv, .json, .svg.
ReportFormat format_for(const std::filesystem::path& path);

}  // namespace cwtrnn::bench
