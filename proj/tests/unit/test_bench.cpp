#include <cmath>
#include <sstream>

#include "cwtrnn/bench/bench.hpp"
#include "cwtrnn/core/error.hpp"
#include "cwtrnn/core/fileio.hpp"
#include "cwtrnn/plot/svg.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cwtrnn;
using namespace cwtrnn::bench;

namespace {

BenchRow row(double mean, std::size_t batch = 1) {
  BenchRow r;
  r.batch = batch;
  r.stats = {mean, mean / 10, mean * 0.9, mean, mean * 1.2, 100};
  return r;
}

bool agree(const Stats& a, const Stats& b) {
  return std::fabs(a.mean_ms - b.mean_ms) <= 3.0 * std::hypot(a.std_ms, b.std_ms);
}

}  // namespace

TEST_CASE("summary statistics") {
  const std::vector<double> v = {4, 1, 3, 2};
  const auto s = summarize(v);
  CHECK(s.runs == 4);
  CHECK(s.mean_ms == doctest::Approx(2.5));
  CHECK(s.std_ms == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.min_ms == 1.0);
  CHECK(s.p50_ms == doctest::Approx(2.5));
  CHECK(s.p99_ms == doctest::Approx(3.97));
  CHECK(summarize(std::vector<double>{7}).std_ms == 0.0);
  CHECK_THROWS_AS(summarize(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("warmup calls are not timed") {
  int calls = 0;
  const auto ms = time_runs([&] { ++calls; }, 10, 25);
  CHECK(calls == 35);
  CHECK(ms.size() == 25);
}

TEST_CASE("harness overhead on an empty workload is below 10 microseconds") {
  const auto s = summarize(time_runs([] {}, 10, 1000));
  CHECK(s.mean_ms < 0.010);
}

TEST_CASE("warm report has one row per precision and batch") {
  BenchPlan plan;
  plan.batch_sizes = {1, 3};
  plan.timesteps = 8;
  plan.warmup_runs = 1;
  plan.measured_runs = 3;
  const auto r = bench_warm(plan);
  REQUIRE(r.rows.size() == 6);
  CHECK(r.rows[0].precision == nn::Precision::kF32);
  CHECK(r.rows[5].precision == nn::Precision::kInt8);
  CHECK(r.rows[5].batch == 3);
  for (const auto& x : r.rows) {
    CHECK_FALSE(x.cold);
    CHECK(x.stats.runs == 3);
  }
  CHECK_FALSE(r.environment.cpu_model.empty());
  CHECK(r.environment.threads == 1);
  plan.measured_runs = 0;
  CHECK_THROWS_AS(plan.validate(), InvalidArgument);
}

TEST_CASE("repeated warm reports agree within 3 sigma") {
  BenchPlan plan;
  plan.precisions = {nn::Precision::kF32};
  plan.batch_sizes = {5};
  plan.timesteps = 32;
  plan.measured_runs = 50;
  const auto a = bench_warm(plan), b = bench_warm(plan);
  CHECK(agree(a.rows[0].stats, b.rows[0].stats));
}

TEST_CASE("threaded workloads cover every row") {
  BenchPlan plan;
  plan.threads = 3;
  plan.timesteps = 4;
  plan.batch_sizes = {7};
  plan.measured_runs = 2;
  CHECK_NOTHROW(bench_warm(plan));
}

TEST_CASE("CNN latency does not depend on weight values") {
  BenchPlan plan;
  plan.model = ModelKind::kCnn;
  plan.precisions = {nn::Precision::kF32};
  plan.batch_sizes = {1};
  plan.measured_runs = 30;
  std::vector<Stats> s;
  for (std::uint64_t seed : {1, 2, 3}) {
    plan.seed = seed;
    s.push_back(bench_warm(plan).rows[0].stats);
  }
  CHECK(agree(s[0], s[1]));
  CHECK(agree(s[1], s[2]));
}

TEST_CASE("CSV has a header and one line per row") {
  BenchReport r;
  r.environment = environment(1);
  r.rows = {row(1.5)};
  const auto csv = to_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind("model,precision,batch,cold,mean_ms,std_ms,min_ms,p50_ms,p99_ms,runs\n", 0) == 0);
  CHECK(csv.find("rnn,f32,1,false,1.500000,") != std::string::npos);
}

TEST_CASE("JSON round trip") {
  BenchReport r;
  r.environment = environment(2);
  r.rows = {row(0.25), row(12.0, 1024)};
  r.rows[1].cold = true;
  r.rows[1].precision = nn::Precision::kInt8;
  r.rows[1].model = ModelKind::kCnn;
  CHECK(report_from_json(to_json(r)) == r);
  CHECK_THROWS_AS(report_from_json("{\"rows\": 3}"), FormatError);
}

TEST_CASE("SVG axis turns logarithmic past a 10x span") {
  BenchReport r;
  r.environment = environment(1);
  r.rows = {row(0.2), row(5.0)};
  const auto svg = to_svg(r);
  CHECK(svg.find("data-scale=\"log\"") != std::string::npos);
  plot::BarChart chart;
  chart.bars = {{"a", 0.2, 0.0}, {"b", 5.0, 0.0}};
  CHECK(axis_ticks(chart) == std::vector<double>{0.1, 1.0, 10.0});
  chart.bars[1].value = 1.5;
  CHECK(plot::resolve_scale(chart) == plot::AxisScale::kLinear);
  r.rows[1] = row(1.0);
  CHECK(to_svg(r).find("data-scale=\"linear\"") != std::string::npos);
}

TEST_CASE("report files and formats") {
  testutil::TempDir dir("bench");
  BenchReport r;
  CHECK_THROWS_AS(write_report(dir / "x.csv", r, ReportFormat::kCsv), InvalidArgument);
  r.environment = environment(1);
  r.rows = {row(1.0)};
  write_report(dir / "x.json", r, format_for(dir / "x.json"));
  const auto bytes = read_file(dir / "x.json");
  CHECK(report_from_json(std::string(bytes.begin(), bytes.end())) == r);
  CHECK_THROWS_AS(format_for("x.txt"), InvalidArgument);
}

TEST_CASE("cold child arguments name every request field") {
  ColdChildRequest q;
  q.model = ModelKind::kCnn;
  q.precision = nn::Precision::kF16;
  q.batch = 5;
  q.spawn_ns = 42;
  q.weights = "w.wgts";
  const auto a = cold_child_args(q);
  CHECK(a.front() == kColdChildCommand);
  const std::string joined = [&] {
    std::string s;
    for (const auto& x : a) s += x + " ";
    return s;
  }();
  CHECK(joined.find("--model cnn --precision f16 --batch 5") != std::string::npos);
  CHECK(joined.find("--spawn-ns 42 --weights w.wgts") != std::string::npos);
}

TEST_CASE("cold child timing starts at the spawn stamp") {
  ColdChildRequest q;
  q.timesteps = 4;
  q.spawn_ns = monotonic_ns() - 50'000'000;  // 50 ms ago
  CHECK(run_cold_child(q) >= 50.0);
}
