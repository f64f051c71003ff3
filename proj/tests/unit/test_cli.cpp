#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "cwtrnn/core/dataset.hpp"
#include "cwtrnn/core/fileio.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cwtrnn;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "cwtrnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string slurp(const std::filesystem::path& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

void write(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("no arguments prints usage and exits 1") {
  const auto r = run({});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("Usage:") != std::string::npos);
  CHECK(run({"--help"}).code == cli::kOk);
  CHECK(run({"gen", "--kind", "nope", "--out", "x"}).code == cli::kUsage);
}

TEST_CASE("gen is deterministic for a seed") {
  testutil::TempDir dir("cli-gen");
  const std::vector<std::string> common = {"gen", "--kind", "qrf", "--per-class", "2", "--snr-min", "0", "--snr-max", "4"};
  auto with = [&](const std::string& out, const std::string& seed) {
    auto a = common;
    a.insert(a.end(), {"--out", (dir / out).string(), "--seed", seed});
    return run(a).code;
  };
  REQUIRE(with("a.rfds", "7") == cli::kOk);
  REQUIRE(with("b.rfds", "7") == cli::kOk);
  REQUIRE(with("c.rfds", "8") == cli::kOk);
  CHECK(read_file(dir / "a.rfds") == read_file(dir / "b.rfds"));
  CHECK(read_file(dir / "a.rfds") != read_file(dir / "c.rfds"));
  CHECK(read_dataset(dir / "a.rfds").examples.size() == 11 * 3 * 2);

  CHECK(run({"gen", "--kind", "chirp", "--out", (dir / "chirp.rfds").string()}).code == cli::kOk);
  CHECK(read_dataset(dir / "chirp.rfds").examples.size() == 1);
  CHECK(run({"gen", "--out", (dir / "x.rfds").string(), "--classes", "1;9"}).code == cli::kUsage);
}

TEST_CASE("train then eval writes a per-timestep CSV with T rows") {
  testutil::TempDir dir("cli-train");
  const auto data = (dir / "d.rfds").string(), w = (dir / "w.wgts").string();
  REQUIRE(run({"gen", "--out", data, "--classes", "1;2;3", "--snr-min", "16", "--snr-max", "18", "--per-class", "10",
               "--timesteps", "32"})
              .code == cli::kOk);
  const auto t = run({"train", "--dataset", data, "--epochs", "2", "--batch", "16", "--hidden", "8", "--out", w,
                      "--curves", (dir / "c.csv").string(), "--curves-svg", (dir / "c.svg").string(), "--seed", "3"});
  REQUIRE(t.code == cli::kOk);
  CHECK(t.out.empty());
  CHECK(lines(slurp(dir / "c.csv")) == 3);
  CHECK(slurp(dir / "c.svg").rfind("<svg", 0) == 0);

  const auto e = run({"eval", "--weights", w, "--dataset", data, "--per-timestep", (dir / "acc.csv").string(),
                      "--confusion", (dir / "cm.csv").string(), "--precision", "f16"});
  REQUIRE(e.code == cli::kOk);
  CHECK(e.out.find("\"accuracy\"") != std::string::npos);
  CHECK(lines(slurp(dir / "acc.csv")) == 32 + 1);
  CHECK(lines(slurp(dir / "cm.csv")) == 3 + 1);

  // Same seed, same weights.
  const auto w2 = (dir / "w2.wgts").string();
  REQUIRE(run({"train", "--dataset", data, "--epochs", "2", "--batch", "16", "--hidden", "8", "--out", w2, "--seed", "3"})
              .code == cli::kOk);
  CHECK(read_file(w) == read_file(w2));
}

TEST_CASE("snr task and cnn eval") {
  testutil::TempDir dir("cli-snr");
  const auto data = (dir / "d.rfds").string();
  REQUIRE(run({"gen", "--out", data, "--snr-min", "0", "--snr-max", "16", "--snr-step", "4", "--per-class", "1",
               "--timesteps", "16"})
              .code == cli::kOk);
  CHECK(run({"train", "--dataset", data, "--task", "snr", "--snr-bins", "5", "--epochs", "1", "--val-fraction", "0",
             "--hidden", "4", "--out", (dir / "s.wgts").string()})
            .code == cli::kOk);
  CHECK(run({"train", "--dataset", data, "--task", "snr", "--snr-bins", "1,x", "--out", (dir / "s.wgts").string()}).code ==
        cli::kUsage);
  // A .wgts holding RNN tensors is not a CNN weight set.
  CHECK(run({"eval", "--model", "cnn", "--weights", (dir / "s.wgts").string(), "--dataset", data}).code == cli::kDataError);
}

TEST_CASE("cwt subcommand emits T x F rows") {
  testutil::TempDir dir("cli-cwt");
  const auto data = (dir / "c.rfds").string();
  REQUIRE(run({"gen", "--kind", "chirp", "--out", data}).code == cli::kOk);
  const auto r = run({"cwt", "--input", data});
  REQUIRE(r.code == cli::kOk);
  CHECK(lines(r.out) == 128 * 32 + 1);
  REQUIRE(run({"cwt", "--input", data, "--cycles", "3", "--bin", (dir / "g.bin").string(), "--svg",
               (dir / "g.svg").string()})
              .code == cli::kOk);
  CHECK(read_file(dir / "g.bin").size() == 128 * 32 * 8);
  CHECK(run({"cwt", "--input", data, "--index", "5"}).code == cli::kUsage);

  std::vector<std::uint8_t> raw(16 * 8, 0);
  write_file(dir / "s.iq", raw);
  CHECK(run({"cwt", "--input", (dir / "s.iq").string(), "--freqs", "4"}).code == cli::kOk);
}

TEST_CASE("data and format problems exit 2") {
  testutil::TempDir dir("cli-bad");
  write(dir / "bad.rfds", "garbage");
  CHECK(run({"eval", "--weights", (dir / "none.wgts").string(), "--dataset", (dir / "bad.rfds").string()}).code ==
        cli::kDataError);
  CHECK(run({"train", "--dataset", (dir / "missing.rfds").string(), "--out", (dir / "w").string()}).code ==
        cli::kDataError);
}

TEST_CASE("config file: flags win, unknown keys are named") {
  testutil::TempDir dir("cli-config");
  const auto out = (dir / "d.rfds").string();
  write(dir / "ok.toml", "seed = 5\n[gen]\nper-class = 1\nsnr-min = 0\nsnr-max = 2\nout = \"" + out + "\"\n");
  REQUIRE(run({"--config", (dir / "ok.toml").string(), "gen"}).code == cli::kOk);
  CHECK(read_dataset(out).examples.size() == 11 * 2);
  REQUIRE(run({"--config", (dir / "ok.toml").string(), "gen", "--per-class", "2"}).code == cli::kOk);
  CHECK(read_dataset(out).examples.size() == 11 * 2 * 2);

  write(dir / "bad.toml", "[gen]\nper-clas = 1\n");
  const auto r = run({"--config", (dir / "bad.toml").string(), "gen", "--out", out});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("per-clas") != std::string::npos);
}

TEST_CASE("bench writes CSV to the output stream and reports to files") {
  testutil::TempDir dir("cli-bench");
  const auto r = run({"bench", "--batch-sizes", "1,2", "--precision", "f32,int8", "--runs", "3", "--warmup", "1",
                      "--timesteps", "4"});
  REQUIRE(r.code == cli::kOk);
  CHECK(lines(r.out) == 5);
  CHECK(r.out.rfind("model,precision,batch,cold,", 0) == 0);
  const auto f = run({"bench", "--model", "cnn", "--batch-sizes", "1", "--precision", "f16", "--runs", "2", "--out",
                      (dir / "r.json").string(), "--out", (dir / "r.svg").string()});
  REQUIRE(f.code == cli::kOk);
  CHECK(f.out.empty());
  CHECK(slurp(dir / "r.json").find("\"cpu_model\"") != std::string::npos);
  CHECK(run({"bench", "--out", (dir / "r.txt").string()}).code == cli::kUsage);
}
