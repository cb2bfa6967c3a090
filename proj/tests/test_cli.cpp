#include "catch_amalgamated.hpp"

#include "lamperti/cli.hpp"
#include "lamperti/field_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lamperti;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t data_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++n;
  }
  return n;
}

fields::FieldSample parse_sample(const std::string& text) {
  std::istringstream in(text);
  return fields::read_field_sample(in);
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("lamperti_cli_" + std::to_string(std::rand()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("simulate", "[cli]") {
  const auto r = run({"simulate", "--model", "white-noise", "--grid", "4x4", "--reps", "10", "--seed", "1"});
  CHECK(r.code == 0);
  CHECK(data_rows(r.out) == 160);
  CHECK(r.out.find("# config.model=white-noise") != std::string::npos);

  const auto again = run({"simulate", "--model", "white-noise", "--grid", "4x4", "--reps", "10", "--seed", "1"});
  CHECK(again.out == r.out);

  const auto bad = run({"simulate", "--model", "levy-fbm", "--hurst", "1.5", "--points", "circle:4", "--reps", "2",
                        "--seed", "1"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("(0,1]") != std::string::npos);

  CHECK(run({"simulate", "--model", "white-noise", "--grid", "4x4", "--reps", "10"}).code == 2);
  CHECK(run({"simulate", "--model", "white-noise", "--grid", "4x4", "--points", "circle:3", "--reps", "1", "--seed", "1"})
            .code == 2);
  CHECK(run({"simulate", "--model", "nope", "--grid", "4x4", "--reps", "1", "--seed", "1"}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("transform round trips through files", "[cli]") {
  TempDir dir;
  const auto x = dir.file("x.csv"), y = dir.file("y.csv"), back = dir.file("back.csv");
  REQUIRE(run({"simulate", "--model", "fbm-sheet", "--h", "0.3,0.8", "--points", "0.5,0.5;1,2;3,0.25", "--reps", "20",
               "--seed", "4", "--out", x})
              .code == 0);
  REQUIRE(run({"transform", "--direction", "mss-fwd", "--in", x, "--hurst", "0.3,0.8", "--out", y}).code == 0);
  REQUIRE(run({"transform", "--direction", "mss-inv", "--in", y, "--hurst", "0.3,0.8", "--out", back}).code == 0);
  const auto a = parse_sample(read_file(x));
  const auto b = parse_sample(read_file(back));
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(std::abs(a.values[k] - b.values[k]) <= 1e-12 * std::max(1.0, std::abs(a.values[k])));
  for (std::size_t p = 0; p < a.points.size(); ++p) CHECK((a.points[p] - b.points[p]).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(parse_sample(read_file(y)).metadata.require("frame") == "stationary");

  // Applying a forward transform to a stationary-frame file is a usage error.
  CHECK(run({"transform", "--direction", "mss-fwd", "--in", y, "--hurst", "0.3,0.8"}).code == 2);
  CHECK(run({"transform", "--direction", "mss-fwd", "--in", dir.file("missing.csv"), "--hurst", "0.5"}).code == 2);
}

TEST_CASE("polar forward maps the unit circle to s1 = 0", "[cli]") {
  TempDir dir;
  const auto x = dir.file("x.csv");
  REQUIRE(run({"simulate", "--model", "levy-fbm", "--hurst", "0.5", "--points", "circle:12", "--reps", "3", "--seed",
               "2", "--out", x})
              .code == 0);
  const auto r = run({"transform", "--direction", "polar-fwd", "--in", x, "--hurst", "0.5"});
  REQUIRE(r.code == 0);
  const auto y = parse_sample(r.out);
  const auto xs = parse_sample(read_file(x));
  for (const auto& s : y.points) CHECK(std::abs(s[0]) <= 1e-15);
  // rho = 1, so the amplitude factor is 1.
  for (std::size_t k = 0; k < y.values.size(); ++k) CHECK(std::abs(y.values[k] - xs.values[k]) <= 1e-15);
}

TEST_CASE("verify", "[cli]") {
  auto ss = run({"verify", "self-similar", "--model", "fbm-sheet", "--h", "0.5,0.5", "--scale", "4,9"});
  CHECK(ss.code == 0);
  CHECK(ss.out.find("self-similar,") != std::string::npos);
  CHECK(run({"verify", "self-similar", "--model", "levy-fbm", "--hurst", "0.5", "--claim-hurst", "0.7"}).code == 1);
  CHECK(run({"verify", "stationary", "--model", "levy-fbm", "--hurst", "0.5", "--shift", "1,0"}).code == 1);
  CHECK(run({"verify", "stationary", "--model", "polar-stationary", "--hurst", "0.5", "--shift", "3,1"}).code == 0);
  CHECK(run({"verify", "stationary", "--model", "fbm-sheet", "--h", "0.2,0.9", "--pushforward", "mss"}).code == 0);
  CHECK(run({"verify", "stationary", "--model", "levy-fbm", "--hurst", "0.7", "--pushforward", "polar"}).code == 0);
  CHECK(run({"verify", "cocycle", "--hurst-matrix", "0.5,0.25;1,0"}).code == 0);
  CHECK(run({"verify", "prop6", "--hurst-matrix", "0.5,0.25"}).code == 0);
  CHECK(run({"verify", "wmss-shift", "--hurst-matrix", "0.3,0.6", "--D", "2.5"}).code == 0);

  const auto json = run({"verify", "self-similar", "--model", "fbm-sheet", "--h", "0.5,0.5", "--scale", "4,9",
                         "--mode", "sample", "--reps", "300", "--seed", "3", "--format", "json"});
  CHECK(json.code == 0);
  CHECK(json.out.find("\"test\":\"self-similar\"") != std::string::npos);
  CHECK(run({"verify", "nonsense"}).code == 2);
}

TEST_CASE("config files", "[cli]") {
  TempDir dir;
  const auto cfg = dir.file("run.cfg");
  write_file(cfg, "# comment\ncommand=simulate\nmodel=white-noise\ngrid=3x3\nreps=2\nseed=9\n");
  const auto r = run({"simulate", "--config", cfg});
  CHECK(r.code == 0);
  CHECK(data_rows(r.out) == 18);
  CHECK(r.out.find("# config.seed=9") != std::string::npos);

  const auto override = run({"simulate", "--config", cfg, "--reps", "3"});
  CHECK(override.code == 0);
  CHECK(data_rows(override.out) == 27);

  write_file(cfg, "model=white-noise\nwibble=1\n");
  CHECK(run({"simulate", "--config", cfg}).code == 2);
  write_file(cfg, "command=verify\n");
  CHECK(run({"simulate", "--config", cfg}).code == 2);
}

TEST_CASE("estimate", "[cli]") {
  const auto crv = run({"estimate", "crv", "--exponents", "0.3,0.7", "--slow", "product:log", "--base", "2", "--levels",
                        "16"});
  CHECK(crv.code == 0);
  CHECK(crv.out.rfind("# experiment=", 0) == 0);
  CHECK(crv.out.find("n,gamma,t,s,statistic,value,stderr") != std::string::npos);

  const auto norm = run({"estimate", "normalization", "--model", "white-noise", "--gamma", "2", "--n-list",
                         "16,32,64,128"});
  CHECK(norm.code == 0);
  CHECK(norm.out.find("h_hat,1.5") != std::string::npos);
  CHECK(run({"estimate", "normalization", "--model", "white-noise", "--n-list", "16,32"}).code == 2);
}

TEST_CASE("sumfield and scaletrans", "[cli]") {
  const auto sf = run({"sumfield", "--model", "white-noise", "--n", "8,8", "--t", "1,1;0.5,0.5", "--reps", "100",
                       "--seed", "1"});
  CHECK(sf.code == 0);
  CHECK(sf.out.find("exact_variance,1,") != std::string::npos);
  CHECK(sf.out.find("exact_variance,0.25,") != std::string::npos);
  CHECK(run({"sumfield", "--model", "levy-fbm", "--n", "8,8", "--reps", "10", "--seed", "1"}).code == 2);

  const auto st = run({"scaletrans", "--model", "lattice-lrd", "--q", "0.5", "--gammas", "0.5,1,1.5,2", "--n-list",
                       "16,32,64,128"});
  CHECK(st.code == 0);
  CHECK(st.err.find("warning: ratio condition") != std::string::npos);
  CHECK(st.out.find("breakpoint_gamma") != std::string::npos);

  const auto white = run({"scaletrans", "--model", "white-noise", "--gammas", "1", "--n-list", "16,32,64,128"});
  CHECK(white.code == 0);
  CHECK(white.err.empty());
  CHECK(white.out.find("breakpoint_gamma") == std::string::npos);
}
