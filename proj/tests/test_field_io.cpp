#include "catch_amalgamated.hpp"

#include "lamperti/field_io.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace lamperti;
using namespace lamperti::fields;

namespace {

FieldSample roundtrip(const FieldSample& s) {
  std::stringstream buf;
  write_field_sample(buf, s);
  return read_field_sample(buf);
}

}  // namespace

TEST_CASE("field samples round trip bit-exactly", "[field_io]") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  FieldSample s;
  for (int i = 0; i < 7; ++i) {
    Vec p(2);
    p << u(gen), u(gen);
    s.points.push_back(p);
  }
  s.n_reps = 5;
  s.components = 2;
  for (std::size_t k = 0; k < s.n_reps * s.points.size() * s.components; ++k) s.values.push_back(u(gen) * 1e-7);
  s.values[0] = std::numeric_limits<double>::denorm_min();
  s.values[1] = std::numeric_limits<double>::max();
  s.values[2] = -0.1;
  s.metadata.set("kernel", "levy-fbm");
  s.metadata.set("seed", "99");

  const auto back = roundtrip(s);
  CHECK(back.n_reps == s.n_reps);
  CHECK(back.components == s.components);
  CHECK(back.values == s.values);
  REQUIRE(back.points.size() == s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) CHECK(back.points[i] == s.points[i]);
  CHECK(back.metadata.require("kernel") == "levy-fbm");
  CHECK(back.metadata.require("seed") == "99");
}

TEST_CASE("sampler output round trips with its grid", "[field_io]") {
  const auto grid = LatticeGrid::integer({6, 5});
  const auto s = sample_stationary_lattice(CovarianceKernel::lattice_isotropic_lrd(0.7), grid, 3, 4);
  const auto back = roundtrip(s);
  CHECK(back.values == s.values);
  REQUIRE(back.grid.has_value());
  CHECK(back.grid->axes == grid.axes);
  const auto kernel = CovarianceKernel::from_metadata(back.metadata);
  CHECK(kernel.kind() == CovarianceKernel::Kind::lattice_isotropic_lrd);
}

TEST_CASE("grid axes encoding", "[field_io]") {
  const LatticeGrid g({{1, 2, 3}, {0.25, 0.5}});
  const auto back = decode_grid_axes(encode_grid_axes(g));
  CHECK(back.axes == g.axes);
}

TEST_CASE("malformed field files are rejected", "[field_io]") {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_field_sample(in);
  };
  CHECK_THROWS_AS(read("# kernel\nrep,c_1,v_1\n0,1,2\n"), ParameterError);
  CHECK_THROWS_AS(read("rep,c_1,v_1\n"), ParameterError);
  CHECK_THROWS_AS(read("rep,c_1,v_1\n0,1,2\n0,1\n"), ParameterError);
  CHECK_THROWS_AS(read("rep,c_1,v_1\n0,1,2\n2,1,3\n"), ParameterError);
  CHECK_NOTHROW(read("rep,c_1,v_1\n0,1,2\n1,1,3\n"));
}

TEST_CASE("atomic text writes", "[field_io]") {
  const auto dir = std::filesystem::temp_directory_path() / "lamperti_field_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "out.csv").string();
  write_text_atomically(path, "a\n");
  write_text_atomically(path, "b\n");
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "b");
  CHECK_THROWS_AS(write_text_atomically((dir / "missing" / "x.csv").string(), "c"), ParameterError);
  std::filesystem::remove_all(dir);
}
