#include "catch_amalgamated.hpp"

#include "lamperti/statcheck.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace lamperti;
using namespace lamperti::statcheck;
using fields::CovarianceKernel;
using fields::FieldSample;
using transform::CocycleSpec;
using transform::DiagonalGroupElement;
using transform::HurstMatrix;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const std::vector<Vec> six = {v2(0.5, 0.5), v2(1, 0.25), v2(1, 1), v2(2, 0.5), v2(0.3, 1.7), v2(1.5, 2)};

FieldSample deterministic(const std::vector<Vec>& pts, const std::vector<double>& v, std::size_t reps) {
  FieldSample s;
  s.points = pts;
  s.n_reps = reps;
  for (std::size_t r = 0; r < reps; ++r) s.values.insert(s.values.end(), v.begin(), v.end());
  return s;
}

}  // namespace

TEST_CASE("empirical covariance", "[statcheck]") {
  const auto det = deterministic({v2(1, 1), v2(2, 2)}, {2.0, -3.0}, 10);
  const auto ec = empirical_covariance(det);
  Mat outer(2, 2);
  outer << 4, -6, -6, 9;
  CHECK(ec.cov == outer);
  CHECK(ec.stderr_cov.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(empirical_covariance(deterministic({v2(1, 1)}, {1.0}, 1)), ParameterError);

  const auto wn = fields::sample_gaussian_field(CovarianceKernel::white_noise(2), {v2(1, 1), v2(1, 2), v2(2, 1)}, 100000, 8);
  const auto w = empirical_covariance(wn);
  CHECK(((w.cov - Mat::Identity(3, 3)).cwiseAbs().array() <= 3 * w.stderr_cov.array()).all());
}

TEST_CASE("Gaussian fdd comparison", "[statcheck]") {
  const auto levy05 = CovarianceKernel::levy_fbm(0.5);
  const auto levy07 = CovarianceKernel::levy_fbm(0.7);
  const auto s = fields::sample_gaussian_field(levy05, six, 10000, 3);
  const auto good = compare_gaussian_fdd(s, levy05, 3.0);
  CHECK(good.pass);
  CHECK(good.details.require("n_entries") == "21");
  const double expected = 21 * std::erfc(3.0 / std::numbers::sqrt2);
  CHECK(std::stod(good.details.require("expected_false_alarms")) == Catch::Approx(expected).epsilon(1e-6));

  // Both Grams first: the kernels differ by far more than the sampling error.
  const Mat g05 = fields::gram_matrix(levy05, six), g07 = fields::gram_matrix(levy07, six);
  CHECK((g05 - g07).cwiseAbs().maxCoeff() > 0.1);
  CHECK_FALSE(compare_gaussian_fdd(s, levy07, 3.0).pass);

  const auto zero = deterministic({v2(1, 1), v2(1, 2)}, {0.0, 0.0}, 100);
  CHECK_FALSE(compare_gaussian_fdd(zero, CovarianceKernel::white_noise(2), 3.0).pass);
}

TEST_CASE("fdd per-entry false-alarm rate", "[statcheck][calibration]") {
  const auto k = CovarianceKernel::levy_fbm(0.5);
  std::size_t exceed = 0, entries = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto s = fields::sample_gaussian_field(k, six, 2000, 1000 + seed);
    const auto r = compare_gaussian_fdd(s, k, 3.0);
    exceed += std::stoul(r.details.require("n_exceed"));
    entries += std::stoul(r.details.require("n_entries"));
  }
  const double rate = static_cast<double>(exceed) / static_cast<double>(entries);
  INFO("rate " << rate);
  CHECK(rate <= 0.01);
}

TEST_CASE("energy distance test", "[statcheck]") {
  const std::vector<Vec> pts = {v2(1, 1), v2(1, 2), v2(2, 1)};
  const auto wn = CovarianceKernel::white_noise(2);
  const auto a = fields::sample_gaussian_field(wn, pts, 1000, 1);
  auto b = fields::sample_gaussian_field(wn, pts, 1000, 2);
  for (auto& x : b.values) x *= 2.0;
  const auto rep = energy_distance_test(a, b, 199, 0.01, 5);
  CHECK_FALSE(rep.pass);
  CHECK(rep.p_value.value() <= 0.01);

  const auto det = deterministic(pts, {1.0, 2.0, 3.0}, 30);
  const auto same = energy_distance_test(det, det, 99, 0.01, 1);
  CHECK(same.p_value.value() == 1.0);
  CHECK(same.pass);

  const auto other = fields::sample_gaussian_field(wn, {v2(1, 1), v2(1, 2), v2(2, 2)}, 50, 3);
  CHECK_THROWS_AS(energy_distance_test(a, other, 99), ParameterError);
  CHECK_THROWS_AS(energy_distance_test(a, a, 50), ParameterError);
  CHECK(energy_statistic(det, det) == 0.0);
}

TEST_CASE("energy test type-I rate", "[statcheck][calibration]") {
  const std::vector<Vec> pts = {v2(1, 1), v2(2, 1)};
  const auto k = CovarianceKernel::levy_fbm(0.6);
  const double alpha = 0.1;
  int rejections = 0;
  const int runs = 60;
  for (int seed = 0; seed < runs; ++seed) {
    const auto a = fields::sample_gaussian_field(k, pts, 60, 10 * seed + 1);
    const auto b = fields::sample_gaussian_field(k, pts, 60, 10 * seed + 2);
    if (!energy_distance_test(a, b, 99, alpha, seed).pass) ++rejections;
  }
  INFO("rejections " << rejections);
  CHECK(rejections >= 1);
  CHECK(rejections <= 15);
}

TEST_CASE("self-similarity checks", "[statcheck]") {
  const auto sheet = CovarianceKernel::fbm_sheet(v2(0.5, 0.5));
  const CocycleSpec c(HurstMatrix::row(v2(0.5, 0.5)));
  const DiagonalGroupElement a(v2(4, 9));
  const auto rep = check_self_similarity(sheet.as_function(), a, c, six);
  CHECK(rep.pass);
  CHECK(rep.statistic <= 1e-12);
  CHECK(rep.details.require("c_a") == "6");

  const auto levy = CovarianceKernel::levy_fbm(0.5);
  const DiagonalGroupElement rr(v2(3, 3));
  CHECK(check_self_similarity(levy.as_function(), rr, CocycleSpec(HurstMatrix::row(v2(0.25, 0.25))), six).pass);
  const auto wrong = check_self_similarity(levy.as_function(), rr, CocycleSpec(HurstMatrix::row(v2(0.35, 0.35))), six);
  CHECK_FALSE(wrong.pass);

  const auto sampled = check_self_similarity_sampled(sheet, a, c, six, 400, 7);
  CHECK(sampled.pass);
  const auto sampled_wrong = check_self_similarity_sampled(sheet, a, CocycleSpec(HurstMatrix::row(v2(0.9, 0.9))), six, 400, 7);
  CHECK_FALSE(sampled_wrong.pass);
}

TEST_CASE("self-similarity passes are closed under composition", "[statcheck][property]") {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> la(-2.0, 2.0), hu(0.05, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec h = v2(hu(gen), hu(gen));
    const auto cov = CovarianceKernel::fbm_sheet(h).as_function();
    const CocycleSpec c(HurstMatrix::row(h));
    const DiagonalGroupElement a(v2(std::exp(la(gen)), std::exp(la(gen))));
    const DiagonalGroupElement b(v2(std::exp(la(gen)), std::exp(la(gen))));
    const bool pa = check_self_similarity(cov, a, c, six).pass;
    const bool pb = check_self_similarity(cov, b, c, six).pass;
    CHECK((pa && pb));
    CHECK(check_self_similarity(cov, a * b, c, six).pass);
  }
}

TEST_CASE("stationarity checks", "[statcheck]") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const auto polar = CovarianceKernel::polar_stationary(0.7).as_function();
  for (int k = 0; k < 20; ++k) CHECK(check_stationarity(polar, v2(u(gen), u(gen)), six).pass);

  const Vec h = v2(0.4, 0.8);
  const auto pushed = transform::pushforward_mss(CovarianceKernel::fbm_sheet(h).as_function(), h);
  CHECK(check_stationarity(pushed, v2(1.5, -0.7), six).pass);

  const auto levy = CovarianceKernel::levy_fbm(0.5);
  CHECK_FALSE(check_stationarity(levy.as_function(), v2(1, 0), six).pass);
  CHECK(check_stationarity_sampled(CovarianceKernel::polar_stationary(0.5), v2(1, 0.5), six, 400, 3).pass);
  CHECK_FALSE(check_stationarity_sampled(levy, v2(3, 0), six, 400, 3).pass);
}

TEST_CASE("proper and continuity surrogates", "[statcheck]") {
  CHECK(check_proper(Mat::Identity(3, 3)).pass);
  Mat rank_one = Mat::Ones(3, 3);
  CHECK_FALSE(check_proper(rank_one).pass);
  CHECK(check_proper(fields::gram_matrix(CovarianceKernel::levy_fbm(0.5), six)).pass);

  const std::vector<double> steps = {1e-1, 1e-2, 1e-3, 1e-4};
  const auto cont = check_ms_continuity(CovarianceKernel::levy_fbm(0.3).as_function(), six, steps);
  CHECK(cont.pass);
  CHECK(cont.statistic == Catch::Approx(0.6).margin(0.05));
  const fields::CovarianceFn jump = [](const Vec& t, const Vec& u) { return (t - u).norm() == 0.0 ? 1.0 : 0.0; };
  CHECK_FALSE(check_ms_continuity(jump, six, steps).pass);
}

TEST_CASE("reports are deterministic and serialize", "[statcheck]") {
  const auto sheet = CovarianceKernel::fbm_sheet(v2(0.5, 0.5));
  const CocycleSpec c(HurstMatrix::row(v2(0.5, 0.5)));
  const DiagonalGroupElement a(v2(2, 3));
  const auto r1 = check_self_similarity_sampled(sheet, a, c, six, 200, 11);
  const auto r2 = check_self_similarity_sampled(sheet, a, c, six, 200, 11);
  CHECK(r1.csv_line() == r2.csv_line());
  CHECK(r1.json_line() == r2.json_line());

  std::ostringstream csv, jsonl;
  write_reports_csv(csv, {r1, r2});
  write_reports_jsonl(jsonl, {r1});
  CHECK(csv.str().rfind(TestReport::csv_header(), 0) == 0);
  CHECK(csv.str().find(",n=6;first=(0.5 0.5);last=(1.5 2),") != std::string::npos);
  CHECK(jsonl.str().find("\"seed\":11") != std::string::npos);
  CHECK(describe_points(six) == "n=6;first=(0.5 0.5);last=(1.5 2)");
}
