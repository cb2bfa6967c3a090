#include "catch_amalgamated.hpp"

#include "lamperti/attraction.hpp"
#include "lamperti/statcheck.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace lamperti;
using namespace lamperti::attraction;
using fields::CovarianceKernel;
using fields::LatticeCov1d;
using fields::LatticeGrid;
using Catch::Approx;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

FieldSample constant_field(std::size_t n1, std::size_t n2, double c) {
  const auto grid = LatticeGrid::integer({n1, n2});
  FieldSample s;
  s.points = grid.points();
  s.grid = grid;
  s.n_reps = 1;
  s.values.assign(s.points.size(), c);
  return s;
}

long double quadruple_sum(const LagCovariance& r, long n, long m) {
  long double v = 0.0L;
  for (long i = 1; i <= n; ++i) {
    for (long ip = 1; ip <= n; ++ip) {
      for (long j = 1; j <= m; ++j) {
        for (long jp = 1; jp <= m; ++jp) v += r(i - ip, j - jp);
      }
    }
  }
  return v;
}

// Mean-zero second moment of each column with its standard error.
std::pair<double, double> second_moment(const Mat& sums, Eigen::Index col) {
  const Eigen::ArrayXd sq = sums.col(col).array().square();
  const double mean = sq.mean();
  const double sd = std::sqrt((sq - mean).square().sum() / static_cast<double>(sq.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(sq.size()))};
}

}  // namespace

TEST_CASE("partial sums of a constant field", "[attraction]") {
  const auto one = constant_field(10, 10, 1.0);
  const Mat s = partial_sum_field(one, {10, 10}, {v2(1, 1), v2(0.05, 1), v2(0.5, 0.3), v2(0.01, 0.01)});
  CHECK(s(0, 0) == 100.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(s(0, 2) == 15.0);
  CHECK(s(0, 3) == 0.0);
  CHECK_THROWS_AS(partial_sum_field(one, {20, 10}, {v2(1, 1)}), RangeError);
  CHECK(normalized_sum(s, 1.0) == s);
  CHECK_THROWS_AS(normalized_sum(s, 0.0), ParameterError);

  const auto c = constant_field(40, 40, 2.5);
  const Mat z = scale_transition_sum(c, 6, 2.0, {v2(1, 1)});
  CHECK(z(0, 0) == 2.5 * 6 * 36);
  const Mat square = scale_transition_sum(c, 7, 1.0, {v2(1, 1), v2(0.5, 1)});
  CHECK(square == partial_sum_field(c, {7, 7}, {v2(1, 1), v2(0.5, 1)}));
}

TEST_CASE("scaled extents", "[attraction]") {
  CHECK(scaled_extent(10, 2.0) == 100);
  CHECK(scaled_extent(27, 1.0 / 3.0) == 3);
  CHECK(scaled_extent(1000, 2.0 / 3.0) == 100);
  CHECK(scaled_extent(16, 0.5) == 4);
  CHECK(box_corner({10, 20}, v2(0.35, 0.5)) == std::vector<long>{3, 10});
}

TEST_CASE("empty boxes sum to zero for every replicate", "[attraction][property]") {
  const auto grid = LatticeGrid::integer({12, 12});
  const auto xi = fields::sample_stationary_lattice(CovarianceKernel::lattice_isotropic_lrd(0.8), grid, 50, 3);
  const Mat s = partial_sum_field(xi, {12, 12}, {v2(0.05, 1), v2(1, 0.08), v2(0.01, 0.5)});
  CHECK(s.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("streamed partial sums match the materialized sample", "[attraction]") {
  const auto k = CovarianceKernel::lattice_separable(LatticeCov1d::geometric(0.4), LatticeCov1d::fgn(0.75));
  const auto grid = LatticeGrid::integer({16, 24});
  const std::vector<Vec> ts = {v2(1, 1), v2(0.5, 0.75), v2(0.25, 0.1)};
  const auto xi = fields::sample_stationary_lattice(k, grid, 7, 21);
  const fields::LatticeSampler sampler(k, grid);
  const Mat a = partial_sum_field(xi, {16, 24}, ts);
  const Mat b = partial_sum_stream(sampler, 21, 7, {16, 24}, ts);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("exact block-sum variance examples", "[attraction]") {
  const auto white = lag_covariance(CovarianceKernel::white_noise(2));
  CHECK(exact_sum_variance(white, 5, 5) == 25.0);
  const LagCovariance geo = [](long k, long l) { return l == 0 ? std::pow(2.0, -std::labs(k)) : 0.0; };
  CHECK(exact_sum_variance(geo, 2, 1) == 3.0);
  CHECK_THROWS_AS(exact_sum_variance(white, 0, 3), ParameterError);
}

TEST_CASE("exact block-sum variance equals the quadruple sum", "[attraction][property]") {
  std::mt19937_64 gen(4);
  // Dyadic lag values keep every partial sum exact, so both orders agree bit for bit.
  std::uniform_int_distribution<int> num(-8, 8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> table(15 * 15);
    for (auto& x : table) x = num(gen) / 16.0;
    const LagCovariance r = [&table](long k, long l) { return table[static_cast<std::size_t>((k + 7) * 15 + l + 7)]; };
    for (long n = 1; n <= 8; ++n) {
      for (long m = 1; m <= 8; ++m) CHECK(exact_sum_variance(r, n, m) == static_cast<double>(quadruple_sum(r, n, m)));
    }
  }
  std::uniform_real_distribution<double> u(0.05, 0.95), q(0.1, 1.9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sep_kernel = CovarianceKernel::lattice_separable(LatticeCov1d::geometric(u(gen)), LatticeCov1d::fgn(u(gen)));
    const auto iso_kernel = CovarianceKernel::lattice_isotropic_lrd(q(gen));
    const auto sep = lag_covariance(sep_kernel);
    const auto iso = lag_covariance(iso_kernel);
    for (long n = 1; n <= 8; ++n) {
      for (long m = 1; m <= 8; ++m) {
        const auto a = static_cast<double>(quadruple_sum(sep, n, m));
        const auto b = static_cast<double>(quadruple_sum(iso, n, m));
        CHECK(std::abs(exact_sum_variance(sep, n, m) - a) <= 1e-14 * std::abs(a));
        CHECK(std::abs(exact_sum_variance(iso, n, m) - b) <= 1e-14 * std::abs(b));
        CHECK(std::abs(exact_sum_variance(sep_kernel, n, m) - a) <= 1e-14 * std::abs(a));
        CHECK(std::abs(exact_sum_variance(iso_kernel, n, m) - b) <= 1e-14 * std::abs(b));
      }
    }
  }
}

TEST_CASE("separable block-sum variance factorizes", "[attraction][property]") {
  const auto r1 = LatticeCov1d::geometric(0.6);
  const auto r2 = LatticeCov1d::fgn(0.85);
  const auto sep = lag_covariance(CovarianceKernel::lattice_separable(r1, r2));
  auto v1d = [](const LatticeCov1d& r, long n) {
    long double v = 0.0L;
    for (long k = -(n - 1); k <= n - 1; ++k) v += static_cast<long double>(n - std::labs(k)) * r(k);
    return static_cast<double>(v);
  };
  for (long n : {1L, 3L, 17L, 64L}) {
    for (long m : {2L, 9L, 40L}) {
      CHECK(exact_sum_variance(sep, n, m) == Approx(v1d(r1, n) * v1d(r2, m)).epsilon(1e-13));
      CHECK(exact_sum_variance(CovarianceKernel::lattice_separable(r1, r2), n, m) ==
            Approx(v1d(r1, n) * v1d(r2, m)).epsilon(1e-13));
    }
  }
}

TEST_CASE("normalization exponents", "[attraction]") {
  const std::vector<long> ns = {16, 32, 64, 128, 256, 512};
  const auto white = lag_covariance(CovarianceKernel::white_noise(2));
  for (double gamma : {0.5, 1.0, 2.0}) {
    const auto fit = fit_normalization_exponent(CovarianceKernel::white_noise(2), gamma, ns);
    CHECK(std::abs(fit.h_hat - (1 + gamma) / 2) <= 0.02);
    for (std::size_t i = 0; i < ns.size(); ++i) CHECK(fit.variance[i] == static_cast<double>(ns[i] * fit.m[i]));
  }
  const double h1 = 0.8, h2 = 0.65;
  const auto sep = CovarianceKernel::lattice_separable(LatticeCov1d::fgn(h1), LatticeCov1d::fgn(h2));
  for (double gamma : {0.5, 1.0, 2.0}) {
    const auto fit = fit_normalization_exponent(sep, gamma, ns);
    const std::vector<long> small = {16, 32, 64, 128};
    CHECK(fit_normalization_exponent(sep, gamma, small).h_hat ==
          Approx(fit_normalization_exponent(lag_covariance(sep), gamma, small).h_hat).epsilon(1e-12));
    CHECK(std::abs(fit.h_hat - (h1 + gamma * h2)) <= 0.05);
    CHECK(fit.r_squared > 0.999);
  }
  CHECK_THROWS_AS(fit_normalization_exponent(white, 1.0, {16, 32, 64}), ParameterError);
  const LagCovariance degenerate = [](long k, long) { return k == 0 ? 1.0 : -0.5; };
  CHECK_THROWS_AS(fit_normalization_exponent(degenerate, 1.0, {16, 32, 64, 128}), NumericError);
}

TEST_CASE("ratio condition", "[attraction]") {
  std::vector<std::pair<long, long>> doubling, squares, gamma_one;
  for (long k = 1; k <= 50; ++k) {
    doubling.emplace_back(k, 2 * k);
    squares.emplace_back(k, k * k);
    gamma_one.emplace_back(k, scaled_extent(k, 1.0));
  }
  CHECK(check_ratio_condition(doubling, RatioWindow(1, 3)));
  CHECK(check_ratio_condition({squares.begin(), squares.begin() + 10}, RatioWindow(0.1, 10)));
  CHECK_FALSE(check_ratio_condition({squares.begin(), squares.begin() + 11}, RatioWindow(0.1, 10)));
  CHECK(check_ratio_condition(gamma_one, RatioWindow(0.5, 2)));
  CHECK_THROWS_AS(RatioWindow(2, 1), ParameterError);
  CHECK_THROWS_AS(RatioWindow(0, 1), ParameterError);
}

TEST_CASE("breakpoint fit recovers a hinge", "[attraction]") {
  std::vector<double> g, h;
  for (double x = 0.25; x <= 2.01; x += 0.25) {
    g.push_back(x);
    h.push_back(x < 1.0 ? 1.0 + x : 2.0 + 0.5 * (x - 1.0));
  }
  const auto b = fit_breakpoint(g, h);
  CHECK(b.gamma_break == Approx(1.0).margin(0.01));
  CHECK(b.slope_left == Approx(1.0).margin(0.02));
  CHECK(b.slope_right == Approx(0.5).margin(0.02));
  CHECK(b.sse_broken < b.sse_linear);
  CHECK_THROWS_AS(fit_breakpoint({0.5, 1, 2}, {1, 2, 3}), ParameterError);
}

TEST_CASE("scale-transition sweep", "[attraction]") {
  const auto iso = CovarianceKernel::lattice_isotropic_lrd(0.5);
  const std::vector<double> gammas = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
  const auto curve = scale_transition_sweep(iso, gammas, {16, 32, 64, 128, 256}, RatioWindow(0.1, 10));
  REQUIRE(curve.fits.size() == gammas.size());
  REQUIRE(curve.breakpoint.has_value());
  CHECK(curve.ratio_ok[2]);
  CHECK_FALSE(curve.ratio_ok[5]);
  for (const auto& f : curve.fits) CHECK(std::isfinite(f.h_hat));
  CHECK_FALSE(scale_transition_sweep(iso, {0.5, 1.0, 2.0}, {16, 32, 64, 128}, RatioWindow(0.1, 10)).breakpoint);
}

TEST_CASE("normalized iid sums have the Brownian-sheet variance", "[attraction]") {
  const auto grid = LatticeGrid::integer({16, 16});
  const fields::LatticeSampler sampler(CovarianceKernel::white_noise(2), grid);
  const Mat z = normalized_sum(partial_sum_stream(sampler, 5, 100000, {16, 16}, {v2(1, 1), v2(0.5, 0.5)}), 16.0);
  CHECK(std::abs(second_moment(z, 0).first - 1.0) <= 0.02);
  CHECK(std::abs(second_moment(z, 1).first - 0.25) <= 0.02 * 0.25);
}

TEST_CASE("Monte Carlo block-sum variances agree with the exact values", "[attraction]") {
  const auto grid = LatticeGrid::integer({64, 64});
  const std::vector<CovarianceKernel> kernels = {
      CovarianceKernel::white_noise(2), CovarianceKernel::lattice_isotropic_lrd(0.5),
      CovarianceKernel::lattice_isotropic_lrd(1.5),
      CovarianceKernel::lattice_separable(LatticeCov1d::geometric(0.5), LatticeCov1d::fgn(0.8))};
  const std::vector<Vec> ts = {v2(1, 1), v2(0.5, 0.25)};
  for (const auto& k : kernels) {
    const fields::LatticeSampler sampler(k, grid);
    const Mat s = partial_sum_stream(sampler, 99, 10000, {64, 64}, ts);
    const auto r = lag_covariance(k);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const auto corner = box_corner({64, 64}, ts[static_cast<std::size_t>(j)]);
      const double exact = exact_sum_variance(r, corner[0], corner[1]);
      const auto [v, se] = second_moment(s, j);
      INFO(k.metadata().require("kernel") << " t" << j << " exact " << exact << " mc " << v << " se " << se);
      CHECK(std::abs(v - exact) <= 3 * se);
    }
  }
}

TEST_CASE("operator-scaled sums", "[attraction]") {
  const std::vector<Vec> base = {v2(0.5, 0.5), v2(1, 0.25), v2(0.75, 1)};
  std::vector<Vec> pts = base;

  // Identity scaling leaves the sample unchanged.
  const auto y0 = fields::sample_gaussian_field(CovarianceKernel::levy_fbm(0.5), pts, 3, 1);
  const auto same = operator_scaled_sum(y0, Mat::Identity(2, 2), 1.0, Mat::Identity(1, 1), base);
  CHECK(same.values == y0.values);

  for (const auto& p : base) pts.push_back(4.0 * p);
  const auto levy = fields::sample_gaussian_field(CovarianceKernel::levy_fbm(0.5), pts, 20000, 2);
  const Mat f = Mat::Constant(1, 1, 0.5);
  const auto scaled = operator_scaled_sum(levy, Mat::Identity(2, 2), 4.0, f, base);
  const auto rep = statcheck::compare_gaussian_fdd(scaled, CovarianceKernel::levy_fbm(0.5), 3.0);
  CHECK(rep.pass);

  Mat e(2, 2);
  e << 1, 0, 0, 2;
  std::vector<Vec> sheet_pts = base;
  for (const auto& p : base) sheet_pts.push_back(v2(3.0 * p[0], 9.0 * p[1]));
  const auto sheet = CovarianceKernel::fbm_sheet(v2(0.5, 0.5));
  const auto ys = fields::sample_gaussian_field(sheet, sheet_pts, 20000, 3);
  const auto scaled_sheet = operator_scaled_sum(ys, e, 3.0, Mat::Constant(1, 1, std::pow(3.0, -1.5)), base);
  CHECK(statcheck::compare_gaussian_fdd(scaled_sheet, sheet, 3.0).pass);

  CHECK_THROWS_AS(operator_scaled_sum(y0, Mat::Identity(2, 2), 2.0, Mat::Identity(1, 1), base), RangeError);
}

TEST_CASE("experiment CSV layout", "[attraction]") {
  fields::Metadata md;
  md.set("model", "white");
  md.set("experiment", "scaletrans");
  std::ostringstream out;
  write_experiment_csv(out, md, {{"16", 1.0, 1.0, 1.0, "h_hat", 1.0, std::nan("")}});
  const std::string text = out.str();
  CHECK(text.rfind("# experiment=scaletrans\n", 0) == 0);
  CHECK(text.find("# model=white\n") != std::string::npos);
  CHECK(text.find("n,gamma,t,s,statistic,value,stderr\n") != std::string::npos);
  CHECK(text.find("16,1,1,1,h_hat,1,\n") != std::string::npos);
}
