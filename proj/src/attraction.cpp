#include "lamperti/attraction.hpp"

#include "lamperti/regvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace lamperti::attraction {

namespace {

void require_n(const std::vector<long>& n) {
  if (n.empty()) throw ParameterError("n must be nonempty");
  for (long v : n) {
    if (v < 1) throw ParameterError("n must be >= 1 componentwise");
  }
}

void require_t(const Vec& t, std::size_t d) {
  if (static_cast<std::size_t>(t.size()) != d) throw ParameterError("t has the wrong dimension");
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !std::isfinite(t[i])) throw DomainError("t must lie in the open positive orthant");
  }
}

// In-place inclusive prefix sums along every axis of a row-major array.
void prefix_sums(std::span<double> a, const std::vector<std::size_t>& shape) {
  std::size_t stride = 1;
  for (std::size_t axis = shape.size(); axis-- > 0;) {
    const std::size_t len = shape[axis];
    const std::size_t block = stride * len;
    for (std::size_t base = 0; base < a.size(); base += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        double* p = a.data() + base + inner;
        for (std::size_t k = 1; k < len; ++k) p[k * stride] += p[(k - 1) * stride];
      }
    }
    stride = block;
  }
}

// Flat index of the last cell of each box, or npos for an empty box.
std::vector<std::size_t> corner_offsets(const std::vector<std::size_t>& shape, const std::vector<long>& n,
                                        const std::vector<Vec>& t_grid) {
  constexpr auto npos = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> out;
  out.reserve(t_grid.size());
  for (const Vec& t : t_grid) {
    const auto c = box_corner(n, t);
    std::size_t offset = 0;
    bool empty = false;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (c[k] == 0) empty = true;
      if (static_cast<std::size_t>(c[k]) > shape[k]) {
        throw RangeError("lattice of extent " + std::to_string(shape[k]) + " on axis " + std::to_string(k) +
                         " cannot hold a box of side " + std::to_string(c[k]));
      }
      offset = offset * shape[k] + (c[k] == 0 ? 0 : static_cast<std::size_t>(c[k] - 1));
    }
    out.push_back(empty ? npos : offset);
  }
  return out;
}

void fill_row(std::span<double> field, const std::vector<std::size_t>& shape,
              const std::vector<std::size_t>& corners, Mat& out, std::size_t row) {
  prefix_sums(field, shape);
  for (std::size_t j = 0; j < corners.size(); ++j) {
    out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
        corners[j] == std::numeric_limits<std::size_t>::max() ? 0.0 : field[corners[j]];
  }
}

const fields::LatticeGrid& require_integer_lattice(const FieldSample& xi) {
  if (!xi.grid || !xi.grid->integer_from_one()) {
    throw DomainError("partial sums need a sample on the integer lattice 1..N per axis");
  }
  if (xi.components != 1) throw UnsupportedError("partial sums are implemented for scalar fields");
  return *xi.grid;
}

}  // namespace

LagCovariance lag_covariance(const fields::CovarianceKernel& kernel) {
  if (!kernel.stationary() || kernel.dimension() != 2) {
    throw DomainError("lag covariance needs a stationary kernel on the plane");
  }
  return [kernel](long k, long l) { return kernel.lag(k, l); };
}

void SumProcessConfig::validate() const {
  require_n(n);
  if (t_grid.empty()) throw ParameterError("t_grid must be nonempty");
  for (const Vec& t : t_grid) require_t(t, n.size());
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be positive");
}

RatioWindow::RatioWindow(double c, double big_c) : lower(c), upper(big_c) {
  if (!(c > 0.0) || !(c < big_c) || !std::isfinite(big_c)) {
    throw ParameterError("ratio window needs 0 < c < C < inf");
  }
}

std::vector<long> box_corner(const std::vector<long>& n, const Vec& t) {
  require_n(n);
  require_t(t, n.size());
  std::vector<long> c(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    c[i] = static_cast<long>(std::floor(static_cast<double>(n[i]) * t[static_cast<Eigen::Index>(i)]));
  }
  return c;
}

Mat partial_sum_field(const FieldSample& xi, const std::vector<long>& n, const std::vector<Vec>& t_grid) {
  const auto& grid = require_integer_lattice(xi);
  if (n.size() != grid.dimension()) throw ParameterError("n and the lattice differ in dimension");
  const auto shape = grid.shape();
  const auto corners = corner_offsets(shape, n, t_grid);

  Mat out(static_cast<Eigen::Index>(xi.n_reps), static_cast<Eigen::Index>(t_grid.size()));
  std::vector<double> work(xi.n_points());
  for (std::size_t r = 0; r < xi.n_reps; ++r) {
    const auto rep = xi.replicate(r);
    std::copy(rep.begin(), rep.end(), work.begin());
    fill_row(work, shape, corners, out, r);
  }
  return out;
}

Mat partial_sum_stream(const fields::LatticeSampler& sampler, std::uint64_t seed, std::size_t n_reps,
                       const std::vector<long>& n, const std::vector<Vec>& t_grid) {
  const auto& grid = sampler.grid();
  if (!grid.integer_from_one()) throw DomainError("partial sums need the integer lattice 1..N per axis");
  if (n.size() != grid.dimension()) throw ParameterError("n and the lattice differ in dimension");
  const auto shape = grid.shape();
  const auto corners = corner_offsets(shape, n, t_grid);

  Mat out(static_cast<Eigen::Index>(n_reps), static_cast<Eigen::Index>(t_grid.size()));
  std::vector<double> even(sampler.size()), odd(sampler.size());
  for (std::size_t pair = 0; 2 * pair < n_reps; ++pair) {
    sampler.draw_pair(seed, pair, even, odd);
    fill_row(even, shape, corners, out, 2 * pair);
    if (2 * pair + 1 < n_reps) fill_row(odd, shape, corners, out, 2 * pair + 1);
  }
  return out;
}

Mat normalized_sum(const Mat& sums, double f_n) {
  if (!(f_n > 0.0) || !std::isfinite(f_n)) throw ParameterError("normalization must be positive");
  return sums / f_n;
}

long scaled_extent(long n, double gamma) {
  if (n < 1) throw ParameterError("n must be >= 1");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  const double v = std::pow(static_cast<double>(n), gamma);
  return static_cast<long>(std::floor(v * (1.0 + 1e-12)));
}

Mat scale_transition_sum(const FieldSample& xi, long n, double gamma, const std::vector<Vec>& ts_grid) {
  if (xi.dimension() != 2) throw UnsupportedError("the scaling-transition sum is defined for d = 2 only");
  return partial_sum_field(xi, {n, scaled_extent(n, gamma)}, ts_grid);
}

double exact_sum_variance(const LagCovariance& r, long n, long m) {
  if (n < 1 || m < 1) throw ParameterError("block sides must be >= 1");
  std::vector<double> rows;
  rows.reserve(static_cast<std::size_t>(2 * n - 1));
  for (long k = -(n - 1); k <= n - 1; ++k) {
    CompensatedSum row;
    for (long l = -(m - 1); l <= m - 1; ++l) {
      row.add(static_cast<double>(m - std::labs(l)) * r(k, l));
    }
    rows.push_back(static_cast<double>(n - std::labs(k)) * row.value());
  }
  const double v = pairwise_sum(rows);
  if (!std::isfinite(v)) throw NumericError("block-sum variance overflowed");
  return v;
}

namespace {

// Sum_{|k|<n} (n-|k|) r(k) of a 1-D lattice covariance.
double weighted_lag_sum_1d(const fields::LatticeCov1d& r, long n) {
  CompensatedSum acc;
  acc.add(static_cast<double>(n) * r(0));
  for (long k = 1; k < n; ++k) acc.add(2.0 * static_cast<double>(n - k) * r(k));
  return acc.value();
}

}  // namespace

double exact_sum_variance(const fields::CovarianceKernel& kernel, long n, long m) {
  using Kind = fields::CovarianceKernel::Kind;
  if (n < 1 || m < 1) throw ParameterError("block sides must be >= 1");
  switch (kernel.kind()) {
    case Kind::white_noise:
      if (kernel.dimension() != 2) break;
      return static_cast<double>(n) * static_cast<double>(m);
    case Kind::lattice_separable: {
      const double v = weighted_lag_sum_1d(kernel.axis1(), n) * weighted_lag_sum_1d(kernel.axis2(), m);
      if (!std::isfinite(v)) throw NumericError("block-sum variance overflowed");
      return v;
    }
    case Kind::lattice_isotropic_lrd: {
      // r is even in each lag, so the sum folds onto the quadrant k, l >= 0.
      const double q = kernel.lrd_q();
      std::vector<double> rows;
      rows.reserve(static_cast<std::size_t>(n));
      for (long k = 0; k < n; ++k) {
        CompensatedSum row;
        const double k2 = static_cast<double>(k) * static_cast<double>(k);
        for (long l = 0; l < m; ++l) {
          const double w = (l == 0 ? 1.0 : 2.0) * static_cast<double>(m - l);
          row.add(w * std::pow(1.0 + k2 + static_cast<double>(l) * static_cast<double>(l), -0.5 * q));
        }
        rows.push_back((k == 0 ? 1.0 : 2.0) * static_cast<double>(n - k) * row.value());
      }
      const double v = pairwise_sum(rows);
      if (!std::isfinite(v)) throw NumericError("block-sum variance overflowed");
      return v;
    }
    default:
      break;
  }
  return exact_sum_variance(lag_covariance(kernel), n, m);
}

namespace {

using BlockVariance = std::function<double(long, long)>;

NormalizationFit fit_exponent(const BlockVariance& variance, double gamma, const std::vector<long>& n_list) {
  if (n_list.size() < 4) throw ParameterError("normalization fit needs at least four levels of n");
  NormalizationFit fit;
  std::vector<double> x, y;
  for (long n : n_list) {
    const long m = scaled_extent(n, gamma);
    if (m < 1) throw ParameterError("floor(n^gamma) is zero for n = " + std::to_string(n));
    const double v = variance(n, m);
    if (!(v > 0.0)) throw NumericError("non-positive block-sum variance at n = " + std::to_string(n));
    fit.n.push_back(n);
    fit.m.push_back(m);
    fit.variance.push_back(v);
    x.push_back(std::log(static_cast<double>(n)));
    y.push_back(std::log(v));
  }
  const LineFit line = fit_line(x, y);
  fit.h_hat = 0.5 * line.slope;
  fit.r_squared = line.r_squared;
  fit.stderr_h = 0.5 * line.slope_stderr;
  return fit;
}

}  // namespace

NormalizationFit fit_normalization_exponent(const LagCovariance& r, double gamma, const std::vector<long>& n_list) {
  return fit_exponent([&r](long n, long m) { return exact_sum_variance(r, n, m); }, gamma, n_list);
}

NormalizationFit fit_normalization_exponent(const fields::CovarianceKernel& kernel, double gamma,
                                            const std::vector<long>& n_list) {
  return fit_exponent([&kernel](long n, long m) { return exact_sum_variance(kernel, n, m); }, gamma, n_list);
}

bool check_ratio_condition(const std::vector<std::pair<long, long>>& pairs, const RatioWindow& window) {
  if (pairs.empty()) throw ParameterError("ratio condition needs at least one pair");
  return std::all_of(pairs.begin(), pairs.end(), [&](const auto& p) {
    const double ratio = static_cast<double>(p.second) / static_cast<double>(p.first);
    return ratio >= window.lower && ratio <= window.upper;
  });
}

BreakpointDiagnostic fit_breakpoint(const std::vector<double>& gammas, const std::vector<double>& h_hat) {
  const std::size_t k = gammas.size();
  if (k != h_hat.size()) throw ParameterError("gammas and h_hat differ in length");
  if (k < 4) throw ParameterError("breakpoint fit needs at least four gammas");
  if (!std::is_sorted(gammas.begin(), gammas.end())) throw ParameterError("gammas must be increasing");

  const Vec y = Eigen::Map<const Vec>(h_hat.data(), static_cast<Eigen::Index>(k));
  auto sse_of = [&](const Mat& design, Vec& coef) {
    coef = design.colPivHouseholderQr().solve(y);
    return (design * coef - y).squaredNorm();
  };

  BreakpointDiagnostic out;
  Mat lin(static_cast<Eigen::Index>(k), 2);
  for (std::size_t i = 0; i < k; ++i) lin.row(static_cast<Eigen::Index>(i)) << 1.0, gammas[i];
  Vec coef;
  out.sse_linear = sse_of(lin, coef);
  out.slope_left = out.slope_right = coef[1];
  out.gamma_break = gammas[k / 2];
  out.sse_broken = out.sse_linear;

  // Candidate breaks on a fine grid strictly inside the second..second-to-last gammas.
  const double lo = gammas[1];
  const double hi = gammas[k - 2];
  const int steps = 400;
  Mat hinge(static_cast<Eigen::Index>(k), 3);
  for (int s = 0; s <= steps; ++s) {
    const double b = lo + (hi - lo) * s / steps;
    for (std::size_t i = 0; i < k; ++i) {
      hinge.row(static_cast<Eigen::Index>(i)) << 1.0, gammas[i], std::max(gammas[i] - b, 0.0);
    }
    const double sse = sse_of(hinge, coef);
    if (sse < out.sse_broken) {
      out.sse_broken = sse;
      out.gamma_break = b;
      out.slope_left = coef[1];
      out.slope_right = coef[1] + coef[2];
    }
  }
  return out;
}

namespace {

ScaleTransitionCurve sweep(const std::function<NormalizationFit(double)>& fit, const std::vector<double>& gammas,
                           const std::vector<long>& n_list, const RatioWindow& window) {
  ScaleTransitionCurve curve;
  curve.gammas = gammas;
  std::vector<double> h;
  for (double g : gammas) {
    curve.fits.push_back(fit(g));
    std::vector<std::pair<long, long>> pairs;
    for (std::size_t i = 0; i < n_list.size(); ++i) pairs.emplace_back(curve.fits.back().n[i], curve.fits.back().m[i]);
    curve.ratio_ok.push_back(check_ratio_condition(pairs, window));
    h.push_back(curve.fits.back().h_hat);
  }
  if (gammas.size() >= 4) curve.breakpoint = fit_breakpoint(gammas, h);
  return curve;
}

}  // namespace

ScaleTransitionCurve scale_transition_sweep(const LagCovariance& r, const std::vector<double>& gammas,
                                            const std::vector<long>& n_list, const RatioWindow& window) {
  return sweep([&](double g) { return fit_normalization_exponent(r, g, n_list); }, gammas, n_list, window);
}

ScaleTransitionCurve scale_transition_sweep(const fields::CovarianceKernel& kernel, const std::vector<double>& gammas,
                                            const std::vector<long>& n_list, const RatioWindow& window) {
  return sweep([&](double g) { return fit_normalization_exponent(kernel, g, n_list); }, gammas, n_list, window);
}

FieldSample operator_scaled_sum(const FieldSample& y, const Mat& e, double r, const Mat& f_r,
                                const std::vector<Vec>& t_points) {
  const auto d = static_cast<Eigen::Index>(y.dimension());
  const auto m = static_cast<Eigen::Index>(y.components);
  if (e.rows() != d || e.cols() != d) throw ParameterError("E must be d x d");
  if (f_r.rows() != m || f_r.cols() != m) throw ParameterError("f_r must be m x m");
  if (!(r > 0.0)) throw ParameterError("r must be positive");
  const Mat re = regvar::matrix_power(e, r);

  std::vector<std::size_t> source;
  for (const Vec& t : t_points) {
    if (t.size() != d) throw ParameterError("t has the wrong dimension");
    const Vec img = re * t;
    const double tol = 1e-9 * std::max(1.0, img.norm());
    std::size_t hit = y.n_points();
    for (std::size_t p = 0; p < y.n_points(); ++p) {
      if ((y.points[p] - img).norm() <= tol) {
        hit = p;
        break;
      }
    }
    if (hit == y.n_points()) throw RangeError("r^E t is not a sampled point; no interpolation is performed");
    source.push_back(hit);
  }

  FieldSample out;
  out.points = t_points;
  out.n_reps = y.n_reps;
  out.components = y.components;
  out.values.resize(y.n_reps * t_points.size() * y.components);
  out.metadata = y.metadata;
  Vec v(m);
  for (std::size_t rep = 0; rep < y.n_reps; ++rep) {
    for (std::size_t j = 0; j < t_points.size(); ++j) {
      for (Eigen::Index c = 0; c < m; ++c) v[c] = y.at(rep, source[j], static_cast<std::size_t>(c));
      const Vec w = f_r * v;
      for (Eigen::Index c = 0; c < m; ++c) out.at(rep, j, static_cast<std::size_t>(c)) = w[c];
    }
  }
  out.metadata.set("operator_scaling_r", format_double(r));
  return out;
}

void write_experiment_csv(std::ostream& out, const fields::Metadata& metadata, const std::vector<ExperimentRow>& rows) {
  const auto experiment = metadata.get("experiment");
  out << "# experiment=" << (experiment ? *experiment : std::string("unnamed")) << '\n';
  for (const auto& [k, v] : metadata.entries()) {
    if (k != "experiment") out << "# " << k << '=' << v << '\n';
  }
  // Not-applicable cells (NaN) are left empty.
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  out << "n,gamma,t,s,statistic,value,stderr\n";
  for (const auto& row : rows) {
    out << row.n << ',' << cell(row.gamma) << ',' << cell(row.t) << ',' << cell(row.s) << ',' << row.statistic << ','
        << cell(row.value) << ',' << cell(row.stderr_value) << '\n';
  }
}

}  // namespace lamperti::attraction
