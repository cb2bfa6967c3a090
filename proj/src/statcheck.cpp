#include "lamperti/statcheck.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace lamperti::statcheck {

namespace {

std::string point_text(const Vec& p) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i) s += ' ';
    s += format_double(p[i]);
  }
  return s + ")";
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string q = "\"";
  for (char c : field) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::vector<double> replicate_vector(const FieldSample& s, std::size_t r) {
  const auto rep = s.replicate(r);
  return {rep.begin(), rep.end()};
}

void require_same_layout(const FieldSample& a, const FieldSample& b) {
  if (a.n_points() != b.n_points() || a.components != b.components) {
    throw ParameterError("samples have mismatched point sets");
  }
  for (std::size_t p = 0; p < a.n_points(); ++p) {
    if (a.points[p].size() != b.points[p].size() || a.points[p] != b.points[p]) {
      throw ParameterError("samples have mismatched point sets");
    }
  }
}

// Pooled pairwise Euclidean distances between replicate vectors.
std::vector<double> pooled_distances(const FieldSample& a, const FieldSample& b) {
  const std::size_t na = a.n_reps, nb = b.n_reps, n = na + nb;
  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  for (std::size_t r = 0; r < na; ++r) rows.push_back(replicate_vector(a, r));
  for (std::size_t r = 0; r < nb; ++r) rows.push_back(replicate_vector(b, r));
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        const double diff = rows[i][k] - rows[j][k];
        acc += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = std::sqrt(acc);
    }
  }
  return d;
}

double within_sum(const std::vector<double>& d, std::size_t n, std::span<const std::size_t> idx) {
  double s = 0.0;
  for (std::size_t i : idx) {
    const double* row = d.data() + i * n;
    for (std::size_t j : idx) s += row[j];
  }
  return s;
}

// Scaled energy statistic n_a n_b / (n_a + n_b) * (2 E|A-B| - E|A-A'| - E|B-B'|).
double energy_from_labels(const std::vector<double>& d, std::size_t n, double total,
                          std::span<const std::size_t> first, std::span<const std::size_t> second) {
  const double na = static_cast<double>(first.size());
  const double nb = static_cast<double>(second.size());
  const double saa = within_sum(d, n, first);
  const double sbb = within_sum(d, n, second);
  const double sab = 0.5 * (total - saa - sbb);
  const double e = 2.0 * sab / (na * nb) - saa / (na * na) - sbb / (nb * nb);
  return na * nb / (na + nb) * e;
}

TestReport kernel_residual_report(std::string name, double residual, double tol, const std::vector<Vec>& points) {
  TestReport rep;
  rep.test = std::move(name);
  rep.statistic = residual;
  rep.threshold = tol;
  rep.pass = residual <= tol;
  rep.points = describe_points(points);
  rep.details.set("mode", "kernel");
  return rep;
}

// Permutations and the second sample of a two-sample check draw from index
// ranges that replicate streams never reach.
constexpr std::uint64_t permutation_stream = std::uint64_t{1} << 62;

std::uint64_t second_sample_seed(std::uint64_t seed) { return substream(seed, std::uint64_t{1} << 63)(); }

FieldSample relabel(FieldSample s, const std::vector<Vec>& points) {
  s.points = points;
  s.grid.reset();
  return s;
}

}  // namespace

std::string TestReport::csv_header() { return "test,statistic,threshold,p_value,pass,n_reps,seed,points,details"; }

std::string TestReport::csv_line() const {
  std::string details_text;
  for (const auto& [k, v] : details.entries()) {
    if (!details_text.empty()) details_text += ';';
    details_text += k + '=' + v;
  }
  return test + ',' + format_double(statistic) + ',' + format_double(threshold) + ',' +
         (p_value ? format_double(*p_value) : std::string()) + ',' + (pass ? "true" : "false") + ',' +
         std::to_string(n_reps) + ',' + std::to_string(seed) + ',' + csv_quote(points) + ',' +
         csv_quote(details_text);
}

std::string TestReport::json_line() const {
  nlohmann::ordered_json j;
  j["test"] = test;
  j["statistic"] = statistic;
  j["threshold"] = threshold;
  j["p_value"] = p_value ? nlohmann::ordered_json(*p_value) : nlohmann::ordered_json(nullptr);
  j["pass"] = pass;
  j["n_reps"] = n_reps;
  j["seed"] = seed;
  j["points"] = points;
  auto& d = j["details"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : details.entries()) d[k] = v;
  return j.dump();
}

std::string describe_points(const std::vector<Vec>& points) {
  std::string s = "n=" + std::to_string(points.size());
  if (!points.empty()) s += ";first=" + point_text(points.front()) + ";last=" + point_text(points.back());
  return s;
}

EmpiricalCovariance empirical_covariance(const FieldSample& sample) {
  sample.validate();
  if (sample.n_reps < 2) throw ParameterError("empirical covariance needs at least two replicates");
  const auto p = static_cast<Eigen::Index>(sample.n_points() * sample.components);
  const auto n = static_cast<Eigen::Index>(sample.n_reps);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      sample.values.data(), n, p);

  EmpiricalCovariance out;
  out.n_reps = sample.n_reps;
  out.cov = (x.transpose() * x) / static_cast<double>(n);
  out.stderr_cov.resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      const double mean = out.cov(i, j);
      double ss = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const double dev = x(r, i) * x(r, j) - mean;
        ss += dev * dev;
      }
      const double se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
      out.stderr_cov(i, j) = out.stderr_cov(j, i) = se;
    }
  }
  return out;
}

TestReport compare_gaussian_fdd(const FieldSample& sample, const Mat& gram, double k_sigma) {
  if (!(k_sigma > 0.0)) throw ParameterError("k_sigma must be positive");
  const EmpiricalCovariance emp = empirical_covariance(sample);
  if (gram.rows() != emp.cov.rows() || gram.cols() != emp.cov.cols()) {
    throw ParameterError("Gram matrix does not match the sample's point set");
  }
  const double floor = 1e-12 * std::max(gram.cwiseAbs().maxCoeff(), 1e-300);
  double max_z = 0.0;
  std::size_t entries = 0, exceed = 0;
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    for (Eigen::Index j = i; j < gram.cols(); ++j) {
      ++entries;
      const double excess = std::max(std::abs(emp.cov(i, j) - gram(i, j)) - floor, 0.0);
      const double se = emp.stderr_cov(i, j);
      double z = 0.0;
      if (excess > 0.0) z = se > 0.0 ? excess / se : std::numeric_limits<double>::infinity();
      if (z > k_sigma) ++exceed;
      max_z = std::max(max_z, z);
    }
  }
  TestReport rep;
  rep.test = "gaussian-fdd";
  rep.statistic = max_z;
  rep.threshold = k_sigma;
  rep.pass = max_z <= k_sigma;
  rep.n_reps = sample.n_reps;
  if (auto s = sample.metadata.get("seed")) rep.seed = std::stoull(*s);
  rep.points = describe_points(sample.points);
  rep.details.set("n_entries", std::to_string(entries));
  rep.details.set("n_exceed", std::to_string(exceed));
  rep.details.set("expected_false_alarms",
                  format_double(static_cast<double>(entries) * std::erfc(k_sigma / std::sqrt(2.0))));
  return rep;
}

TestReport compare_gaussian_fdd(const FieldSample& sample, const CovarianceFn& cov, double k_sigma) {
  if (sample.components != 1) throw UnsupportedError("kernel comparison is implemented for scalar fields");
  return compare_gaussian_fdd(sample, fields::gram_matrix(cov, sample.points), k_sigma);
}

TestReport compare_gaussian_fdd(const FieldSample& sample, const CovarianceKernel& kernel, double k_sigma) {
  if (sample.components != 1) throw UnsupportedError("kernel comparison is implemented for scalar fields");
  TestReport rep = compare_gaussian_fdd(sample, fields::gram_matrix(kernel, sample.points), k_sigma);
  rep.details.merge(kernel.metadata());
  return rep;
}

double energy_statistic(const FieldSample& a, const FieldSample& b) {
  require_same_layout(a, b);
  if (a.n_reps == 0 || b.n_reps == 0) throw ParameterError("energy statistic needs replicates on both sides");
  const std::size_t n = a.n_reps + b.n_reps;
  const auto d = pooled_distances(a, b);
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return energy_from_labels(d, n, total, std::span(idx).first(a.n_reps), std::span(idx).subspan(a.n_reps));
}

TestReport energy_distance_test(const FieldSample& a, const FieldSample& b, std::size_t n_perm, double alpha,
                                std::uint64_t seed) {
  require_same_layout(a, b);
  if (n_perm < 99) throw ParameterError("energy test needs at least 99 permutations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (a.n_reps < 2 || b.n_reps < 2) throw ParameterError("energy test needs at least two replicates per side");

  const std::size_t n = a.n_reps + b.n_reps;
  const auto d = pooled_distances(a, b);
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const double observed =
      energy_from_labels(d, n, total, std::span(idx).first(a.n_reps), std::span(idx).subspan(a.n_reps));
  // Ties in exact arithmetic can differ by rounding between label orders.
  const double tie = 1e-12 * std::max(std::abs(observed), total / static_cast<double>(n * n));

  std::size_t at_least = 0;
  std::vector<std::size_t> perm(n);
  for (std::size_t k = 0; k < n_perm; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    auto gen = substream(seed, permutation_stream + k);
    std::shuffle(perm.begin(), perm.end(), gen);
    const double e =
        energy_from_labels(d, n, total, std::span(perm).first(a.n_reps), std::span(perm).subspan(a.n_reps));
    if (e >= observed - tie) ++at_least;
  }
  TestReport rep;
  rep.test = "energy-distance";
  rep.statistic = observed;
  rep.threshold = alpha;
  rep.p_value = static_cast<double>(1 + at_least) / static_cast<double>(n_perm + 1);
  rep.pass = *rep.p_value > alpha;
  rep.n_reps = std::min(a.n_reps, b.n_reps);
  rep.seed = seed;
  rep.points = describe_points(a.points);
  rep.details.set("n_perm", std::to_string(n_perm));
  rep.details.set("n_a", std::to_string(a.n_reps));
  rep.details.set("n_b", std::to_string(b.n_reps));
  return rep;
}

TestReport check_self_similarity(const CovarianceFn& cov, const transform::DiagonalGroupElement& a,
                                 const transform::CocycleSpec& c, const std::vector<Vec>& points, double tol) {
  const Vec ca = c(a);
  if (ca.size() != 1) throw UnsupportedError("kernel self-similarity checks scalar fields (one Hurst row)");
  if (static_cast<std::size_t>(a.a.size()) != c.hurst().dimension()) {
    throw ParameterError("group element and Hurst matrix differ in dimension");
  }
  const double c2 = ca[0] * ca[0];
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i; j < points.size(); ++j) {
      const double lhs = cov(a.act(points[i]), a.act(points[j]));
      const double rhs = c2 * cov(points[i], points[j]);
      worst = std::max(worst, std::abs(lhs - rhs));
      scale = std::max({scale, std::abs(lhs), std::abs(rhs)});
    }
  }
  TestReport rep = kernel_residual_report("self-similar", scale > 0.0 ? worst / scale : worst, tol, points);
  rep.details.set("claimed_hurst", c.hurst().to_string());
  rep.details.set("c_a", format_double(ca[0]));
  return rep;
}

TestReport check_self_similarity_sampled(const CovarianceKernel& kernel, const transform::DiagonalGroupElement& a,
                                         const transform::CocycleSpec& c, const std::vector<Vec>& points,
                                         std::size_t n_reps, std::uint64_t seed, std::size_t n_perm, double alpha) {
  const Vec ca = c(a);
  if (ca.size() != 1) throw UnsupportedError("self-similarity sampling checks scalar fields (one Hurst row)");
  std::vector<Vec> scaled;
  for (const Vec& p : points) scaled.push_back(a.act(p));
  FieldSample lhs = relabel(fields::sample_gaussian_field(kernel, scaled, n_reps, seed), points);
  FieldSample rhs = fields::sample_gaussian_field(kernel, points, n_reps, second_sample_seed(seed));
  for (double& v : rhs.values) v *= ca[0];
  TestReport rep = energy_distance_test(lhs, rhs, n_perm, alpha, seed);
  rep.test = "self-similar";
  rep.details.set("mode", "sample");
  rep.details.set("claimed_hurst", c.hurst().to_string());
  return rep;
}

TestReport check_stationarity(const CovarianceFn& cov, const Vec& h, const std::vector<Vec>& points, double tol) {
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != h.size()) throw ParameterError("shift and points differ in dimension");
    for (std::size_t j = i; j < points.size(); ++j) {
      const double lhs = cov(points[i] + h, points[j] + h);
      const double rhs = cov(points[i], points[j]);
      worst = std::max(worst, std::abs(lhs - rhs));
      scale = std::max({scale, std::abs(lhs), std::abs(rhs)});
    }
  }
  TestReport rep = kernel_residual_report("stationary", scale > 0.0 ? worst / scale : worst, tol, points);
  rep.details.set("shift", point_text(h));
  return rep;
}

TestReport check_stationarity_sampled(const CovarianceKernel& kernel, const Vec& h, const std::vector<Vec>& points,
                                      std::size_t n_reps, std::uint64_t seed, std::size_t n_perm, double alpha) {
  std::vector<Vec> shifted;
  for (const Vec& p : points) shifted.push_back(p + h);
  FieldSample lhs = relabel(fields::sample_gaussian_field(kernel, shifted, n_reps, seed), points);
  FieldSample rhs = fields::sample_gaussian_field(kernel, points, n_reps, second_sample_seed(seed));
  TestReport rep = energy_distance_test(lhs, rhs, n_perm, alpha, seed);
  rep.test = "stationary";
  rep.details.set("mode", "sample");
  rep.details.set("shift", point_text(h));
  return rep;
}

TestReport check_proper(const Mat& cov, double rel_floor) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) throw ParameterError("covariance must be a nonempty square matrix");
  const Eigen::SelfAdjointEigenSolver<Mat> eig(cov, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  TestReport rep;
  rep.test = "proper";
  // Reported as -lambda_min / lambda_max so that smaller is better.
  rep.statistic = lmax > 0.0 ? -lmin / lmax : std::numeric_limits<double>::infinity();
  rep.threshold = -rel_floor;
  rep.pass = lmax > 0.0 && rep.statistic <= rep.threshold;
  rep.details.set("lambda_min", format_double(lmin));
  rep.details.set("lambda_max", format_double(lmax));
  rep.details.set("note", "numerical surrogate for a full marginal");
  return rep;
}

TestReport check_ms_continuity(const CovarianceFn& cov, const std::vector<Vec>& points,
                               const std::vector<double>& steps, double min_slope) {
  if (steps.size() < 2) throw ParameterError("continuity surrogate needs at least two step sizes");
  for (double s : steps) {
    if (!(s > 0.0)) throw ParameterError("step sizes must be positive");
  }
  std::vector<double> log_step;
  for (double s : steps) log_step.push_back(std::log(s));

  double worst = std::numeric_limits<double>::infinity();
  for (const Vec& t : points) {
    const double ktt = cov(t, t);
    for (Eigen::Index axis = 0; axis < t.size(); ++axis) {
      std::vector<double> log_inc;
      bool all_zero = true;
      for (double s : steps) {
        Vec u = t;
        u[axis] += s;
        const double inc = cov(u, u) - 2.0 * cov(u, t) + ktt;
        if (inc > 1e-300) all_zero = false;
        log_inc.push_back(std::log(std::max(inc, 1e-300)));
      }
      if (all_zero) continue;
      worst = std::min(worst, fit_line(log_step, log_inc).slope);
    }
  }
  TestReport rep;
  rep.test = "ms-continuity";
  rep.statistic = worst;
  rep.threshold = min_slope;
  rep.pass = worst > min_slope;
  rep.points = describe_points(points);
  rep.details.set("note", "finite-difference surrogate only");
  return rep;
}

void write_reports_csv(std::ostream& out, const std::vector<TestReport>& reports) {
  out << TestReport::csv_header() << '\n';
  for (const auto& r : reports) out << r.csv_line() << '\n';
}

void write_reports_jsonl(std::ostream& out, const std::vector<TestReport>& reports) {
  for (const auto& r : reports) out << r.json_line() << '\n';
}

}  // namespace lamperti::statcheck
