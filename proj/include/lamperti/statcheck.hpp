#pragma once

// Statistical verification: empirical covariances with standard errors,
// Gaussian f.d.d. comparison against a kernel, the energy-distance
// permutation test, and the self-similarity / stationarity checkers.

#include "lamperti/fields.hpp"
#include "lamperti/transform.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lamperti::statcheck {

using fields::CovarianceFn;
using fields::CovarianceKernel;
using fields::FieldSample;

/// Outcome of one check. `pass` depends only on statistic and threshold;
/// the direction of the comparison is fixed per test (statistic <= threshold
/// for residual checks, p_value > threshold for permutation tests, slope >
/// threshold for the continuity surrogate).
struct TestReport {
  std::string test;
  double statistic = 0.0;
  double threshold = 0.0;
  std::optional<double> p_value;
  bool pass = false;
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  std::string points;
  fields::Metadata details;

  static std::string csv_header();
  std::string csv_line() const;
  std::string json_line() const;
};

/// "n=K;first=(..);last=(..)" summary of a point set.
std::string describe_points(const std::vector<Vec>& points);

/// Raw second moments (the models are mean zero), indexed by
/// point * components + component, and the standard error of each entry
/// from the replicate variance of the products.
struct EmpiricalCovariance {
  Mat cov;
  Mat stderr_cov;
  std::size_t n_reps = 0;
};
EmpiricalCovariance empirical_covariance(const FieldSample& sample);

/// Passes iff |empirical - gram| <= k_sigma * SE for every entry on and above
/// the diagonal (plus a 1e-12 relative floor). Details carry the number of
/// entries, exceedances, and the expected false-alarm count
/// n_entries * erfc(k_sigma / sqrt 2).
TestReport compare_gaussian_fdd(const FieldSample& sample, const Mat& gram, double k_sigma = 3.0);
TestReport compare_gaussian_fdd(const FieldSample& sample, const CovarianceFn& cov, double k_sigma = 3.0);
TestReport compare_gaussian_fdd(const FieldSample& sample, const CovarianceKernel& kernel, double k_sigma = 3.0);

/// Two-sample energy statistic between replicates of a and b (each
/// replicate is one vector in R^{points * components}).
double energy_statistic(const FieldSample& a, const FieldSample& b);

/// Permutation p-value (1 + #{E_perm >= E_obs}) / (n_perm + 1); passes iff
/// p > alpha. Permutations are drawn from seeded substreams.
TestReport energy_distance_test(const FieldSample& a, const FieldSample& b, std::size_t n_perm = 999,
                                double alpha = 0.01, std::uint64_t seed = 0);

/// Kernel-exact check of K(a t, a u) = C(a)^2 K(t, u) on all point pairs,
/// relative to the largest |K(a t, a u)|.
TestReport check_self_similarity(const CovarianceFn& cov, const transform::DiagonalGroupElement& a,
                                 const transform::CocycleSpec& c, const std::vector<Vec>& points,
                                 double tol = 1e-12);
/// Sampling path: draws X(a t) and C(a) X(t) independently and runs the
/// energy test between them.
TestReport check_self_similarity_sampled(const CovarianceKernel& kernel, const transform::DiagonalGroupElement& a,
                                         const transform::CocycleSpec& c, const std::vector<Vec>& points,
                                         std::size_t n_reps, std::uint64_t seed, std::size_t n_perm = 199,
                                         double alpha = 0.01);

/// Kernel-exact check of K(t + h, u + h) = K(t, u).
TestReport check_stationarity(const CovarianceFn& cov, const Vec& h, const std::vector<Vec>& points,
                              double tol = 1e-12);
TestReport check_stationarity_sampled(const CovarianceKernel& kernel, const Vec& h, const std::vector<Vec>& points,
                                      std::size_t n_reps, std::uint64_t seed, std::size_t n_perm = 199,
                                      double alpha = 0.01);

/// Proper (full) marginal surrogate: smallest eigenvalue >= rel_floor * largest.
TestReport check_proper(const Mat& cov, double rel_floor = 1e-8);

/// Stochastic-continuity surrogate. For each point and coordinate direction
/// the mean-square increment K(t+de,t+de) - 2K(t+de,t) + K(t,t) is computed
/// over the step sizes; the statistic is the smallest fitted log-log slope and
/// the check passes when it exceeds min_slope (increments vanish as a power of
/// the step). Finite grids cannot verify continuity; this only flags kernels
/// whose increments do not shrink.
TestReport check_ms_continuity(const CovarianceFn& cov, const std::vector<Vec>& points,
                               const std::vector<double>& steps, double min_slope = 0.01);

void write_reports_csv(std::ostream& out, const std::vector<TestReport>& reports);
void write_reports_jsonl(std::ostream& out, const std::vector<TestReport>& reports);

}  // namespace lamperti::statcheck
