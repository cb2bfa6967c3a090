#pragma once

// Partial-sum processes of stationary lattice fields, exact block-sum
// variances, normalization-exponent fits, and the scaling-transition sweep.
// No centering is applied anywhere; subtract the mean beforehand if needed.

#include "lamperti/fields.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace lamperti::attraction {

using fields::FieldSample;
using LagCovariance = std::function<double(long, long)>;

/// Lag function r(k, l) of a 2-D stationary kernel.
LagCovariance lag_covariance(const fields::CovarianceKernel& kernel);

/// Lattice sizes n, evaluation points t, and the aspect exponent gamma used by
/// the d = 2 scaling-transition mode.
struct SumProcessConfig {
  std::vector<long> n;
  std::vector<Vec> t_grid;
  double gamma = 1.0;

  void validate() const;
};

/// 0 < c < C < inf.
struct RatioWindow {
  double lower;
  double upper;
  RatioWindow(double c, double big_c);
};

/// ([n_1 t_1], ..., [n_d t_d]).
std::vector<long> box_corner(const std::vector<long>& n, const Vec& t);

/// S_{[n.t]}: sum of xi over the box 1..[n_i t_i] for every replicate (rows)
/// and every t (columns). Empty boxes give exactly 0. The sample must live on
/// an integer lattice starting at 1 (RangeError if it is too small).
Mat partial_sum_field(const FieldSample& xi, const std::vector<long>& n, const std::vector<Vec>& t_grid);

/// Same statistic computed replicate by replicate from a sampler, without
/// materializing the field sample. Replicate r is the one sample_stationary_lattice
/// would produce for the same seed.
Mat partial_sum_stream(const fields::LatticeSampler& sampler, std::uint64_t seed, std::size_t n_reps,
                       const std::vector<long>& n, const std::vector<Vec>& t_grid);

/// Componentwise division by f(n) > 0.
Mat normalized_sum(const Mat& sums, double f_n);

/// floor(n^gamma), guarded against pow() rounding just below an integer.
long scaled_extent(long n, double gamma);

/// Z_{n,gamma}(t, s) = S_{n, floor(n^gamma)}(t, s); ts_grid holds (t, s) pairs.
Mat scale_transition_sum(const FieldSample& xi, long n, double gamma, const std::vector<Vec>& ts_grid);

/// Var of the n x m block sum, via the weighted-lag identity
/// sum_{|k|<n} sum_{|l|<m} (n-|k|)(m-|l|) r(k, l) with compensated row sums
/// combined pairwise.
double exact_sum_variance(const LagCovariance& r, long n, long m);
/// Same variance using the kernel's structure: n m for white noise, a product
/// of 1-D weighted sums for separable kernels, and a quadrant fold for the
/// isotropic kernel.
double exact_sum_variance(const fields::CovarianceKernel& kernel, long n, long m);

struct NormalizationFit {
  double h_hat = 0.0;
  double r_squared = 0.0;
  double stderr_h = 0.0;
  std::vector<long> n;
  std::vector<long> m;
  std::vector<double> variance;
};

/// h_hat = slope(ln Var Z_{n,gamma}(1,1) vs ln n) / 2 over n_list (>= 4 levels).
NormalizationFit fit_normalization_exponent(const LagCovariance& r, double gamma, const std::vector<long>& n_list);
NormalizationFit fit_normalization_exponent(const fields::CovarianceKernel& kernel, double gamma,
                                            const std::vector<long>& n_list);

/// c <= m/n <= C for every pair.
bool check_ratio_condition(const std::vector<std::pair<long, long>>& pairs, const RatioWindow& window);

/// One-break continuous piecewise-linear fit of h_hat against gamma.
struct BreakpointDiagnostic {
  double gamma_break = 0.0;
  double slope_left = 0.0;
  double slope_right = 0.0;
  double sse_linear = 0.0;
  double sse_broken = 0.0;
};
BreakpointDiagnostic fit_breakpoint(const std::vector<double>& gammas, const std::vector<double>& h_hat);

struct ScaleTransitionCurve {
  std::vector<double> gammas;
  std::vector<NormalizationFit> fits;
  std::vector<bool> ratio_ok;
  std::optional<BreakpointDiagnostic> breakpoint;
};

/// Fits h_hat(gamma) for each gamma, flags schedules (n, floor(n^gamma)) that
/// leave the ratio window, and adds a breakpoint diagnostic when there are
/// at least four gammas.
ScaleTransitionCurve scale_transition_sweep(const LagCovariance& r, const std::vector<double>& gammas,
                                            const std::vector<long>& n_list, const RatioWindow& window);
ScaleTransitionCurve scale_transition_sweep(const fields::CovarianceKernel& kernel, const std::vector<double>& gammas,
                                            const std::vector<long>& n_list, const RatioWindow& window);

/// Values f_r Y(r^E t) at each requested t. Every image r^E t must coincide
/// with a sampled point (relative tolerance 1e-9); no interpolation is done.
FieldSample operator_scaled_sum(const FieldSample& y, const Mat& e, double r, const Mat& f_r,
                                const std::vector<Vec>& t_points);

struct ExperimentRow {
  std::string n;
  double gamma = 0.0;
  double t = 0.0;
  double s = 0.0;
  std::string statistic;
  double value = 0.0;
  double stderr_value = 0.0;
};

/// `# key=value` metadata (experiment=... first) then
/// n,gamma,t,s,statistic,value,stderr rows.
void write_experiment_csv(std::ostream& out, const fields::Metadata& metadata, const std::vector<ExperimentRow>& rows);

}  // namespace lamperti::attraction
