#pragma once

// Multivariate regular variation on the positive orthant: coordinate-wise and
// radial calculi, their slowly varying parts, and operator-valued regular
// variation r -> r^D L(r).

#include "lamperti/common.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace lamperti::regvar {

using PositiveFn = std::function<double(const Vec&)>;
using MatrixFn = std::function<Mat(double)>;

/// Throws ParameterError unless every entry is finite (and >= 0 when
/// `require_nonnegative`).
void validate_exponents(const Vec& h, bool require_nonnegative = true);

/// Univariate slowly varying function from a closed family:
///   constant:      l(x) = c
///   log:           l(x) = ln(offset + x)^power,   offset >= 1
///   iterated_log:  l(x) = ln(ln(offset + x)),     offset >= e
class UnivariateSvf {
 public:
  enum class Kind { constant, log, iterated_log };

  static UnivariateSvf constant(double c);
  static UnivariateSvf log(double offset = 2.718281828459045, double power = 1.0);
  static UnivariateSvf iterated_log(double offset = 15.154262241479262);

  double operator()(double x) const;

  Kind kind() const { return kind_; }
  double offset() const { return offset_; }
  double power() const { return power_; }
  double constant_value() const { return offset_; }

 private:
  UnivariateSvf(Kind kind, double offset, double power) : kind_(kind), offset_(offset), power_(power) {}
  Kind kind_;
  double offset_;
  double power_;
};

/// Function on the unit sphere of the orthant, normalized to 1 at the
/// reference direction e = (d^{-1/2}, ..., d^{-1/2}).
///   one:               1
///   power_sum:         (sum_i a_i / sqrt(d))^p
///   weighted_product:  prod_i (sqrt(d) a_i)^{w_i}
struct SphereFunction {
  enum class Kind { one, power_sum, weighted_product };
  Kind kind = Kind::one;
  double power = 0.0;
  Vec weights;

  double operator()(const Vec& direction) const;
};

/// K(x) = exp(eta(x) + int_a^{|x|} eps(u)/u du) with the tagged forms
/// eta(x) = eta_limit + eta_coeff * exp(-|x|) and eps(u) = eps_coeff * exp(-u).
/// The integral is eps_coeff * (E1(a) - E1(|x|)).
class JakymivSvf {
 public:
  JakymivSvf() = default;
  JakymivSvf(double eta_limit, double eta_coeff, double eps_coeff, double a);

  double operator()(const Vec& x) const { return at_radius(x.norm()); }
  double at_radius(double r) const;
  /// lim_{r -> inf} K.
  double limit() const;

  double eta_limit() const { return eta_limit_; }
  double eta_coeff() const { return eta_coeff_; }
  double eps_coeff() const { return eps_coeff_; }
  double lower_limit() const { return a_; }

 private:
  double eta_limit_ = 0.0;
  double eta_coeff_ = 0.0;
  double eps_coeff_ = 0.0;
  double a_ = 1.0;
};

/// eta(r) = limit + coeff * exp(-r).
struct TaggedEta {
  double limit = 0.0;
  double coeff = 0.0;
};
/// eps(u) = coeff * exp(-u); coeff == 0 is the zero function.
struct TaggedEps {
  double coeff = 0.0;
};

JakymivSvf build_jakymiv_svf(TaggedEta eta, TaggedEps eps, double a);

/// Exponential integral E1(x) = int_x^inf e^{-u}/u du, x > 0.
double exponential_integral_e1(double x);

/// A multivariate slowly varying function built from univariate pieces.
///   product   L1(x) = prod_i l_i(x_i)
///   sum       L2(x) = sum_i l_i(x_i)
///   radial    L3(x) = l(|x|) * lambda(x / |x|)
///   jakymiv   K(x) as above
///   compound  product of child specs
class SlowVaryingSpec {
 public:
  enum class Kind { constant, product, sum, radial, jakymiv, compound };

  static SlowVaryingSpec constant(double c = 1.0);
  static SlowVaryingSpec product(std::vector<UnivariateSvf> factors);
  static SlowVaryingSpec sum(std::vector<UnivariateSvf> terms);
  static SlowVaryingSpec radial(UnivariateSvf radial_part, SphereFunction sphere = {});
  static SlowVaryingSpec jakymiv(JakymivSvf k);
  static SlowVaryingSpec compound(std::vector<SlowVaryingSpec> children);

  double operator()(const Vec& t) const;

  /// True when the construction satisfies the coordinate-wise slow variation
  /// limit: product, sum, constant, jakymiv, radial with a constant sphere
  /// function, and compounds of those.
  bool coordinatewise() const;

  Kind kind() const { return kind_; }
  const std::vector<UnivariateSvf>& factors() const { return factors_; }
  const SphereFunction& sphere() const { return sphere_; }
  const JakymivSvf& jakymiv_part() const { return jakymiv_; }
  const std::vector<SlowVaryingSpec>& children() const { return children_; }

 private:
  explicit SlowVaryingSpec(Kind kind) : kind_(kind) {}
  Kind kind_;
  double constant_ = 1.0;
  std::vector<UnivariateSvf> factors_;
  SphereFunction sphere_;
  JakymivSvf jakymiv_;
  std::vector<SlowVaryingSpec> children_;
};

/// f(t) = prod_i t_i^{H_i} L(t) with L coordinate-wise slowly varying.
struct CrvfSpec {
  Vec exponents;
  SlowVaryingSpec slow_part = SlowVaryingSpec::constant();

  CrvfSpec(Vec exponents, SlowVaryingSpec slow_part);
  std::size_t dimension() const { return static_cast<std::size_t>(exponents.size()); }
};

double eval_crvf(const CrvfSpec& spec, const Vec& t);
double log_eval_crvf(const CrvfSpec& spec, const Vec& t);
/// Pointwise product; exponents add and slow parts compound.
CrvfSpec crvf_product(const CrvfSpec& a, const CrvfSpec& b);

/// f(x) = |x|^rho L(x) with L radially slowly varying.
struct RrvfSpec {
  double rho = 0.0;
  SlowVaryingSpec slow_part = SlowVaryingSpec::constant();
};

double eval_rrvf(const RrvfSpec& spec, const Vec& x);
Vec reference_direction(std::size_t d);

struct MultiplicativityReport {
  double max_residual = 0.0;
  bool pass = false;
};

/// max |l(a.b) - l(a) l(b)| / l(a.b) over the pairs; a.b is the
/// componentwise product.
MultiplicativityReport check_multiplicativity(const PositiveFn& limit_fn,
                                              const std::vector<std::pair<Vec, Vec>>& pairs,
                                              double tol);

struct ExponentEstimate {
  Vec h_hat;
  Vec r_squared;
  /// Local slope between the last two levels, per axis.
  Vec tail_slope;
};

/// Along each coordinate ray t_i = anchor_i * base^k (k = 0..levels), with the
/// other coordinates held at anchor * base^levels, regresses ln f on ln t_i.
ExponentEstimate estimate_crv_exponents(const PositiveFn& f, double grid_base, int levels,
                                        const Vec& anchor);

struct RadialEstimate {
  double phi_hat = 0.0;
  double rho_hat = 0.0;
  /// |ratio_k / ratio_last - 1| <= tol over the last three grid levels.
  bool converged = false;
};

/// phi_hat = f(T x) / f(T e) at the largest grid value T; rho_hat is the slope
/// of ln phi_hat(s x) against ln s over s in {1/4, 1/2, 1, 2, 4}.
RadialEstimate check_radial_variation(const PositiveFn& f, const Vec& x,
                                      std::span<const double> t_grid, double tol);

/// Geometric sequence first, first*ratio, ..., count terms.
std::vector<double> geometric_grid(double first, double ratio, int count);

/// exp(A) by scaling and squaring with a Taylor kernel truncated once the
/// term norm falls below 1e-14 of the partial sum.
Mat matrix_exp(const Mat& a);
/// r^D = exp(ln r * D).
Mat matrix_power(const Mat& d, double r);
/// Largest singular value.
double operator_norm(const Mat& a);

/// F(r) = r^D diag(l_1(r), ..., l_d(r)).
struct OperatorRvfSpec {
  Mat index_matrix;
  std::vector<UnivariateSvf> slow_diag;

  Mat operator()(double r) const;
};

struct OperatorRegvarReport {
  double deviation = 0.0;
  std::vector<double> deviations;
  bool pass = false;
};

/// deviation = ||F(lambda r) F(r)^{-1} - lambda^D|| at each r of the grid;
/// the reported deviation is the one at the largest r.
OperatorRegvarReport check_operator_regvar(const MatrixFn& f, const Mat& index, double lambda,
                                           std::span<const double> r_grid, double tol);
OperatorRegvarReport check_operator_regvar(const OperatorRvfSpec& f, double lambda,
                                           std::span<const double> r_grid, double tol);

}  // namespace lamperti::regvar
