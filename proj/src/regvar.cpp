#include "lamperti/regvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lamperti::regvar {

void validate_exponents(const Vec& h, bool require_nonnegative) {
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i])) throw ParameterError("exponent vector has a non-finite entry");
    if (require_nonnegative && h[i] < 0.0) {
      throw ParameterError("exponent vector entries must be >= 0");
    }
  }
}

// --- univariate ---------------------------------------------------------

UnivariateSvf UnivariateSvf::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ParameterError("constant s.v.f. must be positive");
  return {Kind::constant, c, 1.0};
}

UnivariateSvf UnivariateSvf::log(double offset, double power) {
  if (!(offset >= 1.0)) throw ParameterError("log s.v.f. needs offset >= 1");
  if (!std::isfinite(power)) throw ParameterError("log s.v.f. power must be finite");
  return {Kind::log, offset, power};
}

UnivariateSvf UnivariateSvf::iterated_log(double offset) {
  if (!(offset >= std::numbers::e)) throw ParameterError("iterated log s.v.f. needs offset >= e");
  return {Kind::iterated_log, offset, 1.0};
}

double UnivariateSvf::operator()(double x) const {
  if (!(x > 0.0)) throw DomainError("univariate s.v.f. evaluated at a non-positive argument");
  switch (kind_) {
    case Kind::constant:
      return offset_;
    case Kind::log:
      return std::pow(std::log(offset_ + x), power_);
    case Kind::iterated_log:
      return std::log(std::log(offset_ + x));
  }
  return 0.0;
}

// --- sphere functions ----------------------------------------------------

double SphereFunction::operator()(const Vec& direction) const {
  const double sqrt_d = std::sqrt(static_cast<double>(direction.size()));
  switch (kind) {
    case Kind::one:
      return 1.0;
    case Kind::power_sum:
      return std::pow(direction.sum() / sqrt_d, power);
    case Kind::weighted_product: {
      if (weights.size() != direction.size()) {
        throw ParameterError("sphere function weights do not match the dimension");
      }
      double v = 1.0;
      for (Eigen::Index i = 0; i < direction.size(); ++i) {
        v *= std::pow(sqrt_d * direction[i], weights[i]);
      }
      return v;
    }
  }
  return 0.0;
}

// --- Jakymiv form ----------------------------------------------------------

double exponential_integral_e1(double x) {
  if (!(x > 0.0)) throw DomainError("E1 needs a positive argument");
  if (std::isinf(x)) return 0.0;
  return -std::expint(-x);
}

JakymivSvf::JakymivSvf(double eta_limit, double eta_coeff, double eps_coeff, double a)
    : eta_limit_(eta_limit), eta_coeff_(eta_coeff), eps_coeff_(eps_coeff), a_(a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("Jakymiv lower limit a must be > 0");
  if (!std::isfinite(eta_limit) || !std::isfinite(eta_coeff) || !std::isfinite(eps_coeff)) {
    throw ParameterError("Jakymiv tags must be finite");
  }
}

double JakymivSvf::at_radius(double r) const {
  if (!(r > 0.0)) throw DomainError("Jakymiv s.v.f. evaluated at radius <= 0");
  double exponent = eta_limit_;
  if (std::isfinite(r)) exponent += eta_coeff_ * std::exp(-r);
  if (eps_coeff_ != 0.0) {
    exponent += eps_coeff_ * (exponential_integral_e1(a_) - exponential_integral_e1(r));
  }
  return std::exp(exponent);
}

double JakymivSvf::limit() const {
  return at_radius(std::numeric_limits<double>::infinity());
}

JakymivSvf build_jakymiv_svf(TaggedEta eta, TaggedEps eps, double a) {
  return {eta.limit, eta.coeff, eps.coeff, a};
}

// --- multivariate slow part -------------------------------------------------

SlowVaryingSpec SlowVaryingSpec::constant(double c) {
  if (!(c > 0.0)) throw ParameterError("constant slow part must be positive");
  SlowVaryingSpec s(Kind::constant);
  s.constant_ = c;
  return s;
}

SlowVaryingSpec SlowVaryingSpec::product(std::vector<UnivariateSvf> factors) {
  if (factors.empty()) throw ParameterError("product slow part needs at least one factor");
  SlowVaryingSpec s(Kind::product);
  s.factors_ = std::move(factors);
  return s;
}

SlowVaryingSpec SlowVaryingSpec::sum(std::vector<UnivariateSvf> terms) {
  if (terms.empty()) throw ParameterError("sum slow part needs at least one term");
  SlowVaryingSpec s(Kind::sum);
  s.factors_ = std::move(terms);
  return s;
}

SlowVaryingSpec SlowVaryingSpec::radial(UnivariateSvf radial_part, SphereFunction sphere) {
  SlowVaryingSpec s(Kind::radial);
  s.factors_ = {radial_part};
  s.sphere_ = std::move(sphere);
  return s;
}

SlowVaryingSpec SlowVaryingSpec::jakymiv(JakymivSvf k) {
  SlowVaryingSpec s(Kind::jakymiv);
  s.jakymiv_ = k;
  return s;
}

SlowVaryingSpec SlowVaryingSpec::compound(std::vector<SlowVaryingSpec> children) {
  if (children.empty()) throw ParameterError("compound slow part needs children");
  SlowVaryingSpec s(Kind::compound);
  s.children_ = std::move(children);
  return s;
}

namespace {

void require_dimension(const Vec& t, std::size_t d) {
  if (static_cast<std::size_t>(t.size()) != d) {
    throw ParameterError("slow part dimension does not match the argument");
  }
}

}  // namespace

double SlowVaryingSpec::operator()(const Vec& t) const {
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) throw DomainError("slow part evaluated outside the open positive orthant");
  }
  switch (kind_) {
    case Kind::constant:
      return constant_;
    case Kind::product: {
      require_dimension(t, factors_.size());
      double v = 1.0;
      for (std::size_t i = 0; i < factors_.size(); ++i) v *= factors_[i](t[static_cast<Eigen::Index>(i)]);
      return v;
    }
    case Kind::sum: {
      require_dimension(t, factors_.size());
      double v = 0.0;
      for (std::size_t i = 0; i < factors_.size(); ++i) v += factors_[i](t[static_cast<Eigen::Index>(i)]);
      return v;
    }
    case Kind::radial: {
      const double r = t.norm();
      return factors_.front()(r) * sphere_(t / r);
    }
    case Kind::jakymiv:
      return jakymiv_(t);
    case Kind::compound: {
      double v = 1.0;
      for (const auto& c : children_) v *= c(t);
      return v;
    }
  }
  return 0.0;
}

bool SlowVaryingSpec::coordinatewise() const {
  switch (kind_) {
    case Kind::constant:
    case Kind::product:
    case Kind::sum:
    case Kind::jakymiv:
      return true;
    case Kind::radial:
      return sphere_.kind == SphereFunction::Kind::one ||
             (sphere_.kind == SphereFunction::Kind::power_sum && sphere_.power == 0.0);
    case Kind::compound:
      return std::all_of(children_.begin(), children_.end(),
                         [](const SlowVaryingSpec& c) { return c.coordinatewise(); });
  }
  return false;
}

// --- c.r.v.f. / r.r.v.f. ----------------------------------------------------

CrvfSpec::CrvfSpec(Vec h, SlowVaryingSpec slow) : exponents(std::move(h)), slow_part(std::move(slow)) {
  validate_exponents(exponents, true);
  if (!slow_part.coordinatewise()) {
    throw ParameterError("c.r.v.f. slow part must be coordinate-wise slowly varying");
  }
}

double log_eval_crvf(const CrvfSpec& spec, const Vec& t) {
  if (t.size() != spec.exponents.size()) throw ParameterError("c.r.v.f. dimension mismatch");
  double log_power = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) throw DomainError("c.r.v.f. evaluated with a coordinate <= 0");
    log_power += spec.exponents[i] * std::log(t[i]);
  }
  return log_power + std::log(spec.slow_part(t));
}

double eval_crvf(const CrvfSpec& spec, const Vec& t) {
  if (t.size() != spec.exponents.size()) throw ParameterError("c.r.v.f. dimension mismatch");
  double v = 1.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) throw DomainError("c.r.v.f. evaluated with a coordinate <= 0");
    v *= std::pow(t[i], spec.exponents[i]);
  }
  return v * spec.slow_part(t);
}

CrvfSpec crvf_product(const CrvfSpec& a, const CrvfSpec& b) {
  if (a.dimension() != b.dimension()) throw ParameterError("c.r.v.f. product dimension mismatch");
  return CrvfSpec(a.exponents + b.exponents, SlowVaryingSpec::compound({a.slow_part, b.slow_part}));
}

Vec reference_direction(std::size_t d) {
  if (d == 0) throw ParameterError("dimension must be >= 1");
  return Vec::Constant(static_cast<Eigen::Index>(d), 1.0 / std::sqrt(static_cast<double>(d)));
}

double eval_rrvf(const RrvfSpec& spec, const Vec& x) {
  const double r = x.norm();
  if (!(r > 0.0)) throw DomainError("r.r.v.f. evaluated at the origin");
  return std::pow(r, spec.rho) * spec.slow_part(x);
}

// --- checks and estimators ----------------------------------------------------

MultiplicativityReport check_multiplicativity(const PositiveFn& limit_fn,
                                              const std::vector<std::pair<Vec, Vec>>& pairs,
                                              double tol) {
  MultiplicativityReport report;
  for (const auto& [a, b] : pairs) {
    const double lab = limit_fn(a.cwiseProduct(b));
    const double la = limit_fn(a);
    const double lb = limit_fn(b);
    if (!(lab > 0.0) || !(la > 0.0) || !(lb > 0.0)) {
      throw DomainError("multiplicativity check needs a strictly positive limit function");
    }
    report.max_residual = std::max(report.max_residual, std::abs(lab - la * lb) / lab);
  }
  report.pass = report.max_residual <= tol;
  return report;
}

std::vector<double> geometric_grid(double first, double ratio, int count) {
  if (!(first > 0.0) || !(ratio > 0.0) || count < 1) throw ParameterError("bad geometric grid");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) g[static_cast<std::size_t>(k)] = first * std::pow(ratio, k);
  return g;
}

ExponentEstimate estimate_crv_exponents(const PositiveFn& f, double grid_base, int levels,
                                        const Vec& anchor) {
  if (!(grid_base > 1.0)) throw ParameterError("grid base must be > 1");
  if (levels < 2) throw ParameterError("need at least 2 levels");
  for (Eigen::Index i = 0; i < anchor.size(); ++i) {
    if (!(anchor[i] > 0.0)) throw ParameterError("anchor must be positive");
  }
  const Eigen::Index d = anchor.size();
  const double top = std::pow(grid_base, levels);

  ExponentEstimate est;
  est.h_hat.resize(d);
  est.r_squared.resize(d);
  est.tail_slope.resize(d);
  std::vector<double> xs(static_cast<std::size_t>(levels) + 1);
  std::vector<double> ys(xs.size());
  for (Eigen::Index axis = 0; axis < d; ++axis) {
    Vec t = anchor * top;
    for (int k = 0; k <= levels; ++k) {
      t[axis] = anchor[axis] * std::pow(grid_base, k);
      const double v = f(t);
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw NumericError("exponent estimation needs f > 0 on the sampling grid");
      }
      xs[static_cast<std::size_t>(k)] = std::log(t[axis]);
      ys[static_cast<std::size_t>(k)] = std::log(v);
    }
    const LineFit fit = fit_line(xs, ys);
    est.h_hat[axis] = fit.slope;
    est.r_squared[axis] = fit.r_squared;
    const std::size_t last = xs.size() - 1;
    est.tail_slope[axis] = (ys[last] - ys[last - 1]) / (xs[last] - xs[last - 1]);
  }
  return est;
}

RadialEstimate check_radial_variation(const PositiveFn& f, const Vec& x,
                                      std::span<const double> t_grid, double tol) {
  if (t_grid.empty()) throw ParameterError("radial check needs a non-empty t grid");
  const Vec e = reference_direction(static_cast<std::size_t>(x.size()));
  auto ratio = [&](double t, const Vec& point) {
    const double num = f(t * point);
    const double den = f(t * e);
    if (!(num > 0.0) || !(den > 0.0)) throw NumericError("radial check needs f > 0 on the rays");
    return num / den;
  };

  const double top = *std::max_element(t_grid.begin(), t_grid.end());
  RadialEstimate est;
  est.phi_hat = ratio(top, x);

  std::vector<double> sorted(t_grid.begin(), t_grid.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t tail = std::min<std::size_t>(3, sorted.size());
  est.converged = true;
  for (std::size_t k = sorted.size() - tail; k < sorted.size(); ++k) {
    if (std::abs(ratio(sorted[k], x) / est.phi_hat - 1.0) > tol) est.converged = false;
  }

  constexpr double kScales[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> ls, lphi;
  for (double s : kScales) {
    ls.push_back(std::log(s));
    lphi.push_back(std::log(ratio(top, s * x)));
  }
  est.rho_hat = fit_line(ls, lphi).slope;
  return est;
}

// --- operator-valued ---------------------------------------------------------------

Mat matrix_exp(const Mat& a) {
  if (a.rows() != a.cols()) throw ParameterError("matrix_exp needs a square matrix");
  if (!a.allFinite()) throw ParameterError("matrix_exp needs finite entries");
  const Eigen::Index n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Mat b = a / std::ldexp(1.0, squarings);

  Mat sum = Mat::Identity(n, n);
  Mat term = Mat::Identity(n, n);
  for (int k = 1; k < 64; ++k) {
    term = term * b / static_cast<double>(k);
    sum += term;
    const double tn = term.cwiseAbs().colwise().sum().maxCoeff();
    // ||b|| <= 1/2 makes the remaining tail at most 2 * tn / (k + 1).
    if (2.0 * tn / (k + 1) <= 1e-14 * sum.cwiseAbs().colwise().sum().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

Mat matrix_power(const Mat& d, double r) {
  if (!(r > 0.0)) throw DomainError("matrix_power needs r > 0");
  if (d.isDiagonal(0.0)) {
    Mat out = Mat::Zero(d.rows(), d.cols());
    for (Eigen::Index i = 0; i < d.rows(); ++i) out(i, i) = std::pow(r, d(i, i));
    return out;
  }
  return matrix_exp(std::log(r) * d);
}

double operator_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

Mat OperatorRvfSpec::operator()(double r) const {
  if (static_cast<std::size_t>(index_matrix.rows()) != slow_diag.size() ||
      index_matrix.rows() != index_matrix.cols()) {
    throw ParameterError("operator r.v.f. needs a square index matrix matching the slow diagonal");
  }
  Vec diag(index_matrix.rows());
  for (std::size_t i = 0; i < slow_diag.size(); ++i) diag[static_cast<Eigen::Index>(i)] = slow_diag[i](r);
  return matrix_power(index_matrix, r) * diag.asDiagonal();
}

OperatorRegvarReport check_operator_regvar(const MatrixFn& f, const Mat& index, double lambda,
                                           std::span<const double> r_grid, double tol) {
  if (!(lambda > 0.0)) throw ParameterError("lambda must be > 0");
  if (r_grid.empty()) throw ParameterError("operator check needs a non-empty r grid");
  std::vector<double> grid(r_grid.begin(), r_grid.end());
  std::sort(grid.begin(), grid.end());
  const Mat target = matrix_power(index, lambda);

  OperatorRegvarReport report;
  for (double r : grid) {
    const Mat fr = f(r);
    Eigen::FullPivLU<Mat> lu(fr);
    // Regularly varying F(r) can be badly scaled at large r (r^D with
    // distinct eigenvalues), so only exactly vanishing pivots count as singular.
    lu.setThreshold(std::numeric_limits<double>::min());
    if (!lu.isInvertible()) throw NumericError("F(r) is singular on the grid");
    report.deviations.push_back(operator_norm(f(lambda * r) * lu.inverse() - target));
  }
  report.deviation = report.deviations.back();
  report.pass = report.deviation <= tol;
  return report;
}

OperatorRegvarReport check_operator_regvar(const OperatorRvfSpec& f, double lambda,
                                           std::span<const double> r_grid, double tol) {
  return check_operator_regvar([&f](double r) { return f(r); }, f.index_matrix, lambda, r_grid, tol);
}

}  // namespace lamperti::regvar
