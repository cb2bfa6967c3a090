#pragma once

// Lamperti transformations between self-similar fields (time domain T) and
// stationary fields (stationary domain S): classical 1-D, multi-self-similar
// on the positive orthant, and the polar map for the Levy fBm on the plane.
// Also the cocycle machinery that makes the orthant case a special instance of
// the general group construction.

#include "lamperti/fields.hpp"

#include <utility>
#include <vector>

namespace lamperti::transform {

using fields::CovarianceFn;
using fields::FieldSample;

/// m x d matrix of nonnegative exponents; row j is the exponent vector of
/// component j.
class HurstMatrix {
 public:
  explicit HurstMatrix(Mat entries);
  /// Single row.
  static HurstMatrix row(const Vec& h);
  /// Parses "h11,h12;h21,h22" (rows separated by ';').
  static HurstMatrix parse(const std::string& text);

  const Mat& entries() const { return entries_; }
  std::size_t components() const { return static_cast<std::size_t>(entries_.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(entries_.cols()); }
  Vec component(std::size_t j) const { return entries_.row(static_cast<Eigen::Index>(j)).transpose(); }
  std::string to_string() const;

 private:
  Mat entries_;
};

/// diag(a_1, ..., a_d) with a_i > 0; the group law is the componentwise product.
struct DiagonalGroupElement {
  Vec a;

  explicit DiagonalGroupElement(Vec a);
  static DiagonalGroupElement identity(std::size_t d);
  DiagonalGroupElement operator*(const DiagonalGroupElement& other) const;
  DiagonalGroupElement inverse() const;
  Vec act(const Vec& t) const { return a.cwiseProduct(t); }
};

/// C(diag(a)) = diag(prod_i a_i^{H_i^{(j)}}, j = 1..m).
class CocycleSpec {
 public:
  explicit CocycleSpec(HurstMatrix hurst) : hurst_(std::move(hurst)) {}
  /// Diagonal of C(g), computed as exp(H ln a).
  Vec operator()(const DiagonalGroupElement& g) const;
  const HurstMatrix& hurst() const { return hurst_; }

 private:
  HurstMatrix hurst_;
};

/// Time change phi: S -> T and its inverse.
///   exp_orthant: phi(s) = (e^{s_1}, ..., e^{s_d}),     inverse: componentwise log
///   polar_plane: phi(s) = e^{s_1} (cos s_2, sin s_2),  inverse: (ln rho(t), theta(t)),
///                theta principal in (-pi, pi]
struct TimeChange {
  enum class Kind { exp_orthant, polar_plane };
  Kind kind = Kind::exp_orthant;

  Vec to_time(const Vec& s) const;
  Vec to_stationary(const Vec& t) const;
};

enum class Frame { time_domain, stationary_domain };
const char* frame_name(Frame f);
Frame parse_frame(const std::string& name);

/// A single path sampled on explicit points; values is n_points x m.
struct PathOnGrid {
  std::vector<Vec> points;
  Mat values;
  Frame frame = Frame::time_domain;
};

/// max_j |C(g1 g2)_j - C(g1)_j C(g2)_j| / |C(g1 g2)_j|.
double check_cocycle(const CocycleSpec& c, const DiagonalGroupElement& g1, const DiagonalGroupElement& g2);

struct Prop6Residuals {
  /// Relative distance between F(h)(phi(s)) and phi(h(s)).
  double cond2 = 0.0;
  /// Relative deviation of f(h(s)) C(F(h)) from f(s), f(s) = C(F(s))^{-1}.
  double cond1 = 0.0;
};

/// Checks the commutation and cocycle conditions of the group construction
/// for S = R^d with translations h(s) = s + h, F(h) = diag(e^h). Only the
/// exp-orthant time change is supported.
Prop6Residuals check_prop6_conditions(const CocycleSpec& c, const TimeChange& phi, const Vec& h, const Vec& s);

/// Y_j(s) = exp(-sum_i s_i H_i^{(j)}) X_j(e^{s_1}, ..., e^{s_d}), s = ln t.
PathOnGrid lamperti_forward_mss(const PathOnGrid& x, const HurstMatrix& hurst);
/// X_j(t) = prod_i t_i^{H_i^{(j)}} Y_j(ln t_1, ..., ln t_d), t = e^s.
PathOnGrid lamperti_inverse_mss(const PathOnGrid& y, const HurstMatrix& hurst);
/// Y(s) = e^{-s_1 H} X(e^{s_1} cos s_2, e^{s_1} sin s_2), s = (ln rho(t), theta(t)).
PathOnGrid polar_forward_levy(const PathOnGrid& x, double hurst);
/// X(t) = rho(t)^H Y(ln rho(t), theta(t)), t = phi(s).
PathOnGrid polar_inverse_levy(const PathOnGrid& y, double hurst);
/// Y(s) = e^{-H s} X(e^s).
PathOnGrid lamperti_forward_1d(const PathOnGrid& x, double hurst);
/// X(t) = t^H Y(ln t).
PathOnGrid lamperti_inverse_1d(const PathOnGrid& y, double hurst);

/// The six transforms addressable from the CLI.
enum class Direction { mss_forward, mss_inverse, polar_forward, polar_inverse, d1_forward, d1_inverse };
Direction parse_direction(const std::string& name);
const char* direction_name(Direction d);

/// Applies a transform to every replicate of a sample. For the mss
/// directions `hurst` is m x d; for the polar and 1-D directions it is a 1 x 1
/// matrix holding H. The output records frame= and transform= metadata.
FieldSample transform_sample(const FieldSample& sample, Direction direction, const HurstMatrix& hurst);

/// max |g(a.b) - g(a) - g(b) f(a)| over the pairs, with
/// f(a) = prod_i a_i^{H_i} and g(a) = D (1 - f(a)).
double check_wmss_shift_equation(const Vec& h_row, double shift_d,
                                 const std::vector<std::pair<Vec, Vec>>& pairs);

// Kernel-level images of the transforms (component m = 1).
CovarianceFn pushforward_mss(CovarianceFn time_cov, Vec h);
CovarianceFn pullback_mss(CovarianceFn stationary_cov, Vec h);
CovarianceFn pushforward_polar(CovarianceFn time_cov, double hurst);
/// Zero whenever either argument is the origin (X(0) = 0).
CovarianceFn pullback_polar(CovarianceFn stationary_cov, double hurst);

}  // namespace lamperti::transform
