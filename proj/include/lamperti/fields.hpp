#pragma once

// Covariance kernels of Gaussian random fields, Gram matrices, and seeded
// Monte Carlo samplers (dense Cholesky and circulant embedding).

#include "lamperti/common.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lamperti::fields {

using CovarianceFn = std::function<double(const Vec&, const Vec&)>;

/// Ordered key=value metadata; insertion order is preserved on output.
class Metadata {
 public:
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  void merge(const Metadata& other);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Stationary 1-D lattice covariance r(k):
///   delta      r(k) = 1{k = 0}
///   geometric  r(k) = rho^{|k|},                                 0 < rho < 1
///   fgn        r(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2,  0 < H <= 1
/// For fgn the variance of a block sum of length n is exactly n^{2H}.
struct LatticeCov1d {
  enum class Kind { delta, geometric, fgn };
  Kind kind = Kind::delta;
  double param = 0.0;

  static LatticeCov1d delta() { return {}; }
  static LatticeCov1d geometric(double rho);
  static LatticeCov1d fgn(double hurst);

  double operator()(long k) const;
  std::string descriptor() const;
  static LatticeCov1d parse(const std::string& text);
};

class CovarianceKernel {
 public:
  enum class Kind {
    levy_fbm,
    fbm_sheet,
    polar_stationary,
    lattice_isotropic_lrd,
    lattice_separable,
    white_noise,
    tabulated
  };

  /// 1/2 (|t|^{2H} + |u|^{2H} - |t-u|^{2H}), 0 < H <= 1.
  static CovarianceKernel levy_fbm(double hurst, std::size_t dimension = 2);
  /// prod_i 1/2 (|t_i|^{2h_i} + |u_i|^{2h_i} - |t_i-u_i|^{2h_i}).
  static CovarianceKernel fbm_sheet(Vec h);
  /// R(u - t) on the plane, see covariance_R.
  static CovarianceKernel polar_stationary(double hurst);
  /// r(i, j) = (1 + i^2 + j^2)^{-q/2}, 0 < q < 2, integer lags.
  static CovarianceKernel lattice_isotropic_lrd(double q);
  /// r(i, j) = r1(i) r2(j), integer lags.
  static CovarianceKernel lattice_separable(LatticeCov1d r1, LatticeCov1d r2);
  static CovarianceKernel white_noise(std::size_t dimension);
  /// Explicit matrix; points are 1-vectors holding a 0-based index.
  static CovarianceKernel tabulated(Mat matrix);

  double operator()(const Vec& t, const Vec& u) const;

  Kind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  double hurst() const { return hurst_; }
  const Vec& sheet_exponents() const { return h_; }
  double lrd_q() const { return hurst_; }
  const LatticeCov1d& axis1() const { return r1_; }
  const LatticeCov1d& axis2() const { return r2_; }
  const Mat& table() const { return table_; }

  /// True when K(t, u) depends on u - t only.
  bool stationary() const;
  /// r(k, l) = K(0, (k, l)) for the 2-D stationary kinds.
  double lag(long k, long l) const;

  /// Metadata describing the kernel (kernel=..., parameters), sufficient to
  /// rebuild it with from_metadata.
  Metadata metadata() const;
  static CovarianceKernel from_metadata(const Metadata& md);

  CovarianceFn as_function() const;

 private:
  explicit CovarianceKernel(Kind kind) : kind_(kind) {}
  Kind kind_;
  std::size_t dimension_ = 2;
  double hurst_ = 0.5;
  Vec h_;
  LatticeCov1d r1_, r2_;
  Mat table_;
};

double covariance(const CovarianceKernel& kernel, const Vec& t, const Vec& u);

/// Stationary covariance of the polar Lamperti image of the Levy fBm:
/// R(v) = 1/2 (e^{v1 H} + e^{-v1 H} - (e^{v1} + e^{-v1} - 2 cos v2)^H).
double covariance_R(const Vec& v, double hurst);

Mat gram_matrix(const CovarianceKernel& kernel, const std::vector<Vec>& points);
Mat gram_matrix(const CovarianceFn& cov, const std::vector<Vec>& points);

/// Rectangular lattice with strictly increasing coordinates per axis. Points
/// are enumerated row-major: the last axis varies fastest.
struct LatticeGrid {
  std::vector<std::vector<double>> axes;

  explicit LatticeGrid(std::vector<std::vector<double>> axes);
  /// Axis k holds 1, 2, ..., sizes[k].
  static LatticeGrid integer(const std::vector<std::size_t>& sizes);

  std::size_t dimension() const { return axes.size(); }
  std::size_t size() const;
  std::vector<std::size_t> shape() const;
  std::vector<Vec> points() const;
  /// True when every axis is 1, 2, ..., N.
  bool integer_from_one() const;
  /// True when every axis is a run of consecutive integers.
  bool unit_spaced_integers() const;
};

/// n_reps x n_points x m values with their point set and metadata.
struct FieldSample {
  std::vector<Vec> points;
  std::optional<LatticeGrid> grid;
  std::size_t n_reps = 0;
  std::size_t components = 1;
  std::vector<double> values;
  Metadata metadata;

  std::size_t n_points() const { return points.size(); }
  std::size_t dimension() const { return points.empty() ? 0 : static_cast<std::size_t>(points.front().size()); }
  double& at(std::size_t rep, std::size_t point, std::size_t comp = 0) {
    return values[(rep * points.size() + point) * components + comp];
  }
  double at(std::size_t rep, std::size_t point, std::size_t comp = 0) const {
    return values[(rep * points.size() + point) * components + comp];
  }
  std::span<const double> replicate(std::size_t rep) const {
    const std::size_t stride = points.size() * components;
    return {values.data() + rep * stride, stride};
  }
  /// Throws ParameterError when the buffer size or finiteness invariant fails.
  void validate() const;
};

/// Lower Cholesky factor of a Gram matrix after the jitter policy: plain
/// attempt, then 1e-10 * trace/n added to the diagonal, escalated x100 up to
/// three times. Throws NumericError if all attempts fail.
struct GaussianFactor {
  Mat lower;
  double jitter = 0.0;
};
GaussianFactor factorize_gram(const Mat& gram);

/// i.i.d. mean-zero Gaussian replicates with the Gram covariance of `cov`
/// on `points`. Replicate r uses substream(seed, r).
FieldSample sample_gaussian_field(const CovarianceFn& cov, const Metadata& kernel_metadata,
                                  const std::vector<Vec>& points, std::size_t n_reps,
                                  std::uint64_t seed);
FieldSample sample_gaussian_field(const CovarianceKernel& kernel, const std::vector<Vec>& points,
                                  std::size_t n_reps, std::uint64_t seed);

/// Per-replicate sampler for a stationary kernel on a unit-spaced integer
/// lattice. Strategy: i.i.d. draws for white noise, 2-D circulant embedding
/// when the embedding is nonnegative definite, dense Cholesky otherwise.
class LatticeSampler {
 public:
  LatticeSampler(const CovarianceKernel& kernel, LatticeGrid grid);
  ~LatticeSampler();
  LatticeSampler(const LatticeSampler&) = delete;
  LatticeSampler& operator=(const LatticeSampler&) = delete;

  /// Writes replicates 2*pair and 2*pair+1 (row-major over the grid).
  void draw_pair(std::uint64_t seed, std::uint64_t pair, std::span<double> even,
                 std::span<double> odd) const;
  void draw(std::uint64_t seed, std::uint64_t rep, std::span<double> out) const;

  std::size_t size() const { return grid_.size(); }
  const LatticeGrid& grid() const { return grid_; }
  /// "iid", "circulant" or "dense-cholesky".
  const std::string& generator() const { return generator_; }
  double min_embedding_eigenvalue() const { return min_eigenvalue_; }
  std::vector<std::size_t> embedding_shape() const { return {m1_, m2_}; }
  double jitter() const { return jitter_; }
  const CovarianceKernel& kernel() const { return kernel_; }

 private:
  bool try_circulant(std::size_t m1, std::size_t m2);
  CovarianceKernel kernel_;
  LatticeGrid grid_;
  std::string generator_;
  std::size_t m1_ = 0, m2_ = 0;
  std::vector<double> sqrt_eigen_;
  double min_eigenvalue_ = 0.0;
  Mat lower_;
  double jitter_ = 0.0;
  void* plan_ = nullptr;
};

/// Same law as sample_gaussian_field on the lattice, via LatticeSampler; the
/// strategy used is recorded under the `generator` metadata key.
FieldSample sample_stationary_lattice(const CovarianceKernel& kernel, const LatticeGrid& grid,
                                      std::size_t n_reps, std::uint64_t seed);

}  // namespace lamperti::fields
