#include "lamperti/fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace lamperti::fields {

// --- metadata -----------------------------------------------------------------

void Metadata::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

std::optional<std::string> Metadata::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Metadata::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw ParameterError("missing metadata key '" + key + "'");
  return *v;
}

void Metadata::merge(const Metadata& other) {
  for (const auto& [k, v] : other.entries_) set(k, v);
}

namespace {

std::string join_doubles(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

Vec split_doubles(const std::string& text) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) xs.push_back(parse_double(item));
  return Eigen::Map<Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

void check_hurst(double h, const char* what) {
  if (!(h > 0.0 && h <= 1.0)) {
    throw ParameterError(std::string(what) + " must lie in (0,1], got " + format_double(h));
  }
}

long integer_lag(double a, double b) {
  const double d = b - a;
  const double r = std::round(d);
  if (std::abs(d - r) > 1e-9) throw DomainError("lattice kernels take integer coordinates");
  return static_cast<long>(r);
}

}  // namespace

// --- 1-D lattice covariances ---------------------------------------------------------

LatticeCov1d LatticeCov1d::geometric(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("geometric covariance needs 0 < rho < 1");
  return {Kind::geometric, rho};
}

LatticeCov1d LatticeCov1d::fgn(double hurst) {
  check_hurst(hurst, "fGn Hurst exponent");
  return {Kind::fgn, hurst};
}

double LatticeCov1d::operator()(long k) const {
  switch (kind) {
    case Kind::delta:
      return k == 0 ? 1.0 : 0.0;
    case Kind::geometric:
      return std::pow(param, static_cast<double>(std::labs(k)));
    case Kind::fgn: {
      const double a = static_cast<double>(std::labs(k));
      const double e = 2.0 * param;
      return 0.5 * (std::pow(a + 1.0, e) - 2.0 * std::pow(a, e) + std::pow(std::abs(a - 1.0), e));
    }
  }
  return 0.0;
}

std::string LatticeCov1d::descriptor() const {
  switch (kind) {
    case Kind::delta:
      return "delta";
    case Kind::geometric:
      return "geom:" + format_double(param);
    case Kind::fgn:
      return "fgn:" + format_double(param);
  }
  return {};
}

LatticeCov1d LatticeCov1d::parse(const std::string& text) {
  if (text == "delta") return delta();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string name = text.substr(0, colon);
    const double p = parse_double(text.substr(colon + 1));
    if (name == "geom") return geometric(p);
    if (name == "fgn") return fgn(p);
  }
  throw ParameterError("unknown 1-D lattice covariance '" + text + "' (expected delta, geom:<rho>, fgn:<H>)");
}

// --- kernels -------------------------------------------------------------------------

CovarianceKernel CovarianceKernel::levy_fbm(double hurst, std::size_t dimension) {
  check_hurst(hurst, "Levy fBm Hurst exponent H");
  if (dimension == 0) throw ParameterError("dimension must be >= 1");
  CovarianceKernel k(Kind::levy_fbm);
  k.hurst_ = hurst;
  k.dimension_ = dimension;
  return k;
}

CovarianceKernel CovarianceKernel::fbm_sheet(Vec h) {
  if (h.size() == 0) throw ParameterError("fBm sheet needs at least one exponent");
  for (Eigen::Index i = 0; i < h.size(); ++i) check_hurst(h[i], "fBm sheet exponent");
  CovarianceKernel k(Kind::fbm_sheet);
  k.dimension_ = static_cast<std::size_t>(h.size());
  k.h_ = std::move(h);
  return k;
}

CovarianceKernel CovarianceKernel::polar_stationary(double hurst) {
  check_hurst(hurst, "polar kernel Hurst exponent H");
  CovarianceKernel k(Kind::polar_stationary);
  k.hurst_ = hurst;
  return k;
}

CovarianceKernel CovarianceKernel::lattice_isotropic_lrd(double q) {
  if (!(q > 0.0 && q < 2.0)) throw ParameterError("isotropic LRD exponent q must lie in (0,2)");
  CovarianceKernel k(Kind::lattice_isotropic_lrd);
  k.hurst_ = q;
  return k;
}

CovarianceKernel CovarianceKernel::lattice_separable(LatticeCov1d r1, LatticeCov1d r2) {
  CovarianceKernel k(Kind::lattice_separable);
  k.r1_ = r1;
  k.r2_ = r2;
  return k;
}

CovarianceKernel CovarianceKernel::white_noise(std::size_t dimension) {
  if (dimension == 0) throw ParameterError("dimension must be >= 1");
  CovarianceKernel k(Kind::white_noise);
  k.dimension_ = dimension;
  return k;
}

CovarianceKernel CovarianceKernel::tabulated(Mat matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw ParameterError("tabulated covariance must be a non-empty square matrix");
  }
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() != 0.0) {
    throw ParameterError("tabulated covariance must be symmetric");
  }
  CovarianceKernel k(Kind::tabulated);
  k.dimension_ = 1;
  k.table_ = std::move(matrix);
  return k;
}

double covariance_R(const Vec& v, double hurst) {
  check_hurst(hurst, "H");
  if (v.size() != 2) throw ParameterError("covariance_R takes a 2-vector");
  // e^{v1} + e^{-v1} - 2 cos v2 = 4 (sinh^2(v1/2) + sin^2(v2/2)), free of cancellation.
  const double sh = std::sinh(0.5 * v[0]);
  const double sn = std::sin(0.5 * v[1]);
  const double base = 4.0 * (sh * sh + sn * sn);
  return std::cosh(v[0] * hurst) - 0.5 * std::pow(base, hurst);
}

double CovarianceKernel::operator()(const Vec& t, const Vec& u) const {
  if (t.size() != u.size() || static_cast<std::size_t>(t.size()) != dimension_) {
    throw ParameterError("covariance arguments do not match the kernel dimension");
  }
  switch (kind_) {
    case Kind::levy_fbm: {
      const double a = std::pow(t.squaredNorm(), hurst_);
      const double b = std::pow(u.squaredNorm(), hurst_);
      const double c = std::pow((t - u).squaredNorm(), hurst_);
      return 0.5 * ((a + b) - c);
    }
    case Kind::fbm_sheet: {
      double v = 1.0;
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double e = 2.0 * h_[i];
        v *= 0.5 * ((std::pow(std::abs(t[i]), e) + std::pow(std::abs(u[i]), e)) -
                    std::pow(std::abs(t[i] - u[i]), e));
      }
      return v;
    }
    case Kind::polar_stationary:
      return covariance_R(u - t, hurst_);
    case Kind::lattice_isotropic_lrd: {
      const double i = static_cast<double>(integer_lag(t[0], u[0]));
      const double j = static_cast<double>(integer_lag(t[1], u[1]));
      return std::pow(1.0 + i * i + j * j, -0.5 * hurst_);
    }
    case Kind::lattice_separable:
      return r1_(integer_lag(t[0], u[0])) * r2_(integer_lag(t[1], u[1]));
    case Kind::white_noise:
      return t == u ? 1.0 : 0.0;
    case Kind::tabulated: {
      const long a = std::lround(t[0]);
      const long b = std::lround(u[0]);
      if (a < 0 || b < 0 || a >= table_.rows() || b >= table_.rows() ||
          std::abs(t[0] - static_cast<double>(a)) > 0.0 || std::abs(u[0] - static_cast<double>(b)) > 0.0) {
        throw DomainError("tabulated kernel points must be integer indices into the table");
      }
      return table_(a, b);
    }
  }
  return 0.0;
}

double covariance(const CovarianceKernel& kernel, const Vec& t, const Vec& u) { return kernel(t, u); }

bool CovarianceKernel::stationary() const {
  switch (kind_) {
    case Kind::polar_stationary:
    case Kind::lattice_isotropic_lrd:
    case Kind::lattice_separable:
    case Kind::white_noise:
      return true;
    default:
      return false;
  }
}

double CovarianceKernel::lag(long k, long l) const {
  if (!stationary() || dimension_ != 2) throw UnsupportedError("lag() needs a 2-D stationary kernel");
  return (*this)(Vec::Zero(2), Eigen::Vector2d(static_cast<double>(k), static_cast<double>(l)));
}

CovarianceFn CovarianceKernel::as_function() const {
  return [k = *this](const Vec& t, const Vec& u) { return k(t, u); };
}

Metadata CovarianceKernel::metadata() const {
  Metadata md;
  switch (kind_) {
    case Kind::levy_fbm:
      md.set("kernel", "levy-fbm");
      md.set("hurst", format_double(hurst_));
      break;
    case Kind::fbm_sheet:
      md.set("kernel", "fbm-sheet");
      md.set("h", join_doubles(h_));
      break;
    case Kind::polar_stationary:
      md.set("kernel", "polar-stationary");
      md.set("hurst", format_double(hurst_));
      break;
    case Kind::lattice_isotropic_lrd:
      md.set("kernel", "lattice-lrd");
      md.set("q", format_double(hurst_));
      break;
    case Kind::lattice_separable:
      md.set("kernel", "lattice-separable");
      md.set("r1", r1_.descriptor());
      md.set("r2", r2_.descriptor());
      break;
    case Kind::white_noise:
      md.set("kernel", "white-noise");
      break;
    case Kind::tabulated: {
      md.set("kernel", "tabulated");
      std::string rows;
      for (Eigen::Index i = 0; i < table_.rows(); ++i) {
        if (i) rows += ';';
        rows += join_doubles(table_.row(i).transpose());
      }
      md.set("table", rows);
      break;
    }
  }
  md.set("kernel_dimension", std::to_string(dimension_));
  return md;
}

CovarianceKernel CovarianceKernel::from_metadata(const Metadata& md) {
  const std::string kind = md.require("kernel");
  const auto dim = [&] {
    auto d = md.get("kernel_dimension");
    return d ? static_cast<std::size_t>(std::stoul(*d)) : std::size_t{2};
  };
  if (kind == "levy-fbm") return levy_fbm(parse_double(md.require("hurst")), dim());
  if (kind == "fbm-sheet") return fbm_sheet(split_doubles(md.require("h")));
  if (kind == "polar-stationary") return polar_stationary(parse_double(md.require("hurst")));
  if (kind == "lattice-lrd") return lattice_isotropic_lrd(parse_double(md.require("q")));
  if (kind == "lattice-separable") {
    return lattice_separable(LatticeCov1d::parse(md.require("r1")), LatticeCov1d::parse(md.require("r2")));
  }
  if (kind == "white-noise") return white_noise(dim());
  if (kind == "tabulated") {
    std::vector<Vec> rows;
    std::stringstream ss(md.require("table"));
    std::string row;
    while (std::getline(ss, row, ';')) rows.push_back(split_doubles(row));
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols()) throw ParameterError("tabulated kernel table is not square");
      m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    return tabulated(m);
  }
  throw ParameterError("unknown kernel '" + kind + "'");
}

Mat gram_matrix(const CovarianceFn& cov, const std::vector<Vec>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Mat g(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = cov(points[static_cast<std::size_t>(a)], points[static_cast<std::size_t>(b)]);
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  return g;
}

Mat gram_matrix(const CovarianceKernel& kernel, const std::vector<Vec>& points) {
  return gram_matrix([&kernel](const Vec& t, const Vec& u) { return kernel(t, u); }, points);
}

// --- lattice grid ------------------------------------------------------------------------

LatticeGrid::LatticeGrid(std::vector<std::vector<double>> ax) : axes(std::move(ax)) {
  if (axes.empty()) throw ParameterError("lattice needs at least one axis");
  for (const auto& a : axes) {
    if (a.empty()) throw ParameterError("lattice axis is empty");
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (!(a[i] > a[i - 1])) throw ParameterError("lattice axis coordinates must be strictly increasing");
    }
  }
}

LatticeGrid LatticeGrid::integer(const std::vector<std::size_t>& sizes) {
  std::vector<std::vector<double>> axes;
  for (std::size_t n : sizes) {
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<double>(i + 1);
    axes.push_back(std::move(a));
  }
  return LatticeGrid(std::move(axes));
}

std::size_t LatticeGrid::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size();
  return n;
}

std::vector<std::size_t> LatticeGrid::shape() const {
  std::vector<std::size_t> s;
  for (const auto& a : axes) s.push_back(a.size());
  return s;
}

std::vector<Vec> LatticeGrid::points() const {
  const std::size_t n = size();
  const std::size_t d = axes.size();
  std::vector<Vec> pts(n, Vec(static_cast<Eigen::Index>(d)));
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t rem = p;
    for (std::size_t k = d; k-- > 0;) {
      pts[p][static_cast<Eigen::Index>(k)] = axes[k][rem % axes[k].size()];
      rem /= axes[k].size();
    }
  }
  return pts;
}

bool LatticeGrid::unit_spaced_integers() const {
  for (const auto& a : axes) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != std::round(a[i])) return false;
      if (i && a[i] != a[i - 1] + 1.0) return false;
    }
  }
  return true;
}

bool LatticeGrid::integer_from_one() const {
  return unit_spaced_integers() &&
         std::all_of(axes.begin(), axes.end(), [](const auto& a) { return a.front() == 1.0; });
}

void FieldSample::validate() const {
  if (n_reps < 1) throw ParameterError("field sample needs at least one replicate");
  if (components < 1) throw ParameterError("field sample needs at least one component");
  if (values.size() != n_reps * points.size() * components) {
    throw ParameterError("field sample value buffer has the wrong size");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ParameterError("field sample contains non-finite values");
  }
  if (grid && grid->size() != points.size()) throw ParameterError("field sample grid does not match its points");
}

// --- dense sampling --------------------------------------------------------------------------

GaussianFactor factorize_gram(const Mat& gram) {
  const auto n = gram.rows();
  if (n == 0) return {Mat(0, 0), 0.0};
  if (!gram.allFinite()) throw NumericError("Gram matrix has non-finite entries");
  const double trace = gram.trace();
  const double unit = (trace > 0.0 ? trace : 1.0) / static_cast<double>(n);

  double jitter = 0.0;
  for (int attempt = 0; attempt <= 4; ++attempt) {
    if (attempt > 0) jitter = 1e-10 * unit * std::pow(100.0, attempt - 1);
    Mat a = gram;
    a.diagonal().array() += jitter;
    Eigen::LLT<Mat> llt(a);
    if (llt.info() == Eigen::Success) {
      Mat lower = llt.matrixL();
      if (lower.allFinite()) return {std::move(lower), jitter};
    }
  }
  throw NumericError("Gram matrix is not positive semidefinite after 3 jitter escalations "
                     "(largest jitter " + format_double(jitter) + ")");
}

FieldSample sample_gaussian_field(const CovarianceFn& cov, const Metadata& kernel_metadata,
                                  const std::vector<Vec>& points, std::size_t n_reps,
                                  std::uint64_t seed) {
  if (n_reps < 1) throw ParameterError("n_reps must be >= 1");
  if (points.empty()) throw ParameterError("need at least one point");
  const GaussianFactor factor = factorize_gram(gram_matrix(cov, points));
  const auto n = static_cast<Eigen::Index>(points.size());

  FieldSample out;
  out.points = points;
  out.n_reps = n_reps;
  out.components = 1;
  out.values.resize(n_reps * points.size());
  Vec z(n);
  for (std::size_t r = 0; r < n_reps; ++r) {
    auto gen = substream(seed, r);
    fill_standard_normal(gen, {z.data(), static_cast<std::size_t>(n)});
    Eigen::Map<Vec> dst(out.values.data() + r * points.size(), n);
    dst.noalias() = factor.lower.triangularView<Eigen::Lower>() * z;
  }
  out.metadata = kernel_metadata;
  out.metadata.set("seed", std::to_string(seed));
  out.metadata.set("n_reps", std::to_string(n_reps));
  out.metadata.set("generator", "dense-cholesky");
  out.metadata.set("jitter", format_double(factor.jitter));
  return out;
}

FieldSample sample_gaussian_field(const CovarianceKernel& kernel, const std::vector<Vec>& points,
                                  std::size_t n_reps, std::uint64_t seed) {
  return sample_gaussian_field(kernel.as_function(), kernel.metadata(), points, n_reps, seed);
}

// --- lattice sampling ---------------------------------------------------------------------------

LatticeSampler::LatticeSampler(const CovarianceKernel& kernel, LatticeGrid grid)
    : kernel_(kernel), grid_(std::move(grid)) {
  if (!kernel_.stationary()) throw ParameterError("lattice sampler needs a stationary kernel");
  if (!grid_.unit_spaced_integers()) throw ParameterError("lattice sampler needs a unit-spaced integer grid");
  if (grid_.dimension() != kernel_.dimension()) throw ParameterError("grid and kernel dimensions differ");

  if (kernel_.kind() == CovarianceKernel::Kind::white_noise) {
    generator_ = "iid";
    return;
  }
  if (grid_.dimension() == 2) {
    const auto shape = grid_.shape();
    for (std::size_t pad : {2u, 4u}) {
      if (try_circulant(pad * shape[0], pad * shape[1])) {
        generator_ = "circulant";
        return;
      }
    }
  }
  const GaussianFactor f = factorize_gram(gram_matrix(kernel_, grid_.points()));
  lower_ = f.lower;
  jitter_ = f.jitter;
  generator_ = "dense-cholesky";
}

LatticeSampler::~LatticeSampler() {
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

bool LatticeSampler::try_circulant(std::size_t m1, std::size_t m2) {
  const std::size_t total = m1 * m2;
  std::vector<std::complex<double>> buf(total);
  for (std::size_t k = 0; k < m1; ++k) {
    const long lk = k <= m1 / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(m1);
    for (std::size_t l = 0; l < m2; ++l) {
      const long ll = l <= m2 / 2 ? static_cast<long>(l) : static_cast<long>(l) - static_cast<long>(m2);
      buf[k * m2 + l] = kernel_.lag(lk, ll);
    }
  }
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(m1), static_cast<int>(m2), data, data, FFTW_FORWARD,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  // FFTW_ESTIMATE planning leaves the buffer untouched, so no refill is needed.
  fftw_execute(plan);

  double lmin = buf[0].real(), lmax = buf[0].real();
  for (const auto& c : buf) {
    lmin = std::min(lmin, c.real());
    lmax = std::max(lmax, c.real());
  }
  min_eigenvalue_ = lmin;
  if (lmin < -1e-10 * lmax) {
    fftw_destroy_plan(plan);
    return false;
  }
  sqrt_eigen_.resize(total);
  for (std::size_t j = 0; j < total; ++j) {
    sqrt_eigen_[j] = std::sqrt(std::max(buf[j].real(), 0.0) / static_cast<double>(total));
  }
  m1_ = m1;
  m2_ = m2;
  plan_ = plan;
  return true;
}

void LatticeSampler::draw_pair(std::uint64_t seed, std::uint64_t pair, std::span<double> even,
                               std::span<double> odd) const {
  const std::size_t n = grid_.size();
  if (even.size() != n || odd.size() != n) throw ParameterError("output buffers do not match the grid");
  if (generator_ == "iid") {
    auto g0 = substream(seed, 2 * pair);
    fill_standard_normal(g0, even);
    auto g1 = substream(seed, 2 * pair + 1);
    fill_standard_normal(g1, odd);
    return;
  }
  if (generator_ == "dense-cholesky") {
    const auto ni = static_cast<Eigen::Index>(n);
    Vec z(ni);
    for (std::uint64_t r = 2 * pair; r < 2 * pair + 2; ++r) {
      auto gen = substream(seed, r);
      fill_standard_normal(gen, {z.data(), n});
      Eigen::Map<Vec>((r % 2 == 0 ? even : odd).data(), ni).noalias() =
          lower_.triangularView<Eigen::Lower>() * z;
    }
    return;
  }
  // Circulant: real and imaginary parts of one transform are independent draws.
  const std::size_t total = m1_ * m2_;
  std::vector<double> z(2 * total);
  auto gen = substream(seed, pair);
  fill_standard_normal(gen, z);
  std::vector<std::complex<double>> buf(total);
  for (std::size_t j = 0; j < total; ++j) buf[j] = sqrt_eigen_[j] * std::complex<double>(z[2 * j], z[2 * j + 1]);
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_), data, data);
  const auto shape = grid_.shape();
  for (std::size_t i = 0; i < shape[0]; ++i) {
    for (std::size_t j = 0; j < shape[1]; ++j) {
      const auto& c = buf[i * m2_ + j];
      even[i * shape[1] + j] = c.real();
      odd[i * shape[1] + j] = c.imag();
    }
  }
}

void LatticeSampler::draw(std::uint64_t seed, std::uint64_t rep, std::span<double> out) const {
  std::vector<double> other(out.size());
  if (rep % 2 == 0) {
    draw_pair(seed, rep / 2, out, other);
  } else {
    draw_pair(seed, rep / 2, other, out);
  }
}

FieldSample sample_stationary_lattice(const CovarianceKernel& kernel, const LatticeGrid& grid,
                                      std::size_t n_reps, std::uint64_t seed) {
  if (n_reps < 1) throw ParameterError("n_reps must be >= 1");
  LatticeSampler sampler(kernel, grid);
  const std::size_t n = grid.size();

  FieldSample out;
  out.points = grid.points();
  out.grid = grid;
  out.n_reps = n_reps;
  out.components = 1;
  out.values.resize(n_reps * n);
  std::vector<double> spill(n);
  for (std::size_t pair = 0; 2 * pair < n_reps; ++pair) {
    std::span<double> even(out.values.data() + 2 * pair * n, n);
    std::span<double> odd = 2 * pair + 1 < n_reps ? std::span<double>(out.values.data() + (2 * pair + 1) * n, n)
                                                  : std::span<double>(spill);
    sampler.draw_pair(seed, pair, even, odd);
  }
  out.metadata = kernel.metadata();
  out.metadata.set("seed", std::to_string(seed));
  out.metadata.set("n_reps", std::to_string(n_reps));
  out.metadata.set("generator", sampler.generator());
  if (sampler.generator() == "dense-cholesky") out.metadata.set("jitter", format_double(sampler.jitter()));
  return out;
}

}  // namespace lamperti::fields
