#include "lamperti/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lamperti::transform {

// --- exponent and group types ----------------------------------------------------

HurstMatrix::HurstMatrix(Mat entries) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.cols() == 0) throw ParameterError("Hurst matrix must be non-empty");
  if (!entries_.allFinite()) throw ParameterError("Hurst matrix entries must be finite");
  if (entries_.minCoeff() < 0.0) throw ParameterError("Hurst matrix entries must be >= 0");
}

HurstMatrix HurstMatrix::row(const Vec& h) { return HurstMatrix(Mat(h.transpose())); }

HurstMatrix HurstMatrix::parse(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::vector<double> r;
    std::stringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) r.push_back(parse_double(cell));
    if (r.empty()) throw ParameterError("empty row in Hurst matrix '" + text + "'");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParameterError("empty Hurst matrix");
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != rows.front().size()) throw ParameterError("Hurst matrix rows differ in length");
    for (std::size_t i = 0; i < rows[j].size(); ++i) {
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rows[j][i];
    }
  }
  return HurstMatrix(std::move(m));
}

std::string HurstMatrix::to_string() const {
  std::string out;
  for (Eigen::Index j = 0; j < entries_.rows(); ++j) {
    if (j) out += ';';
    for (Eigen::Index i = 0; i < entries_.cols(); ++i) {
      if (i) out += ',';
      out += format_double(entries_(j, i));
    }
  }
  return out;
}

DiagonalGroupElement::DiagonalGroupElement(Vec entries) : a(std::move(entries)) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0) || !std::isfinite(a[i])) throw ParameterError("group element entries must be positive");
  }
}

DiagonalGroupElement DiagonalGroupElement::identity(std::size_t d) {
  return DiagonalGroupElement(Vec::Ones(static_cast<Eigen::Index>(d)));
}

DiagonalGroupElement DiagonalGroupElement::operator*(const DiagonalGroupElement& other) const {
  if (a.size() != other.a.size()) throw ParameterError("group elements differ in dimension");
  return DiagonalGroupElement(a.cwiseProduct(other.a));
}

DiagonalGroupElement DiagonalGroupElement::inverse() const { return DiagonalGroupElement(a.cwiseInverse()); }

Vec CocycleSpec::operator()(const DiagonalGroupElement& g) const {
  if (static_cast<std::size_t>(g.a.size()) != hurst_.dimension()) {
    throw ParameterError("group element dimension does not match the Hurst matrix");
  }
  const Vec log_a = g.a.array().log().matrix();
  return (hurst_.entries() * log_a).array().exp().matrix();
}

// --- time changes ------------------------------------------------------------------

Vec TimeChange::to_time(const Vec& s) const {
  switch (kind) {
    case Kind::exp_orthant:
      return s.array().exp().matrix();
    case Kind::polar_plane: {
      if (s.size() != 2) throw ParameterError("polar time change works on the plane");
      const double r = std::exp(s[0]);
      return Eigen::Vector2d(r * std::cos(s[1]), r * std::sin(s[1]));
    }
  }
  return s;
}

Vec TimeChange::to_stationary(const Vec& t) const {
  switch (kind) {
    case Kind::exp_orthant:
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!(t[i] > 0.0)) throw DomainError("exp-orthant time change needs coordinates > 0");
      }
      return t.array().log().matrix();
    case Kind::polar_plane: {
      if (t.size() != 2) throw ParameterError("polar time change works on the plane");
      const double rho = std::hypot(t[0], t[1]);
      if (!(rho > 0.0)) throw DomainError("polar time change is undefined at the origin");
      // atan2 returns [-pi, pi]; fold -pi (negative zero imaginary part) onto +pi.
      double theta = std::atan2(t[1], t[0]);
      if (theta == -std::numbers::pi) theta = std::numbers::pi;
      return Eigen::Vector2d(std::log(rho), theta);
    }
  }
  return t;
}

const char* frame_name(Frame f) { return f == Frame::time_domain ? "time" : "stationary"; }

Frame parse_frame(const std::string& name) {
  if (name == "time") return Frame::time_domain;
  if (name == "stationary") return Frame::stationary_domain;
  throw ParameterError("unknown frame '" + name + "'");
}

// --- checks ---------------------------------------------------------------------------

double check_cocycle(const CocycleSpec& c, const DiagonalGroupElement& g1, const DiagonalGroupElement& g2) {
  const Vec joint = c(g1 * g2);
  const Vec split = c(g1).cwiseProduct(c(g2));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < joint.size(); ++j) {
    worst = std::max(worst, std::abs(joint[j] - split[j]) / std::abs(joint[j]));
  }
  return worst;
}

Prop6Residuals check_prop6_conditions(const CocycleSpec& c, const TimeChange& phi, const Vec& h, const Vec& s) {
  if (phi.kind != TimeChange::Kind::exp_orthant) {
    throw UnsupportedError("the group construction is only instantiated for the exp-orthant time change");
  }
  if (h.size() != s.size() || static_cast<std::size_t>(s.size()) != c.hurst().dimension()) {
    throw ParameterError("shift, point and Hurst matrix dimensions differ");
  }
  const auto group_of = [](const Vec& x) { return DiagonalGroupElement(x.array().exp().matrix()); };
  // f(s) = C(F(s))^{-1} = C(F(s)^{-1}).
  const auto f = [&](const Vec& x) { return c(group_of(x).inverse()); };

  Prop6Residuals res;
  const Vec lhs2 = group_of(h).act(phi.to_time(s));
  const Vec rhs2 = phi.to_time(s + h);
  res.cond2 = ((lhs2 - rhs2).array().abs() / rhs2.array().abs()).maxCoeff();

  const Vec lhs1 = f(s + h).cwiseProduct(c(group_of(h)));
  const Vec rhs1 = f(s);
  res.cond1 = ((lhs1 - rhs1).array().abs() / rhs1.array().abs()).maxCoeff();
  return res;
}

double check_wmss_shift_equation(const Vec& h_row, double shift_d,
                                 const std::vector<std::pair<Vec, Vec>>& pairs) {
  const auto f = [&](const Vec& a) {
    double v = 1.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) v *= std::pow(a[i], h_row[i]);
    return v;
  };
  const auto g = [&](const Vec& a) { return shift_d * (1.0 - f(a)); };
  double worst = 0.0;
  for (const auto& [a, b] : pairs) {
    if (a.size() != h_row.size() || b.size() != h_row.size()) throw ParameterError("pair dimension mismatch");
    DiagonalGroupElement ga(a), gb(b);  // validates positivity
    worst = std::max(worst, std::abs(g(a.cwiseProduct(b)) - (g(a) + g(b) * f(a))));
  }
  return worst;
}

// --- path transforms ------------------------------------------------------------------------

namespace {

void require_frame(const PathOnGrid& p, Frame expected) {
  if (p.frame != expected) {
    throw ParameterError(std::string("path is in the ") + frame_name(p.frame) + " frame, expected " +
                         frame_name(expected));
  }
  if (static_cast<std::size_t>(p.values.rows()) != p.points.size()) {
    throw ParameterError("path values do not match its points");
  }
}

// Maps points and multiplies each value (point p, component j) by scale(p, j).
struct PointMap {
  std::vector<Vec> points;
  Mat scale;
};

PointMap mss_forward_map(const std::vector<Vec>& pts, const HurstMatrix& h) {
  const TimeChange phi{TimeChange::Kind::exp_orthant};
  PointMap m;
  m.scale.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(h.components()));
  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (static_cast<std::size_t>(pts[p].size()) != h.dimension()) {
      throw ParameterError("point dimension does not match the Hurst matrix");
    }
    const Vec s = phi.to_stationary(pts[p]);
    m.scale.row(static_cast<Eigen::Index>(p)) = (-(h.entries() * s)).array().exp().matrix().transpose();
    m.points.push_back(s);
  }
  return m;
}

PointMap mss_inverse_map(const std::vector<Vec>& pts, const HurstMatrix& h) {
  const TimeChange phi{TimeChange::Kind::exp_orthant};
  PointMap m;
  m.scale.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(h.components()));
  for (std::size_t p = 0; p < pts.size(); ++p) {
    if (static_cast<std::size_t>(pts[p].size()) != h.dimension()) {
      throw ParameterError("point dimension does not match the Hurst matrix");
    }
    m.scale.row(static_cast<Eigen::Index>(p)) = (h.entries() * pts[p]).array().exp().matrix().transpose();
    m.points.push_back(phi.to_time(pts[p]));
  }
  return m;
}

PointMap polar_forward_map(const std::vector<Vec>& pts, double hurst, std::size_t m) {
  const TimeChange phi{TimeChange::Kind::polar_plane};
  PointMap out;
  out.scale.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(m));
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const Vec s = phi.to_stationary(pts[p]);
    out.scale.row(static_cast<Eigen::Index>(p)).setConstant(std::exp(-s[0] * hurst));
    out.points.push_back(s);
  }
  return out;
}

PointMap polar_inverse_map(const std::vector<Vec>& pts, double hurst, std::size_t m) {
  const TimeChange phi{TimeChange::Kind::polar_plane};
  PointMap out;
  out.scale.resize(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(m));
  for (std::size_t p = 0; p < pts.size(); ++p) {
    out.scale.row(static_cast<Eigen::Index>(p)).setConstant(std::exp(pts[p][0] * hurst));
    out.points.push_back(phi.to_time(pts[p]));
  }
  return out;
}

void check_polar_hurst(double h) {
  if (!(h > 0.0 && h <= 1.0)) throw ParameterError("polar transform needs 0 < H <= 1");
}

void check_1d(const PathOnGrid& p, double h) {
  if (!p.points.empty() && p.points.front().size() != 1) throw ParameterError("1-D transform needs 1-D points");
  if (!(h >= 0.0) || !std::isfinite(h)) throw ParameterError("1-D transform needs H >= 0");
}

PathOnGrid apply(const PathOnGrid& in, const PointMap& m, Frame out_frame) {
  PathOnGrid out;
  out.points = m.points;
  out.values = in.values.cwiseProduct(m.scale);
  out.frame = out_frame;
  return out;
}

HurstMatrix scalar_hurst(double h, std::size_t d, std::size_t m) {
  return HurstMatrix(Mat::Constant(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d), h));
}

}  // namespace

PathOnGrid lamperti_forward_mss(const PathOnGrid& x, const HurstMatrix& hurst) {
  require_frame(x, Frame::time_domain);
  if (static_cast<std::size_t>(x.values.cols()) != hurst.components()) {
    throw ParameterError("path component count does not match the Hurst matrix");
  }
  return apply(x, mss_forward_map(x.points, hurst), Frame::stationary_domain);
}

PathOnGrid lamperti_inverse_mss(const PathOnGrid& y, const HurstMatrix& hurst) {
  require_frame(y, Frame::stationary_domain);
  if (static_cast<std::size_t>(y.values.cols()) != hurst.components()) {
    throw ParameterError("path component count does not match the Hurst matrix");
  }
  return apply(y, mss_inverse_map(y.points, hurst), Frame::time_domain);
}

PathOnGrid polar_forward_levy(const PathOnGrid& x, double hurst) {
  require_frame(x, Frame::time_domain);
  check_polar_hurst(hurst);
  return apply(x, polar_forward_map(x.points, hurst, static_cast<std::size_t>(x.values.cols())),
               Frame::stationary_domain);
}

PathOnGrid polar_inverse_levy(const PathOnGrid& y, double hurst) {
  require_frame(y, Frame::stationary_domain);
  check_polar_hurst(hurst);
  return apply(y, polar_inverse_map(y.points, hurst, static_cast<std::size_t>(y.values.cols())),
               Frame::time_domain);
}

PathOnGrid lamperti_forward_1d(const PathOnGrid& x, double hurst) {
  check_1d(x, hurst);
  return lamperti_forward_mss(x, scalar_hurst(hurst, 1, static_cast<std::size_t>(x.values.cols())));
}

PathOnGrid lamperti_inverse_1d(const PathOnGrid& y, double hurst) {
  check_1d(y, hurst);
  return lamperti_inverse_mss(y, scalar_hurst(hurst, 1, static_cast<std::size_t>(y.values.cols())));
}

// --- sample-level ----------------------------------------------------------------------------

Direction parse_direction(const std::string& name) {
  if (name == "mss-fwd") return Direction::mss_forward;
  if (name == "mss-inv") return Direction::mss_inverse;
  if (name == "polar-fwd") return Direction::polar_forward;
  if (name == "polar-inv") return Direction::polar_inverse;
  if (name == "1d-fwd") return Direction::d1_forward;
  if (name == "1d-inv") return Direction::d1_inverse;
  throw ParameterError("unknown transform direction '" + name +
                       "' (expected mss-fwd, mss-inv, polar-fwd, polar-inv, 1d-fwd, 1d-inv)");
}

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::mss_forward: return "mss-fwd";
    case Direction::mss_inverse: return "mss-inv";
    case Direction::polar_forward: return "polar-fwd";
    case Direction::polar_inverse: return "polar-inv";
    case Direction::d1_forward: return "1d-fwd";
    case Direction::d1_inverse: return "1d-inv";
  }
  return "";
}

FieldSample transform_sample(const FieldSample& sample, Direction direction, const HurstMatrix& hurst) {
  sample.validate();
  const bool forward = direction == Direction::mss_forward || direction == Direction::polar_forward ||
                       direction == Direction::d1_forward;
  const Frame in_frame = forward ? Frame::time_domain : Frame::stationary_domain;
  const Frame out_frame = forward ? Frame::stationary_domain : Frame::time_domain;
  if (auto tag = sample.metadata.get("frame"); tag && parse_frame(*tag) != in_frame) {
    throw ParameterError(std::string("sample is in the ") + *tag + " frame; " + direction_name(direction) +
                         " expects " + frame_name(in_frame));
  }

  const std::size_t m = sample.components;
  const bool scalar = direction != Direction::mss_forward && direction != Direction::mss_inverse;
  if (scalar && (hurst.components() != 1 || hurst.dimension() != 1)) {
    throw ParameterError("polar and 1-D transforms take a single Hurst exponent");
  }
  const double h = hurst.entries()(0, 0);
  const std::size_t d = sample.dimension();

  PointMap map;
  switch (direction) {
    case Direction::mss_forward:
      if (hurst.components() != m) throw ParameterError("Hurst matrix rows must equal the component count");
      map = mss_forward_map(sample.points, hurst);
      break;
    case Direction::mss_inverse:
      if (hurst.components() != m) throw ParameterError("Hurst matrix rows must equal the component count");
      map = mss_inverse_map(sample.points, hurst);
      break;
    case Direction::polar_forward:
      check_polar_hurst(h);
      map = polar_forward_map(sample.points, h, m);
      break;
    case Direction::polar_inverse:
      check_polar_hurst(h);
      map = polar_inverse_map(sample.points, h, m);
      break;
    case Direction::d1_forward:
      if (d != 1) throw ParameterError("1-D transform needs 1-D points");
      map = mss_forward_map(sample.points, scalar_hurst(h, 1, m));
      break;
    case Direction::d1_inverse:
      if (d != 1) throw ParameterError("1-D transform needs 1-D points");
      map = mss_inverse_map(sample.points, scalar_hurst(h, 1, m));
      break;
  }

  FieldSample out;
  out.points = map.points;
  out.n_reps = sample.n_reps;
  out.components = m;
  out.values.resize(sample.values.size());
  const std::size_t np = sample.n_points();
  for (std::size_t r = 0; r < sample.n_reps; ++r) {
    for (std::size_t p = 0; p < np; ++p) {
      for (std::size_t c = 0; c < m; ++c) {
        out.at(r, p, c) = sample.at(r, p, c) * map.scale(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c));
      }
    }
  }
  out.metadata = sample.metadata;
  out.metadata.set("frame", frame_name(out_frame));
  out.metadata.set("transform", direction_name(direction));
  out.metadata.set("transform_hurst", hurst.to_string());
  return out;
}

// --- kernels ---------------------------------------------------------------------------------

CovarianceFn pushforward_mss(CovarianceFn time_cov, Vec h) {
  return [cov = std::move(time_cov), h = std::move(h)](const Vec& s, const Vec& u) {
    const double w = std::exp(-h.dot(s + u));
    return w * cov(s.array().exp().matrix(), u.array().exp().matrix());
  };
}

CovarianceFn pullback_mss(CovarianceFn stationary_cov, Vec h) {
  return [cov = std::move(stationary_cov), h = std::move(h)](const Vec& t, const Vec& u) {
    const TimeChange phi{TimeChange::Kind::exp_orthant};
    const Vec s = phi.to_stationary(t);
    const Vec v = phi.to_stationary(u);
    return std::exp(h.dot(s + v)) * cov(s, v);
  };
}

CovarianceFn pushforward_polar(CovarianceFn time_cov, double hurst) {
  return [cov = std::move(time_cov), hurst](const Vec& s, const Vec& u) {
    const TimeChange phi{TimeChange::Kind::polar_plane};
    return std::exp(-hurst * (s[0] + u[0])) * cov(phi.to_time(s), phi.to_time(u));
  };
}

CovarianceFn pullback_polar(CovarianceFn stationary_cov, double hurst) {
  return [cov = std::move(stationary_cov), hurst](const Vec& t, const Vec& u) {
    const double rt = std::hypot(t[0], t[1]);
    const double ru = std::hypot(u[0], u[1]);
    if (rt == 0.0 || ru == 0.0) return 0.0;
    const TimeChange phi{TimeChange::Kind::polar_plane};
    return std::pow(rt * ru, hurst) * cov(phi.to_stationary(t), phi.to_stationary(u));
  };
}

}  // namespace lamperti::transform
