#include "lamperti/attraction.hpp"
#include "lamperti/regvar.hpp"
#include "lamperti/statcheck.hpp"
#include "lamperti/transform.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace lamperti;
using fields::CovarianceKernel;
using fields::FieldSample;

namespace {

// Rows of an n x d array as points.
std::vector<Vec> rows_of(const Mat& points) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) out.push_back(points.row(i).transpose());
  return out;
}

Mat stack(const std::vector<Vec>& points) {
  Mat out(static_cast<Eigen::Index>(points.size()), points.empty() ? 0 : points.front().size());
  for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return out;
}

// Replicates as rows, points as columns (scalar fields).
Mat values_of(const FieldSample& s) {
  Mat out(static_cast<Eigen::Index>(s.n_reps), static_cast<Eigen::Index>(s.n_points()));
  for (std::size_t r = 0; r < s.n_reps; ++r) {
    for (std::size_t p = 0; p < s.n_points(); ++p) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = s.at(r, p);
  }
  return out;
}

FieldSample sample_of(const Mat& points, const Mat& values) {
  if (values.cols() != points.rows()) throw ParameterError("values need one column per point");
  FieldSample s;
  s.points = rows_of(points);
  s.n_reps = static_cast<std::size_t>(values.rows());
  s.values.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index p = 0; p < values.cols(); ++p) s.values.push_back(values(r, p));
  }
  return s;
}

py::dict dict_of(const fields::Metadata& md) {
  py::dict d;
  for (const auto& [k, v] : md.entries()) d[py::str(k)] = v;
  return d;
}

py::dict report_dict(const statcheck::TestReport& r) {
  py::dict d;
  d["test"] = r.test;
  d["statistic"] = r.statistic;
  d["threshold"] = r.threshold;
  d["p_value"] = r.p_value ? py::object(py::float_(*r.p_value)) : py::object(py::none());
  d["pass"] = r.pass;
  d["details"] = dict_of(r.details);
  return d;
}

std::pair<Mat, Mat> path_result(const transform::PathOnGrid& p) { return {stack(p.points), p.values}; }

transform::PathOnGrid path_of(const Mat& points, const Mat& values, transform::Frame frame) {
  transform::PathOnGrid p;
  p.points = rows_of(points);
  p.values = values;
  p.frame = frame;
  return p;
}

}  // namespace

PYBIND11_MODULE(_lamperti, m) {
  m.doc() = "Lamperti transforms, self-similar Gaussian fields and partial-sum diagnostics";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<RangeError>(m, "RangeError", PyExc_IndexError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<CovarianceKernel>(m, "Kernel")
      .def_static("levy_fbm", &CovarianceKernel::levy_fbm, py::arg("hurst"), py::arg("dimension") = 2)
      .def_static("fbm_sheet", &CovarianceKernel::fbm_sheet, py::arg("h"))
      .def_static("polar_stationary", &CovarianceKernel::polar_stationary, py::arg("hurst"))
      .def_static("lattice_isotropic_lrd", &CovarianceKernel::lattice_isotropic_lrd, py::arg("q"))
      .def_static(
          "lattice_separable",
          [](const std::string& r1, const std::string& r2) {
            return CovarianceKernel::lattice_separable(fields::LatticeCov1d::parse(r1), fields::LatticeCov1d::parse(r2));
          },
          py::arg("r1"), py::arg("r2"))
      .def_static("white_noise", &CovarianceKernel::white_noise, py::arg("dimension") = 2)
      .def("__call__", &CovarianceKernel::operator(), py::arg("t"), py::arg("u"))
      .def("gram", [](const CovarianceKernel& k, const Mat& points) { return fields::gram_matrix(k, rows_of(points)); })
      .def("lag", &CovarianceKernel::lag, py::arg("k"), py::arg("l"))
      .def_property_readonly("stationary", &CovarianceKernel::stationary)
      .def("metadata", [](const CovarianceKernel& k) { return dict_of(k.metadata()); });

  m.def("covariance_R", &fields::covariance_R, py::arg("v"), py::arg("hurst"));

  m.def(
      "sample_gaussian_field",
      [](const CovarianceKernel& k, const Mat& points, std::size_t n_reps, std::uint64_t seed) {
        return values_of(fields::sample_gaussian_field(k, rows_of(points), n_reps, seed));
      },
      py::arg("kernel"), py::arg("points"), py::arg("n_reps"), py::arg("seed"),
      "Returns an n_reps x n_points array.");
  m.def(
      "sample_stationary_lattice",
      [](const CovarianceKernel& k, std::vector<std::size_t> shape, std::size_t n_reps, std::uint64_t seed) {
        const auto s = fields::sample_stationary_lattice(k, fields::LatticeGrid::integer(shape), n_reps, seed);
        return py::make_tuple(values_of(s), s.metadata.require("generator"));
      },
      py::arg("kernel"), py::arg("shape"), py::arg("n_reps"), py::arg("seed"),
      "Returns (n_reps x prod(shape) array in row-major lattice order, generator name).");

  m.def(
      "mss_forward",
      [](const Mat& points, const Mat& values, const Mat& hurst) {
        return path_result(transform::lamperti_forward_mss(path_of(points, values, transform::Frame::time_domain),
                                                           transform::HurstMatrix(hurst)));
      },
      py::arg("points"), py::arg("values"), py::arg("hurst"));
  m.def(
      "mss_inverse",
      [](const Mat& points, const Mat& values, const Mat& hurst) {
        return path_result(transform::lamperti_inverse_mss(
            path_of(points, values, transform::Frame::stationary_domain), transform::HurstMatrix(hurst)));
      },
      py::arg("points"), py::arg("values"), py::arg("hurst"));
  m.def(
      "polar_forward",
      [](const Mat& points, const Mat& values, double h) {
        return path_result(transform::polar_forward_levy(path_of(points, values, transform::Frame::time_domain), h));
      },
      py::arg("points"), py::arg("values"), py::arg("hurst"));
  m.def(
      "polar_inverse",
      [](const Mat& points, const Mat& values, double h) {
        return path_result(transform::polar_inverse_levy(path_of(points, values, transform::Frame::stationary_domain), h));
      },
      py::arg("points"), py::arg("values"), py::arg("hurst"));
  m.def("cocycle", [](const Mat& hurst, const Vec& a) { return transform::CocycleSpec(transform::HurstMatrix(hurst))(transform::DiagonalGroupElement(a)); },
        py::arg("hurst"), py::arg("a"));

  m.def(
      "exact_sum_variance",
      [](const CovarianceKernel& k, long n, long mm) { return attraction::exact_sum_variance(k, n, mm); },
      py::arg("kernel"), py::arg("n"), py::arg("m"));
  m.def(
      "fit_normalization_exponent",
      [](const CovarianceKernel& k, double gamma, const std::vector<long>& n_list) {
        const auto f = attraction::fit_normalization_exponent(k, gamma, n_list);
        py::dict d;
        d["h_hat"] = f.h_hat;
        d["r_squared"] = f.r_squared;
        d["stderr"] = f.stderr_h;
        d["n"] = f.n;
        d["m"] = f.m;
        d["variance"] = f.variance;
        return d;
      },
      py::arg("kernel"), py::arg("gamma"), py::arg("n_list"));

  m.def(
      "compare_gaussian_fdd",
      [](const Mat& points, const Mat& values, const CovarianceKernel& k, double k_sigma) {
        return report_dict(statcheck::compare_gaussian_fdd(sample_of(points, values), k, k_sigma));
      },
      py::arg("points"), py::arg("values"), py::arg("kernel"), py::arg("k_sigma") = 3.0);
  m.def(
      "energy_distance_test",
      [](const Mat& points, const Mat& a, const Mat& b, std::size_t n_perm, double alpha, std::uint64_t seed) {
        return report_dict(statcheck::energy_distance_test(sample_of(points, a), sample_of(points, b), n_perm, alpha, seed));
      },
      py::arg("points"), py::arg("a"), py::arg("b"), py::arg("n_perm") = 999, py::arg("alpha") = 0.01,
      py::arg("seed") = 0);

  m.def("matrix_power", &regvar::matrix_power, py::arg("d"), py::arg("r"), "r^D = exp(ln r D)");
}
