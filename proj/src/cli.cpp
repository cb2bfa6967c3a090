#include "lamperti/cli.hpp"

#include "lamperti/attraction.hpp"
#include "lamperti/field_io.hpp"
#include "lamperti/regvar.hpp"
#include "lamperti/statcheck.hpp"
#include "lamperti/transform.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

namespace lamperti::cli {

namespace {

using fields::CovarianceKernel;
using fields::FieldSample;
using fields::Metadata;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> xs;
  for (const auto& s : split(text, ',')) xs.push_back(parse_double(s));
  if (xs.empty()) throw ParameterError("empty list '" + text + "'");
  return xs;
}

Vec parse_vec(const std::string& text) {
  const auto xs = parse_list(text);
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

std::vector<long> parse_longs(const std::string& text) {
  std::vector<long> out;
  for (double x : parse_list(text)) {
    if (x != std::floor(x)) throw ParameterError("expected integers in '" + text + "'");
    out.push_back(static_cast<long>(x));
  }
  return out;
}

/// "x,y;x,y;..."
std::vector<Vec> parse_point_list(const std::string& text) {
  std::vector<Vec> pts;
  for (const auto& p : split(text, ';')) pts.push_back(parse_vec(p));
  if (pts.empty()) throw ParameterError("empty point list");
  for (const auto& p : pts) {
    if (p.size() != pts.front().size()) throw ParameterError("points differ in dimension");
  }
  return pts;
}

/// "circle:N" (N equally spaced points on the unit circle) or an explicit list.
std::vector<Vec> parse_points(const std::string& spec) {
  if (spec.rfind("circle:", 0) == 0) {
    const auto n = std::stol(spec.substr(7));
    if (n < 1) throw ParameterError("circle:N needs N >= 1");
    std::vector<Vec> pts;
    for (long k = 0; k < n; ++k) {
      const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      Vec p(2);
      p << std::cos(th), std::sin(th);
      pts.push_back(p);
    }
    return pts;
  }
  if (spec.rfind("list:", 0) == 0) return parse_point_list(spec.substr(5));
  return parse_point_list(spec);
}

/// "64x64" -> {64, 64}
std::vector<std::size_t> parse_grid(const std::string& spec) {
  std::vector<std::size_t> sizes;
  for (const auto& s : split(spec, 'x')) {
    const double v = parse_double(s);
    if (v < 1 || v != std::floor(v)) throw ParameterError("grid sizes must be positive integers: '" + spec + "'");
    sizes.push_back(static_cast<std::size_t>(v));
  }
  if (sizes.empty()) throw ParameterError("empty grid spec");
  return sizes;
}

std::vector<Vec> default_points() {
  return parse_point_list("0.5,0.5;1,0.25;1,1;2,0.5;0.3,1.7;1.5,2");
}

struct ModelOptions {
  std::string model;
  double hurst = 0.5;
  std::string h = "0.5,0.5";
  double q = 1.0;
  std::string r1 = "delta";
  std::string r2 = "delta";
  std::size_t dimension = 2;

  void add(CLI::App& app, bool required) {
    auto* m = app.add_option("--model", model, "white-noise|levy-fbm|fbm-sheet|polar-stationary|lattice-lrd|lattice-separable");
    if (required) m->required();
    app.add_option("--hurst", hurst, "H for levy-fbm and polar-stationary");
    app.add_option("--h", h, "fbm-sheet exponents, comma separated");
    app.add_option("--q", q, "lattice-lrd decay exponent in (0,2)");
    app.add_option("--r1", r1, "lattice-separable axis-1 covariance: delta|geom:RHO|fgn:H");
    app.add_option("--r2", r2, "lattice-separable axis-2 covariance");
  }

  CovarianceKernel kernel() const {
    if (model == "white-noise") return CovarianceKernel::white_noise(dimension);
    if (model == "levy-fbm") return CovarianceKernel::levy_fbm(hurst, dimension);
    if (model == "fbm-sheet") return CovarianceKernel::fbm_sheet(parse_vec(h));
    if (model == "polar-stationary") return CovarianceKernel::polar_stationary(hurst);
    if (model == "lattice-lrd") return CovarianceKernel::lattice_isotropic_lrd(q);
    if (model == "lattice-separable") {
      return CovarianceKernel::lattice_separable(fields::LatticeCov1d::parse(r1), fields::LatticeCov1d::parse(r2));
    }
    throw ParameterError("unknown model '" + model + "'");
  }
};

// Every option with its resolved value, under config.<name>.
Metadata resolved_config(const CLI::App& app) {
  Metadata md;
  md.set("config.command", app.get_name());
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? " " : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    md.set("config." + name, value);
  }
  return md;
}

// key=value lines become --key value arguments ahead of the command line, so
// explicit flags win. Unknown keys are rejected.
std::vector<std::string> expand_config(const std::string& path, const CLI::App& sub) {
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot read config file '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("config line without '=': " + line);
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "command") {
      if (value != sub.get_name()) throw ParameterError("config is for command '" + value + "'");
      continue;
    }
    if (key == "config" || sub.get_option_no_throw("--" + key) == nullptr) {
      throw ParameterError("unknown config key '" + key + "' for command '" + sub.get_name() + "'");
    }
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path == "-") {
    out << content;
    out.flush();
  } else {
    fields::write_text_atomically(path, content);
  }
}

FieldSample read_sample(const std::string& path) {
  if (path == "-") return fields::read_field_sample(std::cin);
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot read '" + path + "'");
  return fields::read_field_sample(f);
}

std::string format_reports(const std::vector<statcheck::TestReport>& reports, const std::string& format,
                           const Metadata& config) {
  std::ostringstream ss;
  if (format == "json") {
    statcheck::write_reports_jsonl(ss, reports);
  } else {
    for (const auto& [k, v] : config.entries()) ss << "# " << k << '=' << v << '\n';
    statcheck::write_reports_csv(ss, reports);
  }
  return ss.str();
}

std::string experiment_text(const Metadata& md, const std::vector<attraction::ExperimentRow>& rows) {
  std::ostringstream ss;
  attraction::write_experiment_csv(ss, md, rows);
  return ss.str();
}

// --- simulate ------------------------------------------------------------------------------

struct SimulateCmd {
  ModelOptions model;
  std::string grid, points, out = "-";
  std::size_t reps = 0;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    model.add(app, true);
    app.add_option("--grid", grid, "integer lattice 1..N per axis, e.g. 64x64");
    app.add_option("--points", points, "circle:N or x,y;x,y;...");
    app.add_option("--reps", reps, "number of replicates")->required();
    app.add_option("--seed", seed, "random seed")->required();
    app.add_option("--out", out, "output path, - for stdout");
  }

  int run(const CLI::App& app, std::ostream& out_stream) {
    if (grid.empty() == points.empty()) throw ParameterError("give exactly one of --grid or --points");
    if (reps == 0) throw ParameterError("--reps must be >= 1");
    FieldSample sample;
    if (!grid.empty()) {
      const fields::LatticeGrid lattice = fields::LatticeGrid::integer(parse_grid(grid));
      model.dimension = lattice.dimension();
      const CovarianceKernel k = model.kernel();
      if (k.stationary() && (lattice.dimension() == 2 || k.kind() == CovarianceKernel::Kind::white_noise)) {
        sample = fields::sample_stationary_lattice(k, lattice, reps, seed);
      } else {
        sample = fields::sample_gaussian_field(k, lattice.points(), reps, seed);
        sample.grid = lattice;
      }
    } else {
      const auto pts = parse_points(points);
      model.dimension = static_cast<std::size_t>(pts.front().size());
      sample = fields::sample_gaussian_field(model.kernel(), pts, reps, seed);
    }
    sample.metadata.merge(resolved_config(app));
    std::ostringstream ss;
    fields::write_field_sample(ss, sample);
    emit(out, ss.str(), out_stream);
    return exit_pass;
  }
};

// --- transform -----------------------------------------------------------------------------

struct TransformCmd {
  std::string direction, in, hurst, hurst_matrix, out = "-";

  void add(CLI::App& app) {
    app.add_option("--direction", direction, "mss-fwd|mss-inv|polar-fwd|polar-inv|1d-fwd|1d-inv")->required();
    app.add_option("--in", in, "input FieldSample CSV, - for stdin")->required();
    app.add_option("--hurst", hurst, "H (polar, 1-D) or one exponent row h1,h2,... (mss)");
    app.add_option("--hurst-matrix", hurst_matrix, "mss exponents h11,h12;h21,h22");
    app.add_option("--out", out, "output path, - for stdout");
  }

  int run(const CLI::App& app, std::ostream& out_stream) {
    if (hurst.empty() == hurst_matrix.empty()) throw ParameterError("give exactly one of --hurst or --hurst-matrix");
    const auto dir = transform::parse_direction(direction);
    const transform::HurstMatrix h = transform::HurstMatrix::parse(hurst.empty() ? hurst_matrix : hurst);
    FieldSample result = transform::transform_sample(read_sample(in), dir, h);
    result.metadata.merge(resolved_config(app));
    std::ostringstream ss;
    fields::write_field_sample(ss, result);
    emit(out, ss.str(), out_stream);
    return exit_pass;
  }
};

// --- verify ------------------------------------------------------------------------------

struct VerifyCmd {
  std::string check;
  ModelOptions model;
  std::string scale = "2,2", shift = "1,0", hurst_matrix, claim_hurst, points, mode = "kernel";
  std::string pushforward = "none", format = "csv", out = "-";
  double shift_d = 1.0;
  double tol = 1e-12;
  std::size_t reps = 2000, n_perm = 199;
  double alpha = 0.01;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    app.add_option("check", check, "self-similar|stationary|cocycle|prop6|wmss-shift")
        ->required()
        ->check(CLI::IsMember({"self-similar", "stationary", "cocycle", "prop6", "wmss-shift"}));
    model.add(app, false);
    app.add_option("--scale", scale, "group element a for self-similar");
    app.add_option("--shift", shift, "shift h for stationary");
    app.add_option("--hurst-matrix", hurst_matrix, "exponent matrix for cocycle, prop6, wmss-shift");
    app.add_option("--claim-hurst", claim_hurst, "claimed exponent row (one value for levy-fbm)");
    app.add_option("--D", shift_d, "D_j = X_j(0) for wmss-shift");
    app.add_option("--points", points, "points to test on (default: six points in the open quadrant)");
    app.add_option("--pushforward", pushforward, "none|mss|polar: check the Lamperti image of the model")
        ->check(CLI::IsMember({"none", "mss", "polar"}));
    app.add_option("--mode", mode, "kernel|sample")->check(CLI::IsMember({"kernel", "sample"}));
    app.add_option("--tol", tol, "relative tolerance for kernel-exact checks");
    app.add_option("--reps", reps, "replicates per side in sample mode");
    app.add_option("--n-perm", n_perm, "permutations in sample mode");
    app.add_option("--alpha", alpha, "level of the energy test in sample mode");
    app.add_option("--seed", seed, "random seed for sample mode");
    app.add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--out", out, "output path, - for stdout");
  }

  transform::HurstMatrix require_hurst_matrix() const {
    if (hurst_matrix.empty()) throw ParameterError("--hurst-matrix is required for " + check);
    return transform::HurstMatrix::parse(hurst_matrix);
  }

  // Exponent row a model is claimed to scale with; defaults to its own.
  Vec claimed_row(const CovarianceKernel& k) const {
    if (!claim_hurst.empty()) {
      Vec c = parse_vec(claim_hurst);
      if (k.kind() == CovarianceKernel::Kind::levy_fbm && c.size() == 1) {
        return Vec::Constant(static_cast<Eigen::Index>(k.dimension()), c[0] / static_cast<double>(k.dimension()));
      }
      return c;
    }
    switch (k.kind()) {
      case CovarianceKernel::Kind::levy_fbm:
        return Vec::Constant(static_cast<Eigen::Index>(k.dimension()), k.hurst() / static_cast<double>(k.dimension()));
      case CovarianceKernel::Kind::fbm_sheet:
        return k.sheet_exponents();
      default:
        throw ParameterError("--claim-hurst is required for model '" + model.model + "'");
    }
  }

  fields::CovarianceFn model_function(const CovarianceKernel& k) const {
    if (pushforward == "mss") {
      const Vec row = k.kind() == CovarianceKernel::Kind::fbm_sheet ? k.sheet_exponents() : claimed_row(k);
      return transform::pushforward_mss(k.as_function(), row);
    }
    if (pushforward == "polar") return transform::pushforward_polar(k.as_function(), k.hurst());
    return k.as_function();
  }

  std::vector<statcheck::TestReport> reports() {
    std::vector<statcheck::TestReport> out_reports;
    if (check == "self-similar" || check == "stationary") {
      if (model.model.empty()) throw ParameterError("--model is required for " + check);
      const auto pts = points.empty() ? default_points() : parse_points(points);
      model.dimension = static_cast<std::size_t>(pts.front().size());
      const CovarianceKernel k = model.kernel();
      if (check == "self-similar") {
        if (pushforward != "none") throw ParameterError("--pushforward applies to the stationary check");
        const transform::DiagonalGroupElement a(parse_vec(scale));
        const transform::CocycleSpec c(transform::HurstMatrix::row(claimed_row(k)));
        out_reports.push_back(mode == "kernel"
                                  ? statcheck::check_self_similarity(k.as_function(), a, c, pts, tol)
                                  : statcheck::check_self_similarity_sampled(k, a, c, pts, reps, seed, n_perm, alpha));
      } else {
        const Vec h = parse_vec(shift);
        if (mode == "kernel") {
          out_reports.push_back(statcheck::check_stationarity(model_function(k), h, pts, tol));
        } else {
          if (pushforward != "none") throw UnsupportedError("sample mode checks the model itself");
          out_reports.push_back(statcheck::check_stationarity_sampled(k, h, pts, reps, seed, n_perm, alpha));
        }
      }
      out_reports.back().details.merge(k.metadata());
      return out_reports;
    }

    const transform::HurstMatrix hm = require_hurst_matrix();
    const std::size_t d = hm.dimension();
    const std::vector<double> levels = {0.25, 0.5, 1.0, 2.0, 3.0, 7.5};
    auto element = [&](std::size_t k) {
      Vec a(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < d; ++i) a[static_cast<Eigen::Index>(i)] = levels[(k + 2 * i) % levels.size()];
      return a;
    };
    statcheck::TestReport rep;
    rep.test = check;
    rep.threshold = tol;
    rep.details.set("hurst_matrix", hm.to_string());
    if (check == "cocycle") {
      const transform::CocycleSpec c(hm);
      for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t j = 0; j < levels.size(); ++j) {
          rep.statistic = std::max(rep.statistic, transform::check_cocycle(c, transform::DiagonalGroupElement(element(i)),
                                                                          transform::DiagonalGroupElement(element(j))));
        }
      }
    } else if (check == "prop6") {
      const transform::CocycleSpec c(hm);
      const transform::TimeChange phi{transform::TimeChange::Kind::exp_orthant};
      for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t j = 0; j < levels.size(); ++j) {
          const Vec h = element(i).array().log().matrix();
          const Vec s = element(j).array().log().matrix();
          const auto res = transform::check_prop6_conditions(c, phi, h, s);
          rep.statistic = std::max({rep.statistic, res.cond1, res.cond2});
        }
      }
    } else {
      if (hm.components() != 1) throw ParameterError("wmss-shift takes a single exponent row");
      std::vector<std::pair<Vec, Vec>> pairs;
      double scale_g = 1.0;
      const Vec row = hm.component(0);
      for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t j = 0; j < levels.size(); ++j) {
          pairs.emplace_back(element(i), element(j));
          const Vec ab = element(i).cwiseProduct(element(j));
          const double f = std::exp(row.dot(ab.array().log().matrix()));
          scale_g = std::max(scale_g, std::abs(shift_d * (1.0 - f)));
        }
      }
      rep.statistic = transform::check_wmss_shift_equation(row, shift_d, pairs) / scale_g;
      rep.details.set("D", format_double(shift_d));
    }
    rep.pass = rep.statistic <= rep.threshold;
    out_reports.push_back(rep);
    return out_reports;
  }

  int run(const CLI::App& app, std::ostream& out_stream) {
    const auto reps_out = reports();
    emit(out, format_reports(reps_out, format, resolved_config(app)), out_stream);
    const bool ok = std::all_of(reps_out.begin(), reps_out.end(), [](const auto& r) { return r.pass; });
    return ok ? exit_pass : exit_verify_fail;
  }
};

// --- estimate ------------------------------------------------------------------------------

regvar::UnivariateSvf parse_univariate(const std::string& spec) {
  if (spec == "constant") return regvar::UnivariateSvf::constant(1.0);
  if (spec == "log") return regvar::UnivariateSvf::log();
  if (spec == "iterated-log") return regvar::UnivariateSvf::iterated_log();
  if (spec.rfind("log:", 0) == 0) return regvar::UnivariateSvf::log(std::numbers::e, parse_double(spec.substr(4)));
  throw ParameterError("unknown slowly varying factor '" + spec + "' (constant|log|log:P|iterated-log)");
}

struct EstimateCmd {
  std::string kind;
  // crv
  std::string exponents = "0.5,0.5", slow = "product:log", anchor;
  double base = 2.0;
  int levels = 16;
  // radial
  double rho = 1.0;
  std::string radial_slow = "log", sphere = "one", x = "1,2";
  double tol = 0.05;
  // normalization
  ModelOptions model;
  double gamma = 1.0;
  std::string n_list = "16,32,64,128,256,512";
  std::string out = "-";

  void add(CLI::App& app) {
    app.add_option("kind", kind, "crv|radial|normalization")
        ->required()
        ->check(CLI::IsMember({"crv", "radial", "normalization"}));
    app.add_option("--exponents", exponents, "crv exponents h1,h2,...");
    app.add_option("--slow", slow, "crv slow part: constant|product:F|sum:F with F a factor kind");
    app.add_option("--anchor", anchor, "crv ray anchor (default 1e40 per coordinate)");
    app.add_option("--base", base, "grid base");
    app.add_option("--levels", levels, "grid levels");
    app.add_option("--rho", rho, "radial index");
    app.add_option("--radial-slow", radial_slow, "radial slowly varying factor");
    app.add_option("--sphere", sphere, "one|power-sum:P|weighted:w1,w2,...");
    app.add_option("--x", x, "direction x for the radial limit");
    app.add_option("--tol", tol, "radial convergence tolerance");
    model.add(app, false);
    app.add_option("--gamma", gamma, "aspect exponent for normalization");
    app.add_option("--n-list", n_list, "levels of n for normalization");
    app.add_option("--out", out, "output path, - for stdout");
  }

  regvar::SlowVaryingSpec slow_spec(std::size_t d) const {
    if (slow == "constant") return regvar::SlowVaryingSpec::constant();
    const auto colon = slow.find(':');
    if (colon == std::string::npos) throw ParameterError("--slow must be constant, product:F or sum:F");
    const std::string how = slow.substr(0, colon);
    std::vector<regvar::UnivariateSvf> parts(d, parse_univariate(slow.substr(colon + 1)));
    if (how == "product") return regvar::SlowVaryingSpec::product(parts);
    if (how == "sum") return regvar::SlowVaryingSpec::sum(parts);
    throw ParameterError("--slow must be constant, product:F or sum:F");
  }

  regvar::SphereFunction sphere_spec() const {
    regvar::SphereFunction s;
    if (sphere == "one") return s;
    if (sphere.rfind("power-sum:", 0) == 0) {
      s.kind = regvar::SphereFunction::Kind::power_sum;
      s.power = parse_double(sphere.substr(10));
      return s;
    }
    if (sphere.rfind("weighted:", 0) == 0) {
      s.kind = regvar::SphereFunction::Kind::weighted_product;
      s.weights = parse_vec(sphere.substr(9));
      return s;
    }
    throw ParameterError("unknown sphere function '" + sphere + "'");
  }

  int run(const CLI::App& app, std::ostream& out_stream) {
    Metadata md = resolved_config(app);
    md.set("experiment", "estimate-" + kind);
    std::vector<attraction::ExperimentRow> rows;
    auto row = [&](const std::string& stat, double value, double se = 0.0, double t = std::nan("")) {
      attraction::ExperimentRow r;
      r.gamma = std::nan("");
      r.t = t;
      r.s = std::nan("");
      r.statistic = stat;
      r.value = value;
      r.stderr_value = se;
      rows.push_back(r);
      return &rows.back();
    };

    if (kind == "crv") {
      const Vec h = parse_vec(exponents);
      const regvar::CrvfSpec spec(h, slow_spec(static_cast<std::size_t>(h.size())));
      const Vec anc = anchor.empty() ? Vec::Constant(h.size(), 1e40) : parse_vec(anchor);
      const auto est = regvar::estimate_crv_exponents(
          [&](const Vec& t) { return regvar::eval_crvf(spec, t); }, base, levels, anc);
      for (Eigen::Index i = 0; i < est.h_hat.size(); ++i) {
        row("h_hat", est.h_hat[i], 0.0, static_cast<double>(i + 1));
        row("r_squared", est.r_squared[i], 0.0, static_cast<double>(i + 1));
        row("tail_slope", est.tail_slope[i], 0.0, static_cast<double>(i + 1));
      }
    } else if (kind == "radial") {
      const regvar::RrvfSpec spec{rho, regvar::SlowVaryingSpec::radial(parse_univariate(radial_slow), sphere_spec())};
      const Vec xv = parse_vec(x);
      const auto grid = regvar::geometric_grid(1e4, 1e4, 9);
      const auto est = regvar::check_radial_variation([&](const Vec& v) { return regvar::eval_rrvf(spec, v); }, xv,
                                                      grid, tol);
      row("phi_hat", est.phi_hat);
      row("rho_hat", est.rho_hat);
      row("converged", est.converged ? 1.0 : 0.0);
    } else {
      if (model.model.empty()) throw ParameterError("--model is required for normalization");
      const auto fit = attraction::fit_normalization_exponent(model.kernel(), gamma,
                                                              parse_longs(n_list));
      for (std::size_t i = 0; i < fit.n.size(); ++i) {
        auto* r = row("variance", fit.variance[i]);
        r->n = std::to_string(fit.n[i]) + "x" + std::to_string(fit.m[i]);
        r->gamma = gamma;
      }
      row("h_hat", fit.h_hat, fit.stderr_h)->gamma = gamma;
      row("r_squared", fit.r_squared)->gamma = gamma;
    }
    emit(out, experiment_text(md, rows), out_stream);
    return exit_pass;
  }
};

// --- sumfield / scaletrans -------------------------------------------------------------------

struct SumfieldCmd {
  ModelOptions model;
  std::string n = "64,64", t = "0.5,0.5;1,1;1,0.5";
  double f = 0.0;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  std::string out = "-";

  void add(CLI::App& app) {
    model.add(app, true);
    app.add_option("--n", n, "lattice sizes n1,n2");
    app.add_option("--t", t, "evaluation points t, x,y;x,y");
    app.add_option("--f", f, "normalization f(n) (default sqrt(n1 n2))");
    app.add_option("--reps", reps, "replicates");
    app.add_option("--seed", seed, "random seed")->required();
    app.add_option("--out", out, "output path, - for stdout");
  }

  int run(const CLI::App& app, std::ostream& out_stream) {
    const auto nv = parse_longs(n);
    const auto tv = parse_point_list(t);
    if (nv.size() != 2) throw UnsupportedError("sumfield runs on the plane (n = n1,n2)");
    if (reps < 2) throw ParameterError("--reps must be >= 2");
    const CovarianceKernel k = model.kernel();
    const double fn = f > 0.0 ? f : std::sqrt(static_cast<double>(nv[0]) * static_cast<double>(nv[1]));

    std::vector<std::size_t> sizes(nv.begin(), nv.end());
    const fields::LatticeGrid grid = fields::LatticeGrid::integer(sizes);
    const fields::LatticeSampler sampler(k, grid);
    const Mat z = attraction::normalized_sum(attraction::partial_sum_stream(sampler, seed, reps, nv, tv), fn);

    Metadata md = resolved_config(app);
    md.set("experiment", "sumfield");
    md.set("generator", sampler.generator());
    md.merge(k.metadata());
    std::vector<attraction::ExperimentRow> rows;
    const std::string ntext = std::to_string(nv[0]) + "x" + std::to_string(nv[1]);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const Vec col = z.col(j);
      const double m2 = col.squaredNorm() / static_cast<double>(col.size());
      const double se = std::sqrt((col.array().square() - m2).square().sum() /
                                  static_cast<double>(col.size() - 1) / static_cast<double>(col.size()));
      const auto corner = attraction::box_corner(nv, tv[static_cast<std::size_t>(j)]);
      const double exact = (corner[0] == 0 || corner[1] == 0)
                               ? 0.0
                               : attraction::exact_sum_variance(k, corner[0], corner[1]) / (fn * fn);
      const double tt = tv[static_cast<std::size_t>(j)][0], ss = tv[static_cast<std::size_t>(j)][1];
      rows.push_back({ntext, std::nan(""), tt, ss, "variance", m2, se});
      rows.push_back({ntext, std::nan(""), tt, ss, "exact_variance", exact, 0.0});
    }
    emit(out, experiment_text(md, rows), out_stream);
    return exit_pass;
  }
};

struct ScaletransCmd {
  ModelOptions model;
  std::string gammas = "0.5,1,2", n_list = "16,32,64,128,256,512", window = "0.1,10", out = "-";

  void add(CLI::App& app) {
    model.add(app, true);
    app.add_option("--gammas", gammas, "aspect exponents");
    app.add_option("--n-list", n_list, "levels of n");
    app.add_option("--ratio-window", window, "c,C for the ratio condition");
    app.add_option("--out", out, "output path, - for stdout");
  }

  int run(const CLI::App& app, std::ostream& out_stream, std::ostream& err) {
    const auto g = parse_list(gammas);
    const auto w = parse_list(window);
    if (w.size() != 2) throw ParameterError("--ratio-window takes c,C");
    const CovarianceKernel k = model.kernel();
    const auto curve = attraction::scale_transition_sweep(k, g, parse_longs(n_list),
                                                          attraction::RatioWindow(w[0], w[1]));
    Metadata md = resolved_config(app);
    md.set("experiment", "scaletrans");
    md.merge(k.metadata());
    std::vector<attraction::ExperimentRow> rows;
    const double nan = std::nan("");
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& fit = curve.fits[i];
      for (std::size_t j = 0; j < fit.n.size(); ++j) {
        rows.push_back({std::to_string(fit.n[j]) + "x" + std::to_string(fit.m[j]), g[i], 1.0, 1.0, "variance",
                        fit.variance[j], 0.0});
      }
      rows.push_back({"", g[i], nan, nan, "h_hat", fit.h_hat, fit.stderr_h});
      rows.push_back({"", g[i], nan, nan, "r_squared", fit.r_squared, 0.0});
      rows.push_back({"", g[i], nan, nan, "ratio_ok", curve.ratio_ok[i] ? 1.0 : 0.0, 0.0});
      if (!curve.ratio_ok[i]) {
        err << "warning: ratio condition " << w[0] << " <= m/n <= " << w[1]
            << " fails for gamma=" << g[i] << "\n";
      }
      if (fit.h_hat <= 0.0) {
        err << "warning: fitted exponent " << fit.h_hat << " <= 0 at gamma=" << g[i]
            << "\n";
      }
    }
    if (curve.breakpoint) {
      const auto& b = *curve.breakpoint;
      rows.push_back({"", nan, nan, nan, "breakpoint_gamma", b.gamma_break, 0.0});
      rows.push_back({"", nan, nan, nan, "slope_left", b.slope_left, 0.0});
      rows.push_back({"", nan, nan, nan, "slope_right", b.slope_right, 0.0});
      rows.push_back({"", nan, nan, nan, "sse_linear", b.sse_linear, 0.0});
      rows.push_back({"", nan, nan, nan, "sse_broken", b.sse_broken, 0.0});
    }
    emit(out, experiment_text(md, rows), out_stream);
    return exit_pass;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lamperti transforms, self-similar fields and scaling-transition experiments", "lamperti"};
  // `--h` is a model parameter, so help is long-form only.
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  SimulateCmd simulate;
  TransformCmd transform_cmd;
  VerifyCmd verify;
  EstimateCmd estimate;
  SumfieldCmd sumfield;
  ScaletransCmd scaletrans;

  std::map<std::string, CLI::App*> subs;
  subs["simulate"] = app.add_subcommand("simulate", "draw Gaussian field samples");
  subs["transform"] = app.add_subcommand("transform", "apply a Lamperti transform to a sample file");
  subs["verify"] = app.add_subcommand("verify", "check an identity or invariance; exit 1 on failure");
  subs["estimate"] = app.add_subcommand("estimate", "estimate regular-variation or normalization exponents");
  subs["sumfield"] = app.add_subcommand("sumfield", "partial sums of a stationary lattice field");
  subs["scaletrans"] = app.add_subcommand("scaletrans", "scaling-transition sweep over gamma");
  simulate.add(*subs["simulate"]);
  transform_cmd.add(*subs["transform"]);
  verify.add(*subs["verify"]);
  estimate.add(*subs["estimate"]);
  sumfield.add(*subs["sumfield"]);
  scaletrans.add(*subs["scaletrans"]);
  std::map<std::string, std::string> config_paths;
  for (auto& [name, sub] : subs) sub->add_option("--config", config_paths[name], "file of key=value lines");

  try {
    // Config values are spliced in before the explicit flags so the flags win.
    std::vector<std::string> argv = args;
    if (!argv.empty() && subs.count(argv[0])) {
      for (std::size_t i = 1; i + 1 < argv.size(); ++i) {
        if (argv[i] == "--config") {
          const auto extra = expand_config(argv[i + 1], *subs[argv[0]]);
          argv.insert(argv.begin() + 1, extra.begin(), extra.end());
          break;
        }
      }
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_pass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_pass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }

  try {
    if (subs["simulate"]->parsed()) return simulate.run(*subs["simulate"], out);
    if (subs["transform"]->parsed()) return transform_cmd.run(*subs["transform"], out);
    if (subs["verify"]->parsed()) return verify.run(*subs["verify"], out);
    if (subs["estimate"]->parsed()) return estimate.run(*subs["estimate"], out);
    if (subs["sumfield"]->parsed()) return sumfield.run(*subs["sumfield"], out);
    return scaletrans.run(*subs["scaletrans"], out, err);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::logic_error& e) {
    // DomainError, ParameterError, RangeError, UnsupportedError and std::stoul failures.
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_numeric;
  }
}

}  // namespace lamperti::cli
