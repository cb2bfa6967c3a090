#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamperti {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy. The CLI maps the first four to exit code 2 and
// NumericError to exit code 3.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Pairwise (cascade) summation with a fixed split order, so that the result
/// depends only on the input sequence.
double pairwise_sum(std::span<const double> xs);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Random engine for one replicate. Streams for distinct (seed, index) pairs
/// are seeded independently through std::seed_seq.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

/// Fills `out` with standard normal variates drawn from `gen`.
void fill_standard_normal(std::mt19937_64& gen, std::span<double> out);

/// Least-squares line fit y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
  double slope_stderr = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Formats with 17 significant digits, the round-trip precision of double.
std::string format_double(double v);

/// Parses a double, rejecting trailing garbage.
double parse_double(const std::string& text);

}  // namespace lamperti
