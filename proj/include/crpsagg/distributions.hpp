// Probability distribution functions on a bounded interval, their
// discretization to a uniform grid, and the CRPS loss.
//
// A forecast on [a, b] is stored as the values f_1..f_d of its CDF at the
// right endpoints z_1..z_d of the grid cells. The loss of a forecast F for
// outcome y is
//
//     CRPS(F, y) = delta * sum_s (f_s - 1{z_s >= y})^2
//
// which is the Riemann sum of the integral of (F(u) - H(u - y))^2 over [a, b].

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace crpsagg {

/// Pre-clamp tolerance for CDF values that leave [0, 1] or decrease.
inline constexpr double kClampTolerance = 1e-9;

/// Default number of grid cells.
inline constexpr std::size_t kDefaultGridSize = 1024;

class DomainMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The interval [a, b] split into d cells of width delta = (b - a) / d.
class GridDomain {
public:
  GridDomain(double a, double b, std::size_t cells = kDefaultGridSize);

  double lower() const { return a_; }
  double upper() const { return b_; }
  double width() const { return b_ - a_; }
  std::size_t cells() const { return cells_; }
  double delta() const { return delta_; }

  /// Grid point z_s = a + s * delta for s in [0, d]; z_0 = a and z_d = b exactly.
  double point(std::size_t s) const;

  bool contains(double y) const { return y >= a_ && y <= b_; }

  friend bool operator==(const GridDomain&, const GridDomain&) = default;

private:
  double a_;
  double b_;
  std::size_t cells_;
  double delta_;
};

/// Piecewise-constant CDF: values()[s - 1] is the value on [z_{s-1}, z_s).
///
/// Non-decreasing, inside [0, 1], last value exactly 1. Instances can only be
/// obtained through from_values(), which applies the monotone clamp.
class GridCdf {
public:
  /// Running maximum, clip to [0, 1] and force the last value to 1.
  /// Throws std::invalid_argument if a value is not finite or the input
  /// violates the CDF shape by more than kClampTolerance.
  static GridCdf from_values(const GridDomain& domain, std::vector<double> values);

  /// CDF of the uniform distribution on [a, b].
  static GridCdf uniform(const GridDomain& domain);

  const GridDomain& domain() const { return domain_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  friend bool operator==(const GridCdf&, const GridCdf&) = default;

private:
  GridCdf(GridDomain domain, std::vector<double> values)
      : domain_(domain), values_(std::move(values)) {}

  GridDomain domain_;
  std::vector<double> values_;
};

struct Interval {
  double lower;
  double upper;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct PointMass {
  double location;
};

struct Uniform {
  double left;
  double right;
};

struct Triangular {
  double left;
  double peak;
  double right;
};

struct GaussianComponent {
  double weight;
  double mean;
  double stddev;
};

/// Gaussian mixture conditioned on the support interval.
struct TruncatedGaussianMixture {
  std::vector<GaussianComponent> components;
  // Untruncated mixture CDF at the interval ends, cached at construction.
  double mass_below = 0.0;
  double mass_inside = 1.0;
};

/// Closed-form forecast family bound to its support interval. The factory
/// functions validate parameters and throw std::invalid_argument.
class ParametricDistribution {
public:
  using Variant = std::variant<PointMass, Uniform, Triangular, TruncatedGaussianMixture>;

  static ParametricDistribution point_mass(Interval range, double location);
  static ParametricDistribution uniform(Interval range, double left, double right);
  static ParametricDistribution triangular(Interval range, double left, double peak,
                                           double right);
  static ParametricDistribution truncated_gaussian_mixture(
      Interval range, std::vector<GaussianComponent> components);

  /// Builds a distribution from a kind name ("point", "uniform", "triangular",
  /// "tgm") and a flat parameter list; tgm takes weight;mean;stddev triples.
  static ParametricDistribution from_spec(Interval range, const std::string& kind,
                                          std::span<const double> params);

  const Interval& range() const { return range_; }
  const Variant& shape() const { return shape_; }

  std::string kind() const;
  std::vector<double> params() const;

private:
  ParametricDistribution(Interval range, Variant shape)
      : range_(range), shape_(std::move(shape)) {}

  Interval range_;
  Variant shape_;
};

/// Closed-form CDF value F(u), in [0, 1] and non-decreasing in u.
double eval_cdf(const ParametricDistribution& dist, double u);

/// Renders dist onto the grid: f_s = F(z_s) for s = 1..d, then the monotone clamp.
GridCdf discretize(const ParametricDistribution& dist, const GridDomain& domain);

/// Component s - 1 is 1 when z_s >= y; y must lie in [a, b].
std::vector<std::uint8_t> heaviside_grid(double y, const GridDomain& domain);

/// Discretized CRPS, summed in ascending grid order. Result lies in [0, b - a].
double crps(const GridCdf& forecast, double y);

/// crps(discretize(dist, [a, b] with fine_cells), y). Used as a convergence oracle.
double crps_refined(const ParametricDistribution& dist, double y, std::size_t fine_cells);

}  // namespace crpsagg
