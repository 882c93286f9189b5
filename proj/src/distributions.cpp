#include "crpsagg/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace crpsagg {

namespace {

constexpr double kMinTruncatedMass = 1e-6;

std::string describe(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

void require_inside(const Interval& range, double value, const char* what) {
  require(std::isfinite(value) && value >= range.lower && value <= range.upper,
          std::string(what) + " " + describe(value) + " outside [" + describe(range.lower) +
              ", " + describe(range.upper) + "]");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double mixture_cdf(const std::vector<GaussianComponent>& components, double u) {
  double total = 0.0;
  for (const auto& c : components) total += c.weight * normal_cdf((u - c.mean) / c.stddev);
  return total;
}

struct CdfVisitor {
  double u;

  double operator()(const PointMass& p) const { return u >= p.location ? 1.0 : 0.0; }

  double operator()(const Uniform& p) const {
    return std::clamp((u - p.left) / (p.right - p.left), 0.0, 1.0);
  }

  double operator()(const Triangular& p) const {
    if (u <= p.left) return 0.0;
    if (u >= p.right) return 1.0;
    const double base = p.right - p.left;
    if (u <= p.peak) return (u - p.left) * (u - p.left) / (base * (p.peak - p.left));
    return 1.0 - (p.right - u) * (p.right - u) / (base * (p.right - p.peak));
  }

  double operator()(const TruncatedGaussianMixture& p) const {
    const double value = (mixture_cdf(p.components, u) - p.mass_below) / p.mass_inside;
    return std::clamp(value, 0.0, 1.0);
  }
};

}  // namespace

GridDomain::GridDomain(double a, double b, std::size_t cells) : a_(a), b_(b), cells_(cells) {
  require(std::isfinite(a) && std::isfinite(b) && a < b,
          "grid domain requires finite a < b, got [" + describe(a) + ", " + describe(b) + "]");
  require(cells >= 2, "grid domain requires at least 2 cells");
  delta_ = (b - a) / static_cast<double>(cells);
}

double GridDomain::point(std::size_t s) const {
  if (s == cells_) return b_;
  if (s > cells_) throw std::out_of_range("grid index past z_d");
  return a_ + static_cast<double>(s) * delta_;
}

GridCdf GridCdf::from_values(const GridDomain& domain, std::vector<double> values) {
  require(values.size() == domain.cells(),
          "CDF has " + std::to_string(values.size()) + " values, grid has " +
              std::to_string(domain.cells()) + " cells");
  double running = 0.0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    const double v = values[s];
    if (!std::isfinite(v))
      throw std::invalid_argument("CDF value at cell " + std::to_string(s + 1) + " is not finite");
    if (v < -kClampTolerance || v > 1.0 + kClampTolerance)
      throw std::invalid_argument("CDF value " + describe(v) + " at cell " +
                                  std::to_string(s + 1) + " outside [0, 1]");
    if (v < running - kClampTolerance)
      throw std::invalid_argument("CDF decreases by " + describe(running - v) + " at cell " +
                                  std::to_string(s + 1));
    running = std::max(running, v);
    values[s] = std::clamp(running, 0.0, 1.0);
  }
  require(values.back() >= 1.0 - kClampTolerance,
          "CDF ends at " + describe(values.back()) + " instead of 1");
  values.back() = 1.0;
  return GridCdf(domain, std::move(values));
}

GridCdf GridCdf::uniform(const GridDomain& domain) {
  std::vector<double> values(domain.cells());
  for (std::size_t s = 0; s < values.size(); ++s)
    values[s] = static_cast<double>(s + 1) / static_cast<double>(domain.cells());
  return from_values(domain, std::move(values));
}

ParametricDistribution ParametricDistribution::point_mass(Interval range, double location) {
  require_inside(range, location, "point mass location");
  return {range, PointMass{location}};
}

ParametricDistribution ParametricDistribution::uniform(Interval range, double left,
                                                       double right) {
  require_inside(range, left, "uniform left end");
  require_inside(range, right, "uniform right end");
  require(left < right, "uniform requires left < right");
  return {range, Uniform{left, right}};
}

ParametricDistribution ParametricDistribution::triangular(Interval range, double left,
                                                          double peak, double right) {
  require_inside(range, left, "triangular left end");
  require_inside(range, peak, "triangular peak");
  require_inside(range, right, "triangular right end");
  require(left <= peak && peak <= right && left < right,
          "triangular requires left <= peak <= right and left < right");
  return {range, Triangular{left, peak, right}};
}

ParametricDistribution ParametricDistribution::truncated_gaussian_mixture(
    Interval range, std::vector<GaussianComponent> components) {
  require(!components.empty(), "gaussian mixture needs at least one component");
  double weight_sum = 0.0;
  for (const auto& c : components) {
    require(std::isfinite(c.weight) && c.weight >= 0.0, "mixture weight must be >= 0");
    require(std::isfinite(c.mean), "mixture mean must be finite");
    require(std::isfinite(c.stddev) && c.stddev > 0.0, "mixture stddev must be > 0");
    const double inside = normal_cdf((range.upper - c.mean) / c.stddev) -
                          normal_cdf((range.lower - c.mean) / c.stddev);
    require(inside >= kMinTruncatedMass,
            "mixture component (mean " + describe(c.mean) + ", stddev " + describe(c.stddev) +
                ") has mass " + describe(inside) + " on the interval");
    weight_sum += c.weight;
  }
  require(std::abs(weight_sum - 1.0) <= 1e-9,
          "mixture weights sum to " + describe(weight_sum) + " instead of 1");
  TruncatedGaussianMixture shape{std::move(components)};
  shape.mass_below = mixture_cdf(shape.components, range.lower);
  shape.mass_inside = mixture_cdf(shape.components, range.upper) - shape.mass_below;
  return {range, std::move(shape)};
}

ParametricDistribution ParametricDistribution::from_spec(Interval range, const std::string& kind,
                                                         std::span<const double> params) {
  auto arity = [&](std::size_t n) {
    require(params.size() == n, kind + " expects " + std::to_string(n) + " parameters, got " +
                                    std::to_string(params.size()));
  };
  if (kind == "point") {
    arity(1);
    return point_mass(range, params[0]);
  }
  if (kind == "uniform") {
    arity(2);
    return uniform(range, params[0], params[1]);
  }
  if (kind == "triangular") {
    arity(3);
    return triangular(range, params[0], params[1], params[2]);
  }
  if (kind == "tgm") {
    require(!params.empty() && params.size() % 3 == 0,
            "tgm expects weight;mean;stddev triples, got " + std::to_string(params.size()) +
                " parameters");
    std::vector<GaussianComponent> components;
    for (std::size_t k = 0; k < params.size(); k += 3)
      components.push_back({params[k], params[k + 1], params[k + 2]});
    return truncated_gaussian_mixture(range, std::move(components));
  }
  throw std::invalid_argument("unknown distribution kind '" + kind + "'");
}

std::string ParametricDistribution::kind() const {
  struct {
    std::string operator()(const PointMass&) const { return "point"; }
    std::string operator()(const Uniform&) const { return "uniform"; }
    std::string operator()(const Triangular&) const { return "triangular"; }
    std::string operator()(const TruncatedGaussianMixture&) const { return "tgm"; }
  } name;
  return std::visit(name, shape_);
}

std::vector<double> ParametricDistribution::params() const {
  struct {
    std::vector<double> operator()(const PointMass& p) const { return {p.location}; }
    std::vector<double> operator()(const Uniform& p) const { return {p.left, p.right}; }
    std::vector<double> operator()(const Triangular& p) const {
      return {p.left, p.peak, p.right};
    }
    std::vector<double> operator()(const TruncatedGaussianMixture& p) const {
      std::vector<double> out;
      for (const auto& c : p.components) out.insert(out.end(), {c.weight, c.mean, c.stddev});
      return out;
    }
  } flatten;
  return std::visit(flatten, shape_);
}

double eval_cdf(const ParametricDistribution& dist, double u) {
  return std::visit(CdfVisitor{u}, dist.shape());
}

GridCdf discretize(const ParametricDistribution& dist, const GridDomain& domain) {
  if (dist.range() != Interval{domain.lower(), domain.upper()})
    throw DomainMismatch("distribution support [" + describe(dist.range().lower) + ", " +
                         describe(dist.range().upper) + "] differs from grid domain");
  std::vector<double> values(domain.cells());
  for (std::size_t s = 1; s <= domain.cells(); ++s) values[s - 1] = eval_cdf(dist, domain.point(s));
  values.back() = 1.0;
  return GridCdf::from_values(domain, std::move(values));
}

std::vector<std::uint8_t> heaviside_grid(double y, const GridDomain& domain) {
  if (!domain.contains(y))
    throw std::domain_error("outcome " + describe(y) + " outside the grid domain");
  std::vector<std::uint8_t> omega(domain.cells());
  for (std::size_t s = 1; s <= domain.cells(); ++s) omega[s - 1] = domain.point(s) >= y ? 1 : 0;
  return omega;
}

double crps(const GridCdf& forecast, double y) {
  const GridDomain& domain = forecast.domain();
  if (!domain.contains(y))
    throw std::domain_error("outcome " + describe(y) + " outside the grid domain");
  double sum = 0.0;
  for (std::size_t s = 1; s <= domain.cells(); ++s) {
    const double step = domain.point(s) >= y ? 1.0 : 0.0;
    const double diff = forecast[s - 1] - step;
    sum += diff * diff;
  }
  return domain.delta() * sum;
}

double crps_refined(const ParametricDistribution& dist, double y, std::size_t fine_cells) {
  const GridDomain fine(dist.range().lower, dist.range().upper, fine_cells);
  return crps(discretize(dist, fine), y);
}

}  // namespace crpsagg
