#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crpsagg/aggregation.hpp"
#include "crpsagg/synthetic.hpp"

using namespace crpsagg;

namespace {

MixtureScenario scenario(std::size_t horizon, std::size_t segments, MixingMethod method,
                         std::uint64_t seed = 1) {
  MixtureScenario s;
  s.horizon = horizon;
  s.segments = segments;
  s.method = method;
  s.seed = seed;
  return s;
}

int nonzero(const std::array<double, 3>& row) {
  return static_cast<int>(std::count_if(row.begin(), row.end(), [](double w) { return w > 0.0; }));
}

double closed_form_triangular_cdf(const Triangular& t, double u) {
  if (u <= t.left) return 0.0;
  if (u >= t.right) return 1.0;
  if (u <= t.peak) return (u - t.left) * (u - t.left) / ((t.right - t.left) * (t.peak - t.left));
  return 1.0 - (t.right - u) * (t.right - u) / ((t.right - t.left) * (t.right - t.peak));
}

}  // namespace

TEST_CASE("counter rng") {
  const CounterRng rng(42);
  CHECK(rng.bits(5) == CounterRng(42).bits(5));
  CHECK(rng.bits(5) != rng.bits(6));
  CHECK(rng.split(1).bits(0) != rng.split(2).bits(0));
  double sum = 0.0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double u = rng.uniform(k);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("scenario validation") {
  CHECK_THROWS_AS(scenario(10, 3, MixingMethod::Method1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(scenario(10, 0, MixingMethod::Method1).validate(), std::invalid_argument);
  auto bad = scenario(9, 3, MixingMethod::Method1);
  bad.components[1] = Triangular{0.5, 0.2, 0.9};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parse_mixing_method("method2") == MixingMethod::Method2);
  CHECK_THROWS_AS(parse_mixing_method("method3"), std::invalid_argument);
}

TEST_CASE("method 1 schedule") {
  const auto tiny = schedule_method1(scenario(3, 3, MixingMethod::Method1));
  CHECK(tiny[0] == std::array<double, 3>{1, 0, 0});
  CHECK(tiny[1] == std::array<double, 3>{0, 1, 0});
  CHECK(tiny[2] == std::array<double, 3>{0, 0, 1});

  const auto s = scenario(3000, 6, MixingMethod::Method1);
  const auto rows = schedule_method1(s);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    CHECK(nonzero(rows[t]) == 1);
    CHECK(rows[t][(t / 500) % 3] == 1.0);
  }
  // Leadership changes exactly at multiples of T / segments.
  for (std::size_t t = 1; t < rows.size(); ++t) CHECK((rows[t] != rows[t - 1]) == (t % 500 == 0));
}

TEST_CASE("method 2 schedule") {
  const auto s = scenario(600, 6, MixingMethod::Method2);
  const auto rows = schedule_method2(s);
  for (const auto& row : rows) {
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    for (double w : row) CHECK(w >= 0.0);
  }
  // Segment centres at 50, 150, ..., 550.
  for (std::size_t k = 0; k < 6; ++k) {
    const std::size_t centre = k * 100 + 50;
    CHECK(nonzero(rows[centre]) == 1);
    CHECK(rows[centre][k % 3] == 1.0);
  }
  // Midpoint between the leaders of segments 0 and 1.
  CHECK(rows[100] == std::array<double, 3>{0.5, 0.5, 0.0});
  CHECK(rows[300][0] == doctest::Approx(0.5));
  CHECK(rows[300][2] == doctest::Approx(0.5));
  for (std::size_t t = 51; t < 550; ++t)
    if ((t - 50) % 100 != 0) CHECK(nonzero(rows[t]) == 2);
  // Successive rows move by at most 1 / segment length per component.
  for (std::size_t t = 1; t < rows.size(); ++t)
    for (int c = 0; c < 3; ++c) CHECK(std::abs(rows[t][c] - rows[t - 1][c]) <= 0.01 + 1e-12);
}

TEST_CASE("sampling") {
  auto s = scenario(3000, 6, MixingMethod::Method1, 99);
  const auto rows = make_schedule(s);
  const auto ys = sample_sequence(s, rows);
  CHECK(ys.size() == 3000);
  for (std::size_t t = 0; t < ys.size(); ++t) {
    const auto& tri = s.components[leader_at(s, t)];
    CHECK(ys[t] >= tri.left);
    CHECK(ys[t] <= tri.right);
  }
  CHECK(sample_sequence(s, rows) == ys);
  s.seed = 100;
  CHECK(sample_sequence(s, rows) != ys);

  const auto smooth = scenario(3000, 6, MixingMethod::Method2, 5);
  const auto smooth_ys = sample_sequence(smooth, make_schedule(smooth));
  CHECK(std::all_of(smooth_ys.begin(), smooth_ys.end(), [](double y) { return y >= 0 && y <= 1; }));
}

TEST_CASE("empirical distribution matches the triangular CDF") {
  const auto s = scenario(100000, 1, MixingMethod::Method1, 2024);
  auto ys = sample_sequence(s, schedule_method1(s));
  std::sort(ys.begin(), ys.end());
  const auto& tri = s.components[0];
  double ks = 0.0;
  const double n = static_cast<double>(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double f = closed_form_triangular_cdf(tri, ys[k]);
    ks = std::max({ks, std::abs(f - static_cast<double>(k) / n),
                   std::abs(f - static_cast<double>(k + 1) / n)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("triangular quantile inverts the CDF") {
  for (const Triangular tri : {Triangular{0.0, 0.25, 0.5}, Triangular{0.0, 0.0, 1.0},
                               Triangular{0.2, 0.9, 0.9}}) {
    for (double u = 0.0; u <= 1.0; u += 0.05)
      CHECK(closed_form_triangular_cdf(tri, triangular_quantile(tri, u)) ==
            doctest::Approx(u).epsilon(1e-12));
  }
}

TEST_CASE("expert pool") {
  const auto s = scenario(3000, 6, MixingMethod::Method1);
  const GridDomain domain(0.0, 1.0, 256);
  const auto pool = build_expert_pool(s, domain);
  CHECK(pool.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::is_sorted(pool[i].values().begin(), pool[i].values().end()));
    CHECK(pool[i].values().back() == 1.0);
    CHECK(pool[i] == build_expert_pool(s, domain)[i]);
  }
}

TEST_CASE("the leader expert has the lowest loss in each segment") {
  const auto s = scenario(3000, 6, MixingMethod::Method1, 7);
  const GridDomain domain(0.0, 1.0, 512);
  const auto pool = build_expert_pool(s, domain);
  const auto ys = sample_sequence(s, schedule_method1(s));
  for (std::size_t k = 0; k < s.segments; ++k) {
    std::array<double, 3> mean{};
    for (std::size_t t = k * 500; t < (k + 1) * 500; ++t)
      for (std::size_t i = 0; i < 3; ++i) mean[i] += crps(pool[i], ys[t]) / 500.0;
    const auto best = std::min_element(mean.begin(), mean.end()) - mean.begin();
    CHECK(static_cast<std::size_t>(best) == k % 3);
  }
}
