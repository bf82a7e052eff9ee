#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "oracles/nystrom.hpp"
#include "sprayer/kl_road.hpp"

using namespace sprayer;

namespace {

constexpr double kDecay = 1.0 / 0.3;
constexpr double kHorizon = 30.0;

// Composite Simpson weights on n (even) intervals.
std::vector<double> simpson_weights(std::size_t intervals, double length)
{
  const double h = length / static_cast<double>(intervals);
  std::vector<double> w(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) {
    w[i] = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    w[i] *= h / 3.0;
  }
  return w;
}

double gram_deviation(const KLBasis& basis, std::size_t modes, std::size_t intervals)
{
  const auto w = simpson_weights(intervals, basis.horizon());
  const double h = basis.horizon() / static_cast<double>(intervals);
  std::vector<std::vector<double>> phi(modes, std::vector<double>(intervals + 1));
  for (std::size_t n = 0; n < modes; ++n) {
    for (std::size_t i = 0; i <= intervals; ++i) {
      phi[n][i] = basis.eigenfunction(n, static_cast<double>(i) * h);
    }
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < modes; ++a) {
    for (std::size_t b = a; b < modes; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i <= intervals; ++i) {
        s += w[i] * phi[a][i] * phi[b][i];
      }
      worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("correlation kernel")
{
  CHECK(correlation_kernel(3.0, 3.0, kDecay) == 1.0);
  RoadParams road;
  CHECK(road.decay_rate() == doctest::Approx(kDecay));
  CHECK(correlation_kernel(4.0, 4.3, road.decay_rate()) == doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(correlation_kernel(4.0, 4.3, kDecay) == correlation_kernel(4.3, 4.0, kDecay));
}

TEST_CASE("eigenvalues interlace and decrease")
{
  const KLBasis basis = solve_fredholm(kDecay, kHorizon, 500);
  const double a = 0.5 * kHorizon;
  for (std::size_t n = 0; n < basis.size(); ++n) {
    const KLMode& m = basis.mode(n);
    CHECK(m.lambda > 0.0);
    CHECK(m.lambda == doctest::Approx(2 * kDecay / (m.omega * m.omega + kDecay * kDecay)));
    CHECK(m.parity == (n % 2 == 0 ? Parity::even : Parity::odd));
    // The root satisfies its own transcendental equation.
    const double residual = m.parity == Parity::even
                                ? kDecay * std::cos(m.omega * a) - m.omega * std::sin(m.omega * a)
                                : m.omega * std::cos(m.omega * a) + kDecay * std::sin(m.omega * a);
    CHECK(std::abs(residual) < 1e-9 * (1.0 + m.omega));
    if (n > 0) {
      CHECK(m.lambda < basis.mode(n - 1).lambda);
      CHECK(m.omega > basis.mode(n - 1).omega);
    }
  }
  for (std::size_t n = 1; n < 500; n += 37) {
    CHECK(basis.partial_energy(n) < basis.partial_energy(n + 1));
    CHECK(basis.partial_energy(n) < kHorizon);
  }
}

TEST_CASE("eigenfunctions are orthonormal")
{
  const KLBasis basis = solve_fredholm(kDecay, kHorizon, 50);
  CHECK(gram_deviation(basis, 50, 4096) < 1e-6);
  CHECK(gram_deviation(basis, 50, 40000) < 1e-8);
}

TEST_CASE("eigenfunction derivative")
{
  const KLBasis basis = solve_fredholm(kDecay, kHorizon, 20);
  const double h = 1e-6;
  for (std::size_t n : {0u, 1u, 7u, 19u}) {
    for (double t : {0.3, 11.1, 29.2}) {
      const double fd = (basis.eigenfunction(n, t + h) - basis.eigenfunction(n, t - h)) / (2 * h);
      CHECK(basis.eigenfunction_derivative(n, t) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("agreement with the Nystrom oracle")
{
  const std::size_t count = 50;
  const KLBasis basis = solve_fredholm(kDecay, kHorizon, count);
  const oracle::NystromSolution ref = oracle::nystrom_extrapolated(kDecay, kHorizon, 1024, count);
  double sum_ref = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    CHECK(std::abs(ref.eigenvalues[n] - basis.mode(n).lambda) < 1e-6 * basis.mode(n).lambda);
    double worst = 0.0, peak = 0.0;
    const double sign = basis.eigenfunction(n, 0.0) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
      const double exact = sign * basis.eigenfunction(n, ref.nodes[i]);
      worst = std::max(worst, std::abs(exact - ref.modes[n][i]));
      peak = std::max(peak, std::abs(exact));
    }
    CHECK(worst < 1e-6 * peak);
    sum_ref += ref.eigenvalues[n];
  }
  CHECK(basis.partial_energy(count) == doctest::Approx(sum_ref).epsilon(1e-9));
}

TEST_CASE("truncation order")
{
  const KLBasis narrow = solve_fredholm(0.01, 1.0, 4);
  CHECK(narrow.mode(0).lambda > 0.5);
  CHECK(truncation_order(narrow, 0.5) == 1);

  const KLBasis small = solve_fredholm(kDecay, kHorizon, 100);
  CHECK_THROWS_AS(truncation_order(small, 0.999), InsufficientModes);
  CHECK_THROWS_AS(truncation_order(small, 1.0), std::invalid_argument);

  RoadParams road;
  road.n_kl.reset();
  road.tau = 0.999;
  const KLBasis basis = build_basis(road);
  const std::size_t n = basis.size();
  CHECK(basis.partial_energy(n) >= 0.999 * kHorizon);
  CHECK(basis.partial_energy(n - 1) < 0.999 * kHorizon);
  // Weyl-type tail estimate: modes beyond frequency W carry
  // (2/pi)(pi/2 - atan(W/c)) of the energy, spacing pi/T.
  const double w = kDecay * std::tan(0.5 * std::numbers::pi * 0.999);
  CHECK(static_cast<double>(n) == doctest::Approx(w * kHorizon / std::numbers::pi).epsilon(1e-3));

  RoadParams fixed;
  const KLBasis table = build_basis(fixed);
  CHECK(table.size() == 403);
  CHECK(table.partial_energy(403) / kHorizon == doctest::Approx(0.9498).epsilon(1e-3));
}

TEST_CASE("Mercer reconstruction")
{
  RoadParams road;
  road.n_kl.reset();
  road.tau = 0.999;
  const KLBasis basis = build_basis(road);
  const std::size_t grid = 100;
  std::vector<std::vector<double>> phi(grid, std::vector<double>(basis.size()));
  std::vector<double> t(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    t[i] = kHorizon * static_cast<double>(i) / static_cast<double>(grid - 1);
    for (std::size_t n = 0; n < basis.size(); ++n) {
      phi[i][n] = basis.eigenfunction(n, t[i]) * std::sqrt(basis.mode(n).lambda);
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = i; j < grid; ++j) {
      double s = 0.0;
      for (std::size_t n = 0; n < basis.size(); ++n) {
        s += phi[i][n] * phi[j][n];
      }
      worst = std::max(worst, std::abs(s - correlation_kernel(t[i], t[j], kDecay)));
    }
  }
  CHECK(worst < 0.05);
}

TEST_CASE("sampled coefficients are standard normal and independent")
{
  RoadParams road;
  road.n_kl = 8;
  const auto basis = std::make_shared<const KLBasis>(build_basis(road));
  const std::size_t n_real = 10000;
  std::vector<std::vector<double>> left(n_real), right(n_real);
  for (std::size_t r = 0; r < n_real; ++r) {
    const RoadRealization path = sample_realization(basis, road, SeedInfo{77, r});
    left[r].assign(path.coefficients_left().begin(), path.coefficients_left().end());
    right[r].assign(path.coefficients_right().begin(), path.coefficients_right().end());
  }
  for (std::size_t a = 0; a < 8; ++a) {
    double mean = 0.0;
    for (const auto& y : left) {
      mean += y[a];
    }
    CHECK(std::abs(mean / n_real) < 4.0 / std::sqrt(static_cast<double>(n_real)));
    for (std::size_t b = 0; b < 8; ++b) {
      double m = 0.0, cross = 0.0;
      for (std::size_t r = 0; r < n_real; ++r) {
        m += left[r][a] * left[r][b];
        cross += left[r][a] * right[r][b];
      }
      CHECK(std::abs(m / n_real - (a == b ? 1.0 : 0.0)) < 0.05);
      CHECK(std::abs(cross / n_real) < 0.05);
    }
  }
}

TEST_CASE("sample path statistics")
{
  RoadParams road;
  const auto basis = std::make_shared<const KLBasis>(build_basis(road));
  const std::size_t n_real = 10000;
  const std::vector<double> times{3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 24.0, 27.0};
  std::vector<double> sum(times.size(), 0.0), sum2(times.size(), 0.0);
  double lag_sum = 0.0;
  double mean_sum = 0.0;
  for (std::size_t r = 0; r < n_real; ++r) {
    const RoadRealization path = sample_realization(basis, road, SeedInfo{3, r});
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double y = path.evaluate(times[k]).ye1 - road.mu1;
      const double z = path.evaluate(times[k] + 0.3).ye1 - road.mu1;
      sum[k] += y;
      sum2[k] += y * y;
      lag_sum += y * z;
    }
    mean_sum += path.evaluate(15.0).ye2;
  }
  CHECK(mean_sum / n_real == doctest::Approx(0.5).epsilon(0.007 / 0.5));

  double lo = 1e9, hi = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double m = sum[k] / n_real;
    const double var = sum2[k] / n_real - m * m;
    CHECK(std::abs(std::sqrt(var) - 0.175) < 0.01);
    lo = std::min(lo, var);
    hi = std::max(hi, var);
  }
  CHECK(hi / lo < 1.15);
  const double cov = lag_sum / (n_real * times.size());
  const double target = 0.175 * 0.175 * std::exp(-1.0);
  CHECK(std::abs(cov - target) < 0.1 * target);
}

TEST_CASE("realizations are deterministic and degenerate with zero sigma")
{
  RoadParams road;
  road.n_kl = 50;
  const auto basis = std::make_shared<const KLBasis>(build_basis(road));
  const RoadRealization a = sample_realization(basis, road, SeedInfo{9, 4});
  const RoadRealization b = sample_realization(basis, road, SeedInfo{9, 4});
  const RoadRealization c = sample_realization(basis, road, SeedInfo{9, 5});
  CHECK(a.evaluate(12.3).ye1 == b.evaluate(12.3).ye1);
  CHECK(a.evaluate(12.3).ye2_dot == b.evaluate(12.3).ye2_dot);
  CHECK(a.evaluate(12.3).ye1 != c.evaluate(12.3).ye1);
  CHECK_THROWS_AS(a.evaluate(30.5), std::out_of_range);
  CHECK_THROWS_AS(a.evaluate(-0.1), std::out_of_range);

  RoadParams flat = road;
  flat.sigma1 = flat.sigma2 = 0.0;
  const RoadRealization level = sample_realization(basis, flat, SeedInfo{9, 4});
  for (double t : {0.0, 7.7, 30.0}) {
    const ExcitationSample e = level.evaluate(t);
    CHECK(e.ye1 == 0.5);
    CHECK(e.ye2 == 0.5);
    CHECK(e.ye1_dot == 0.0);
    CHECK(e.ye2_dot == 0.0);
  }
}

TEST_CASE("path derivative and tabulated road")
{
  RoadParams road;
  const auto basis = std::make_shared<const KLBasis>(build_basis(road));
  const RoadRealization path = sample_realization(basis, road, SeedInfo{1, 0});
  const double h = 1e-6;
  for (double t : {1.0, 14.2, 28.9}) {
    const double fd = (path.evaluate(t + h).ye1 - path.evaluate(t - h).ye1) / (2 * h);
    CHECK(path.evaluate(t).ye1_dot == doctest::Approx(fd).epsilon(1e-6));
  }

  const TabulatedRoad table(path, 0.0, 30.0, 1e-3);
  double worst_value = 0.0, worst_rate = 0.0, rate_scale = 0.0;
  for (int i = 0; i < 3000; ++i) {
    const double t = 0.01 * i + 0.000371;
    const ExcitationSample exact = path.evaluate(t);
    const ExcitationSample approx = table.at(t);
    worst_value = std::max({worst_value, std::abs(exact.ye1 - approx.ye1),
                            std::abs(exact.ye2 - approx.ye2)});
    worst_rate = std::max({worst_rate, std::abs(exact.ye1_dot - approx.ye1_dot),
                           std::abs(exact.ye2_dot - approx.ye2_dot)});
    rate_scale = std::max(rate_scale, std::abs(exact.ye1_dot));
  }
  CHECK(worst_value < 1e-8);
  CHECK(worst_rate < 1e-6 * rate_scale);
  CHECK(table.at(30.0).ye1 == doctest::Approx(path.evaluate(30.0).ye1).epsilon(1e-10));
}

TEST_CASE("road parameter validation")
{
  RoadParams road;
  road.tau = 0.9;
  CHECK_THROWS_AS(road.validate(), std::invalid_argument);
  road.n_kl.reset();
  CHECK_NOTHROW(road.validate());
  road.tau.reset();
  CHECK_THROWS_AS(road.validate(), std::invalid_argument);
  RoadParams bad;
  bad.a_corr = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = RoadParams{};
  bad.sigma1 = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
