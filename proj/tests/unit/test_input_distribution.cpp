#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mfd3/input_distribution.hpp"
#include "oracles.hpp"

using namespace mfd3;

namespace {

const RadialDistribution& dist_d(int d) {
  static std::map<int, RadialDistribution> cache;
  auto it = cache.find(d);
  if (it == cache.end()) it = cache.emplace(d, build_radial_distribution(DistributionParams{d, 1.0, 1.0})).first;
  return it->second;
}

}  // namespace

TEST_SUITE("input_distribution") {

TEST_CASE("params validation and kappa") {
  CHECK_THROWS_AS((DistributionParams{0, 1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((DistributionParams{3, -1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((DistributionParams{3, 1.0, 1.0}.validate()));
  for (int d : {1, 2, 10, 100}) CHECK(DistributionParams{d, 1.0, 1.0}.kappa() == doctest::Approx(oracle::kappa(d)));
  // Only the product a b enters.
  CHECK((DistributionParams{5, 2.0, 0.5}.kappa()) == doctest::Approx(DistributionParams{5, 1.0, 1.0}.kappa()));
}

TEST_CASE("radial_pdf matches the Boost oracle and vanishes at 0") {
  for (int d : {2, 10, 100}) {
    const DistributionParams p{d, 1.0, 1.0};
    for (double r : {1e-3, 0.05, 0.3, 1.0, 4.0, 30.0, 500.0})
      CHECK(radial_pdf(p, r) == doctest::Approx(oracle::radial_pdf(d, r)).epsilon(1e-9));
    CHECK_THROWS_AS(radial_pdf(p, 0.0), std::domain_error);
  }
  const DistributionParams p2{2, 1.0, 1.0};
  // J_1(z) ~ z / 2, so p(r) ~ kappa^2 r / 2 near the origin.
  const double k2 = oracle::kappa(2);
  CHECK(radial_pdf(p2, 1e-6) == doctest::Approx(k2 * k2 * 1e-6 / 2).epsilon(1e-6));
}

TEST_CASE("smoothed density is the oscillation average") {
  const int d = 10;
  const DistributionParams p{d, 1.0, 1.0};
  const double k = p.kappa();
  // Averaging the exact density over one full period of J^2 at large r.
  const double r0 = 400.0 / k * 10;
  const double period = std::numbers::pi / k;
  const double avg = oracle::radial_integral(d, [](double) { return 1.0; }, r0, r0 + period) / period;
  CHECK(radial_pdf_smoothed(p, r0 + period / 2) == doctest::Approx(avg).epsilon(1e-3));
}

TEST_CASE("tabulated law: normalisation, tail and envelope") {
  for (int d : {2, 10, 100}) {
    CAPTURE(d);
    const auto& dist = dist_d(d);
    CHECK(std::abs(dist.raw_mass() - 1.0) <= 1e-3);
    CHECK(std::abs(oracle::radial_mass(d) - 1.0) <= 1e-3);
    CHECK(dist.tail_mass() <= kDefaultTailBound);
    CHECK(dist.cdf_at(dist.r_max()) == doctest::Approx(1.0 - dist.tail_mass()));
    const auto cdf = dist.cdf();
    CHECK(std::is_sorted(cdf.begin(), cdf.end()));
    CHECK(std::is_sorted(dist.grid().begin(), dist.grid().end()));
    // Envelope holds on a sweep including 10 r_99.
    const double r99 = dist.quantile(0.99);
    for (double r = 0.5; r < 20.0 * r99; r *= 1.01)
      CHECK(r * r * radial_pdf(dist.params(), r) <= dist.envelope_constant() * (1.0 + 1e-12));
  }
  const auto small = build_radial_distribution(DistributionParams{2, 1.0, 1.0}, 4096, 1e-3);
  CHECK(small.tail_mass() <= 1e-3);
  CHECK_THROWS(build_radial_distribution(DistributionParams{2, 1.0, 1.0}, 10, 1e-3));
  CHECK_THROWS(build_radial_distribution(DistributionParams{2, 1.0, 1.0}, 4096, 0.5));
}

TEST_CASE("quantiles against the quadrature oracle and grid refinement") {
  const auto& dist = dist_d(2);
  const double median = oracle::radial_quantile(2, 0.5);
  CHECK(std::abs(dist.quantile(0.5) / median - 1.0) <= 1e-2);
  const auto fine = build_radial_distribution(DistributionParams{2, 1.0, 1.0}, 2 * kDefaultGridNodes);
  CHECK(std::abs(fine.quantile(0.9) / dist.quantile(0.9) - 1.0) <= 1e-3);
  for (double p : {0.01, 0.3, 0.77, 0.999}) CHECK(dist.cdf_at(dist.quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  CHECK(dist.cdf_at(0.0) == 0.0);
}

TEST_CASE("inverse-CDF edges") {
  const auto& dist = dist_d(10);
  CHECK(radius_from_uniform(dist, 0.0) == dist.r_min());
  CHECK(radius_from_uniform(dist, 1.0) == dist.r_max());
  Rng rng = make_stream(7, 0);
  for (int i = 0; i < 1000; ++i) {
    const double r = sample_radius(dist, rng);
    CHECK(r >= dist.r_min());
    CHECK(r <= dist.r_max());
  }
}

TEST_CASE("truncated moments of the tabulated law") {
  const auto& dist = dist_d(10);
  for (double R : {0.2, 1.0, 10.0}) CHECK(dist.truncated_moment(R, 0) == doctest::Approx(dist.cdf_at(R)).epsilon(1e-9));
  const double m1 = oracle::radial_integral(10, [](double r) { return r; }, 0.0, 1.0);
  CHECK(dist.truncated_moment(1.0, 1) == doctest::Approx(m1).epsilon(1e-4));
  const double m2 = oracle::radial_integral(10, [](double r) { return r * r; }, 0.0, 5.0);
  CHECK(dist.truncated_moment(5.0, 2) == doctest::Approx(m2).epsilon(1e-3));
}

TEST_CASE("empirical radii follow the CDF") {
  const auto& dist = dist_d(10);
  Rng rng = make_stream(11, 0);
  const int n = 200000;
  std::vector<double> r(n);
  for (auto& v : r) v = sample_radius(dist, rng);
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  for (int i = 0; i < n; i += 97) ks = std::max(ks, std::abs(dist.cdf_at(r[i]) - (i + 0.5) / n));
  CHECK(ks < 1.63 / std::sqrt(double(n)) + 1e-4);  // 1% KS level
}

TEST_CASE("empirical tail decays like 1/R") {
  const auto& dist = dist_d(10);
  Rng rng = make_stream(3, 0);
  const int n = 200000;
  std::vector<double> r(n);
  for (auto& v : r) v = sample_radius(dist, rng);
  const double C = oracle::tail_envelope(10);
  for (double R = 1.0; R < dist.r_max() / 2; R *= 2.0) {
    const double tail = std::count_if(r.begin(), r.end(), [&](double v) { return v >= R; }) / double(n);
    CHECK(R * tail <= C + 4.0 * R * std::sqrt(tail / n) + 1e-12);
  }
}

TEST_CASE("directions: S^0, symmetry and isotropy") {
  Rng rng = make_stream(5, 0);
  int plus = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto u = sample_direction(1, rng);
    CHECK(std::abs(u(0)) == 1.0);
    plus += u(0) > 0;
  }
  CHECK(std::abs(plus / 1e5 - 0.5) < 0.01);

  const auto U3 = sample_directions(3, rng, 100000);
  for (int k = 0; k < 3; ++k) {
    const double mean = U3.col(k).mean();
    CHECK(std::abs(mean) < 3.0 * std::sqrt(1.0 / 3.0 / 1e5));
  }

  const int d = 100, n = 20000;
  const auto U = sample_directions(d, rng, n);
  CHECK((U.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-14);
  const Eigen::MatrixXd M = U.transpose() * U / double(n);
  // Var(u_i u_j) ~ 1/d^2 off-diagonal, 2/d^2 on it.
  const double se = 1.0 / (d * std::sqrt(double(n)));
  double worst = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) worst = std::max(worst, std::abs(M(i, j) - (i == j ? 1.0 / d : 0.0)) / se);
  CHECK(worst < 6.0);
}

TEST_CASE("inputs: norm equals the radius draw, seeded reproducibility") {
  const auto& dist = dist_d(10);
  Rng a = make_stream(9, 0), b = make_stream(9, 0);
  for (int i = 0; i < 100; ++i) {
    Rng probe = a;
    const double r = sample_radius(dist, probe);
    const auto x = sample_input(dist, a);
    CHECK(x.norm() == doctest::Approx(r).epsilon(1e-14));
  }
  Rng c = make_stream(9, 0);
  const auto X1 = sample_inputs(dist, b, 50);
  const auto X2 = sample_inputs(dist, c, 50);
  CHECK(X1 == X2);
}

TEST_CASE("regularity quantities at d = 10") {
  const auto& dist = dist_d(10);
  const auto rep = regularity_report(dist, 200000, 1);
  CHECK(rep.mean_norm_below_099.mean >= 0.05);
  CHECK(rep.mean_norm_below_099.mean <= 0.99);
  const double target = oracle::radial_integral(10, [](double r) { return std::max(0.0, 1.0 - r); }, 0.0, 1.0);
  CHECK(std::abs(rep.mean_target.mean - target) <= 4.0 * rep.mean_target.se);
  CHECK(rep.mean_target.se < 0.05 * rep.mean_target.mean);
  CHECK(rep.second_moments.size() == rep.second_moment_radii.size());
  CHECK(rep.second_moments.back().mean > 4.0 * rep.second_moments.front().mean);
}

}  // TEST_SUITE
