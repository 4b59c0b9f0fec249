#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "mfd3/special_functions.hpp"

using namespace mfd3;
using std::numbers::pi;

TEST_SUITE("special_functions") {

TEST_CASE("log_gamma closed forms") {
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(log_gamma(0.5) == doctest::Approx(0.5 * std::log(pi)).epsilon(1e-14));
  CHECK(log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-14));
  CHECK_THROWS_AS(log_gamma(0.0), std::domain_error);
  CHECK_THROWS_AS(log_gamma(-2.5), std::domain_error);
  CHECK_THROWS_AS(log_gamma(std::nan("")), std::domain_error);
}

TEST_CASE("log_gamma against Boost") {
  for (double x : {1e-8, 0.1, 0.75, 3.3, 17.5, 50.5, 500.25, 1e5})
    CHECK(log_gamma(x) == doctest::Approx(boost::math::lgamma(x)).epsilon(1e-13));
}

TEST_CASE("bessel_j closed forms") {
  CHECK(bessel_j(BesselOrder(0.0), 0.0) == 1.0);
  CHECK(std::abs(bessel_j(BesselOrder(0.5), pi)) < 1e-15);
  CHECK(bessel_j(BesselOrder(0.5), pi / 2) == doctest::Approx(std::sqrt(2.0 / (pi * pi / 2))).epsilon(1e-14));
  CHECK(bessel_j(BesselOrder(3.0), 0.0) == 0.0);
  CHECK_THROWS_AS(BesselOrder(-1.0), std::domain_error);
  CHECK_THROWS_AS(bessel_j(BesselOrder(1.0), -0.1), std::domain_error);
}

TEST_CASE("bessel_j against Boost across regimes") {
  // Relative error where J is monotone, error relative to the envelope
  // sqrt(2 / (pi x)) in the oscillatory region.
  double worst = 0.0;
  for (double nu : {0.5, 1.0, 2.5, 5.0, 12.5, 50.0, 250.0}) {
    for (double x = 1e-3; x < 2e4; x *= 1.037) {
      const double ref = boost::math::cyl_bessel_j(nu, x);
      const double got = bessel_j(BesselOrder(nu), x);
      const double scale = x > nu ? std::max(std::abs(ref), std::sqrt(2.0 / (pi * x))) : std::abs(ref);
      if (scale < 1e-290) continue;
      worst = std::max(worst, std::abs(got - ref) / scale);
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("hankel amplitudes reproduce J in their regime") {
  const double nu = 5.0;
  for (double x : {100.0, 1000.0, 12345.0}) {
    REQUIRE(in_hankel_regime(nu, x));
    const auto [p, q] = hankel_amplitudes(nu, x);
    const double w = x - (nu / 2 + 0.25) * pi;
    const double j = std::sqrt(2.0 / (pi * x)) * (p * std::cos(w) - q * std::sin(w));
    CHECK(std::abs(j - boost::math::cyl_bessel_j(nu, x)) < 1e-12 * std::sqrt(2.0 / (pi * x)));
  }
  CHECK_FALSE(in_hankel_regime(50.0, 60.0));
}

TEST_CASE("c_gamma") {
  CHECK(std::abs(c_gamma(1) / 0.5 - 1.0) <= 1e-12);
  CHECK(std::abs(c_gamma(2) / (std::sqrt(2.0) / pi) - 1.0) <= 1e-12);
  CHECK(std::abs(c_gamma(1000000) - 1.0 / std::sqrt(2.0 * pi)) <= 1e-3);
  for (int d : {3, 7, 64, 301}) {
    const double ref = boost::math::tgamma_ratio(0.5 * d, 0.5 * (d + 1)) * std::sqrt(double(d)) / (2.0 * std::sqrt(pi));
    CHECK(c_gamma(d) == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK_THROWS_AS(c_gamma(0), std::domain_error);
}

TEST_CASE("r_d") {
  CHECK(r_d(2) == doctest::Approx(1.0 / std::sqrt(pi)).epsilon(1e-14));
  CHECK(r_d(1) == doctest::Approx(0.5).epsilon(1e-14));
  // Stirling: Gamma(d/2 + 1)^(1/d) ~ sqrt(d / (2e)) (pi d)^(1/(2d)).
  const double d = 100.0;
  const double stirling = std::sqrt(d / (2.0 * std::numbers::e)) * std::pow(pi * d, 0.5 / d) / std::sqrt(pi);
  CHECK(r_d(100) == doctest::Approx(stirling).epsilon(1e-3));
  CHECK(r_d(100) >= 0.3 * std::sqrt(d / pi));
  CHECK(r_d(100) <= 3.0 * std::sqrt(d / pi));
  const auto k = DimensionConstants::of(10);
  CHECK(k.c_gamma == c_gamma(10));
  CHECK(k.r_d == r_d(10));
}

}  // TEST_SUITE
