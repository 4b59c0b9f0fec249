#include "mfd3/special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mfd3 {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Threshold at which downward recurrence values are rescaled.
constexpr double kBig = 1e250;

double ascending_series(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 1000; ++k) {
    term *= -q / (k * (nu + k));
    sum += term;
    if (std::abs(term) <= 0.5 * kEps * std::abs(sum)) break;
  }
  const double log_prefactor = nu * std::log(0.5 * x) - log_gamma(nu + 1.0);
  return std::exp(log_prefactor) * sum;
}

double hankel(double nu, double x) {
  const auto [p, q] = hankel_amplitudes(nu, x);
  // cos/sin of w = x - phase, expanded so that the large x is reduced once.
  const double phase = (0.5 * nu + 0.25) * kPi;
  const double cx = std::cos(x), sx = std::sin(x);
  const double cp = std::cos(phase), sp = std::sin(phase);
  const double cw = cx * cp + sx * sp;
  const double sw = sx * cp - cx * sp;
  return std::sqrt(2.0 / (kPi * x)) * (p * cw - q * sw);
}

// Miller's algorithm: recur J_{mu+k} downward from a large trial order and
// normalise with the Neumann sum (x/2)^mu = sum_k c_k J_{mu+2k}(x).
// Returns J at orders mu + n and mu + n + 1.
struct MillerPair {
  double at_n;
  double at_n_plus_1;
};

MillerPair miller(double mu, int n, double x) {
  const double top = std::max(static_cast<double>(n), x);
  int start = static_cast<int>(top) + 30 + static_cast<int>(std::sqrt(160.0 * top));
  if (start % 2 != 0) ++start;

  // Neumann coefficients c_k = (mu + 2k) Gamma(mu + k) / k!, built downward
  // from the top via the ratio Gamma(mu+k)/k! computed once in log space.
  auto neumann_coefficient = [mu](int k) {
    if (k == 0) return std::exp(log_gamma(mu + 1.0));
    return (mu + 2.0 * k) * std::exp(log_gamma(mu + k) - log_gamma(k + 1.0));
  };

  double above = 0.0;   // J_{mu+k+1}
  double here = 1e-300; // J_{mu+k}
  double norm = 0.0;
  double result_n = 0.0;
  double result_n1 = 0.0;
  for (int k = start; k >= 0; --k) {
    if (k == n) result_n = here;
    if (k == n + 1) result_n1 = here;
    if (k % 2 == 0) norm += neumann_coefficient(k / 2) * here;
    if (k == 0) break;
    const double below = 2.0 * (mu + k) / x * here - above;
    above = here;
    here = below;
    if (std::abs(here) > kBig) {
      here /= kBig;
      above /= kBig;
      norm /= kBig;
      result_n /= kBig;
      result_n1 /= kBig;
    }
  }
  const double scale = std::pow(0.5 * x, mu) / norm;
  return {result_n * scale, result_n1 * scale};
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: x must be > 0");
  // lgamma_r avoids the global signgam write of std::lgamma.
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

HankelAmplitudes hankel_amplitudes(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0;
  double q = 0.0;
  double term = 1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (8.0 * k * x);
    const double magnitude = std::abs(term);
    if (magnitude == 0.0) break;  // terminates exactly for half-integer nu
    if (magnitude > previous) break;
    previous = magnitude;
    // k = 1, 2, 3, 4, ... contribute +Q, -P, -Q, +P, ...
    switch (k % 4) {
      case 1: q += term; break;
      case 2: p -= term; break;
      case 3: q -= term; break;
      default: p += term; break;
    }
    if (magnitude < 0.25 * kEps) break;
  }
  return {p, q};
}

bool in_hankel_regime(double nu, double x) {
  return x >= std::max(2.0 * nu * nu, 25.0);
}

double bessel_j(BesselOrder order, double x) {
  const double nu = order.nu();
  if (!(x >= 0.0)) throw std::domain_error("bessel_j: x must be >= 0");
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (x * x <= 4.0 * (nu + 1.0)) return ascending_series(nu, x);
  if (in_hankel_regime(nu, x)) return hankel(nu, x);

  const int n = static_cast<int>(std::floor(nu));
  const double mu = nu - n;
  if (x >= nu) {
    // Oscillatory side of the turning point: forward recurrence is stable.
    double lower, upper;
    if (in_hankel_regime(mu + 1.0, x)) {
      lower = hankel(mu, x);
      upper = hankel(mu + 1.0, x);
    } else {
      const auto pair = miller(mu, 0, x);
      lower = pair.at_n;
      upper = pair.at_n_plus_1;
    }
    for (int k = 1; k <= n; ++k) {
      const double next = 2.0 * (mu + k) / x * upper - lower;
      lower = upper;
      upper = next;
    }
    return lower;
  }
  return miller(mu, n, x).at_n;
}

double c_gamma(int d) {
  if (d < 1) throw std::domain_error("c_gamma: d must be >= 1");
  const double half = 0.5 * d;
  return std::exp(log_gamma(half) - log_gamma(half + 0.5)) * std::sqrt(static_cast<double>(d)) /
         (2.0 * std::sqrt(kPi));
}

double r_d(int d) {
  if (d < 1) throw std::domain_error("r_d: d must be >= 1");
  return std::exp(log_gamma(0.5 * d + 1.0) / d) / std::sqrt(kPi);
}

}  // namespace mfd3
