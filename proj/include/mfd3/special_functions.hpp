// Bessel and Gamma-derived quantities used by the input law and the
// spherical-symmetry identities.
#pragma once

#include <stdexcept>

namespace mfd3 {

/// Real order nu >= 0 of a Bessel function of the first kind.
class BesselOrder {
 public:
  explicit BesselOrder(double nu) : nu_(nu) {
    if (!(nu >= 0.0)) throw std::domain_error("BesselOrder: nu must be >= 0");
  }
  /// Order nu = d / 2 for an input dimension d.
  static BesselOrder half_of(int d) { return BesselOrder(0.5 * d); }

  double nu() const { return nu_; }

 private:
  double nu_;
};

/// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double log_gamma(double x);

/// J_nu(x) for x >= 0.
///
/// Dispatches between the ascending series (x^2 <= 4(nu + 1)), the Hankel
/// large-argument expansion (x >= max(2 nu^2, 25)), forward recurrence from
/// the fractional order for the oscillatory region x >= nu, and Miller's
/// downward recurrence normalised by the Neumann sum otherwise.
double bessel_j(BesselOrder order, double x);

/// Hankel asymptotic amplitudes P, Q with
///   J_nu(x) = sqrt(2 / (pi x)) (P cos w - Q sin w),  w = x - (nu/2 + 1/4) pi.
/// Only meaningful in the large-argument regime.
struct HankelAmplitudes {
  double p;
  double q;
};
HankelAmplitudes hankel_amplitudes(double nu, double x);

/// Large-argument regime test used by bessel_j; callers that need the
/// oscillation-averaged square of J use it to decide when P, Q are valid.
bool in_hankel_regime(double nu, double x);

/// C_Gamma = Gamma(d/2) sqrt(d) / (2 sqrt(pi) Gamma((d+1)/2)).
double c_gamma(int d);

/// R_d = Gamma(d/2 + 1)^(1/d) / sqrt(pi).
double r_d(int d);

struct DimensionConstants {
  int d;
  double c_gamma;
  double r_d;

  static DimensionConstants of(int d) {
    return DimensionConstants{d, mfd3::c_gamma(d), mfd3::r_d(d)};
  }
};

}  // namespace mfd3
