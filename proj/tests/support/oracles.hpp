// Independent reference computations for the test suites. Nothing here calls
// the library's special functions or forward pass.
#pragma once

#include <functional>
#include <vector>

#include "mfd3/network.hpp"

namespace oracle {

/// kappa = 2 pi R_d (a b) sqrt(d), R_d from Boost's lgamma.
double kappa(int d, double ab = 1.0);

/// (d / r) J_{d/2}(kappa r)^2 with Boost's cyl_bessel_j.
double radial_pdf(int d, double r, double ab = 1.0);

/// Integral of h(r) p(r) over [lo, hi], Gauss-Kronrod on half-period panels.
double radial_integral(int d, const std::function<double(double)>& h, double lo, double hi, double ab = 1.0);

/// Total mass: panels up to kappa R = max(2e4, 40 nu^2), then the averaged tail
/// d / (pi kappa R).
double radial_mass(int d, double ab = 1.0);

double radial_cdf(int d, double r, double ab = 1.0);
/// Bisection on radial_cdf.
double radial_quantile(int d, double p, double ab = 1.0);

/// sup_r r^2 p(r) from a dense scan of z J^2(z) (Boost) up to z = 2e4 plus the
/// 2/pi large-z limit; bounds R P(|x| >= R) for every R.
double tail_envelope(int d, double ab = 1.0);

/// Direct loops: F(x) = mean_i |v_i| relu(v_i.x), f = mean_j relu(w_j F + b_j).
double naive_F(const mfd3::NetworkState& s, const mfd3::Vector& x);
double naive_f(const mfd3::NetworkState& s, const mfd3::Vector& x);
double naive_loss(const mfd3::NetworkState& s, const mfd3::Batch& X);

/// Central-difference mean-field velocities, i.e. -m * dL/dtheta per neuron,
/// plus a flag per neuron marking a ReLU pattern change within +-h.
struct FdGradient {
  mfd3::Matrix dv1;
  mfd3::Vector dv2;
  mfd3::Vector dr2;
  std::vector<bool> kink1;
  std::vector<bool> kink2;
};
FdGradient finite_difference_gradient(mfd3::NetworkState s, const mfd3::Batch& X, double h);

}  // namespace oracle
