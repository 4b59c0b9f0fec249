// Spherically symmetric heavy-tailed input law with radial density
//   p(r) = (d / r) J_{d/2}^2(kappa r),   kappa = 2 pi R_d b a sqrt(d),
// tabulated for inverse-CDF sampling.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mfd3/random.hpp"
#include "mfd3/stats.hpp"

namespace mfd3 {

/// Row-major block of input samples, one sample per row.
using Batch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DistributionParams {
  int d = 1;
  /// The two universal scale constants of the law. Only the product a * b
  /// enters the density.
  double a = 1.0;
  double b = 1.0;

  void validate() const;
  /// Frequency kappa of the Bessel argument kappa * r.
  double kappa() const;
};

/// Exact radial density. Throws std::domain_error for r <= 0.
double radial_pdf(const DistributionParams& params, double r);

/// Oscillation-averaged radial density (d / r) (P^2 + Q^2) / (pi kappa r),
/// valid once kappa * r is in the Hankel regime.
double radial_pdf_smoothed(const DistributionParams& params, double r);

inline constexpr int kDefaultGridNodes = 1 << 16;
inline constexpr double kDefaultTailBound = 1e-4;

/// Immutable tabulation of the radial CDF on [r_min, r_max].
///
/// The grid has two parts: up to the start of the Hankel regime the nodes
/// mix geometric spacing with a fixed number of nodes per oscillation and
/// cells are integrated with Simpson's rule on the exact density; beyond it
/// the nodes are geometric and cells integrate the oscillation-averaged
/// density. The mass above r_max is recorded as tail_mass.
class RadialDistribution {
 public:
  const DistributionParams& params() const { return params_; }
  std::span<const double> grid() const { return grid_; }
  std::span<const double> cdf() const { return cdf_; }

  double r_min() const { return grid_.front(); }
  double r_max() const { return grid_.back(); }
  /// Radius where the tabulation switches to the averaged density.
  double r_oscillatory_end() const { return r_oscillatory_end_; }
  /// 1 - cdf(r_max).
  double tail_mass() const { return tail_mass_; }
  /// Total mass before normalisation (quadrature of the density plus the
  /// tail estimate); should be 1 up to quadrature error.
  double raw_mass() const { return raw_mass_; }
  /// C such that radial_pdf(r) <= C / r^2 on the tabulated range and beyond.
  double envelope_constant() const { return envelope_constant_; }

  /// Linear interpolation of the tabulated CDF; 0 below r_min, and the
  /// certified upper value 1 - tail_mass at r_max.
  double cdf_at(double r) const;
  /// Inverse of cdf_at for p in [0, 1 - tail_mass].
  double quantile(double p) const;
  /// E[r^power 1{r <= R}] under the tabulated (piecewise-uniform) law,
  /// ignoring the mass beyond r_max.
  double truncated_moment(double R, int power) const;

  friend RadialDistribution build_radial_distribution(const DistributionParams&, int, double);

 private:
  DistributionParams params_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
  double r_oscillatory_end_ = 0.0;
  double tail_mass_ = 0.0;
  double raw_mass_ = 0.0;
  double envelope_constant_ = 0.0;
};

/// Requires n_grid >= 1000 and 0 < tail_bound < 0.1. Throws
/// std::runtime_error if the tail envelope cannot certify tail_bound.
RadialDistribution build_radial_distribution(const DistributionParams& params,
                                              int n_grid = kDefaultGridNodes,
                                              double tail_bound = kDefaultTailBound);

/// Inverse-CDF radius draw restricted to [r_min, r_max].
double sample_radius(const RadialDistribution& dist, Rng& rng);
/// Radius for a given uniform u in [0, 1]; u = 0 gives r_min, u = 1 gives r_max.
double radius_from_uniform(const RadialDistribution& dist, double u);

/// Uniform direction on S^{d-1} by Gaussian normalisation, written to out.
void sample_direction(int d, Rng& rng, std::span<double> out);
Eigen::VectorXd sample_direction(int d, Rng& rng);
/// n uniform directions, one per row.
Batch sample_directions(int d, Rng& rng, int n);

/// radius * direction, radius drawn first.
Eigen::VectorXd sample_input(const RadialDistribution& dist, Rng& rng);
/// Fills n rows of inputs.
Batch sample_inputs(const RadialDistribution& dist, Rng& rng, int n);

/// Monte-Carlo checks on the radial law. Truncated expectations are
/// unnormalised: E_{|x|<=R} g = E[g(x) 1{|x| <= R}].
struct RegularityReport {
  int d = 0;
  std::size_t n_samples = 0;
  double reg_c = 1.0;
  Estimate mean_norm_below_099;   // E_{|x|<=0.99} |x|
  Estimate mean_target;           // E f*(x)
  Estimate mean_norm_below_cd;    // E_{|x|<=c d} |x|
  /// Truncated second moments E_{|x|<=R} |x|^2 on a geometric radius sweep.
  std::vector<double> second_moment_radii;
  std::vector<Estimate> second_moments;
  /// max over a sweep R in [1, r_max/2] of R * P(|x| >= R).
  double max_tail_product = 0.0;
};

RegularityReport regularity_report(const RadialDistribution& dist, std::size_t n_samples,
                                   std::uint64_t seed, double reg_c = 1.0);

}  // namespace mfd3
