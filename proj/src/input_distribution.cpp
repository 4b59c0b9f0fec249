#include "mfd3/input_distribution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mfd3/special_functions.hpp"

namespace mfd3 {
namespace {

constexpr double kPi = std::numbers::pi;

// Nodes per e-fold of radius in the geometric component of the grid
// density, relative to one node per oscillation period.
constexpr double kGeometricWeight = 32.0;

// Gauss-Legendre 5-point rule on [-1, 1].
constexpr std::array<double, 5> kGlNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                            0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGlWeights = {0.2369268850561891, 0.4786286704993665,
                                              0.5688888888888889, 0.4786286704993665,
                                              0.2369268850561891};

template <class F>
double gauss_legendre(F&& f, double lo, double hi) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) sum += kGlWeights[i] * f(mid + half * kGlNodes[i]);
  return half * sum;
}

double hankel_power(double nu, double z) {
  const auto [p, q] = hankel_amplitudes(nu, z);
  return p * p + q * q;
}

}  // namespace

void DistributionParams::validate() const {
  if (d < 1) throw std::invalid_argument("DistributionParams: d must be >= 1");
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("DistributionParams: a and b must be > 0");
}

double DistributionParams::kappa() const {
  return 2.0 * kPi * r_d(d) * b * a * std::sqrt(static_cast<double>(d));
}

double radial_pdf(const DistributionParams& params, double r) {
  if (!(r > 0.0)) throw std::domain_error("radial_pdf: r must be > 0");
  const double j = bessel_j(BesselOrder::half_of(params.d), params.kappa() * r);
  return params.d / r * j * j;
}

double radial_pdf_smoothed(const DistributionParams& params, double r) {
  if (!(r > 0.0)) throw std::domain_error("radial_pdf_smoothed: r must be > 0");
  const double kappa = params.kappa();
  const double z = kappa * r;
  return params.d / r * hankel_power(0.5 * params.d, z) / (kPi * z);
}

double RadialDistribution::cdf_at(double r) const {
  if (r <= grid_.front()) return 0.0;
  if (r >= grid_.back()) return cdf_.back();
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), r);
  const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double t = (r - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return cdf_[i] + t * (cdf_[i + 1] - cdf_[i]);
}

double RadialDistribution::quantile(double p) const {
  if (!(p >= 0.0) || p > cdf_.back() * (1.0 + 1e-15))
    throw std::domain_error("RadialDistribution::quantile: p outside [0, 1 - tail_mass]");
  if (p <= 0.0) return grid_.front();
  if (p >= cdf_.back()) return grid_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), p);
  std::size_t i = static_cast<std::size_t>(it - cdf_.begin()) - 1;
  // Skip flat cells (zero mass) so the result is the left-continuous inverse.
  const double width = cdf_[i + 1] - cdf_[i];
  if (width <= 0.0) return grid_[i + 1];
  const double t = (p - cdf_[i]) / width;
  return grid_[i] + t * (grid_[i + 1] - grid_[i]);
}

double RadialDistribution::truncated_moment(double R, int power) const {
  if (power < 0) throw std::domain_error("RadialDistribution::truncated_moment: power must be >= 0");
  const double k = power + 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < grid_.size() && grid_[i] < R; ++i) {
    const double lo = grid_[i];
    const double hi = std::min(grid_[i + 1], R);
    const double density = (cdf_[i + 1] - cdf_[i]) / (grid_[i + 1] - grid_[i]);
    sum += density * (std::pow(hi, k) - std::pow(lo, k)) / k;
  }
  return sum;
}

RadialDistribution build_radial_distribution(const DistributionParams& params, int n_grid,
                                              double tail_bound) {
  params.validate();
  if (n_grid < 1000) throw std::invalid_argument("build_radial_distribution: n_grid must be >= 1000");
  if (!(tail_bound > 0.0 && tail_bound < 0.1))
    throw std::invalid_argument("build_radial_distribution: tail_bound must be in (0, 0.1)");

  const int d = params.d;
  const double nu = 0.5 * d;
  const double kappa = params.kappa();

  // Left edge: the mass below z0 = kappa r0 is at most (z0/2)^d / Gamma(nu+1)^2 <= 1e-12.
  const double z0 = std::min(2.0 * std::exp((std::log(1e-12) + 2.0 * log_gamma(nu + 1.0)) / d),
                             0.5 * std::max(nu, 1.0));
  const double r0 = z0 / kappa;
  // Switch to the averaged density once the Hankel expansion is accurate.
  const double z_switch = std::max(2.0 * nu * nu, 400.0);
  const double r_switch = z_switch / kappa;

  // Node placement: s(r) = g ln(r/r0) + kappa (r - r0) / pi, nodes at equal s.
  auto s_of = [&](double r) { return kGeometricWeight * std::log(r / r0) + kappa * (r - r0) / kPi; };
  auto ds_of = [&](double r) { return kGeometricWeight / r + kappa / kPi; };
  const double s_total = s_of(r_switch);
  // n_grid is a floor: at least 8 nodes per oscillation and per 1/g e-fold.
  n_grid = std::max(n_grid, static_cast<int>(std::ceil(8.0 * s_total)));
  const double nodes_per_s = n_grid / s_total;

  RadialDistribution dist;
  dist.params_ = params;
  std::vector<double>& grid = dist.grid_;
  std::vector<double>& mass = dist.cdf_;  // cumulative, unnormalised for now
  grid.reserve(static_cast<std::size_t>(n_grid) + 4096);
  mass.reserve(grid.capacity());
  grid.push_back(r0);
  mass.push_back(0.0);

  auto pdf = [&](double r) { return radial_pdf(params, r); };
  double envelope = 0.0;
  double previous_pdf = pdf(r0);
  double r = r0;
  for (int i = 1; i <= n_grid; ++i) {
    const double target = s_total * i / n_grid;
    double next = r;
    // s is increasing and concave, so Newton from the left converges monotonically.
    for (int it = 0; it < 100; ++it) {
      const double step = (target - s_of(next)) / ds_of(next);
      next += step;
      if (std::abs(step) <= 1e-15 * next) break;
    }
    if (i == n_grid) next = r_switch;
    const double mid = 0.5 * (r + next);
    const double p_mid = pdf(mid);
    const double p_next = pdf(next);
    mass.push_back(mass.back() + (next - r) / 6.0 * (previous_pdf + 4.0 * p_mid + p_next));
    grid.push_back(next);
    envelope = std::max({envelope, mid * mid * p_mid, next * next * p_next});
    previous_pdf = p_next;
    r = next;
  }
  dist.r_oscillatory_end_ = r_switch;

  // Tail envelope C(R) / R with C(R) = d/(pi kappa) (P^2+Q^2)(kappa R) (1 + 1/(kappa R)).
  // P^2 + Q^2 decreases towards 1 for nu >= 1/2, so this bounds the averaged tail;
  // the 1/(kappa R) factor covers the oscillating remainder.
  auto tail_envelope = [&](double radius) {
    const double z = kappa * radius;
    return d / (kPi * kappa) * hankel_power(nu, z) * (1.0 + 1.0 / z) / radius;
  };
  double r_max = std::max(r_switch, d / (kPi * kappa * tail_bound));
  for (int it = 0; it < 50 && tail_envelope(r_max) > tail_bound; ++it)
    r_max *= tail_envelope(r_max) / tail_bound * (1.0 + 1e-12);
  if (!(tail_envelope(r_max) <= tail_bound) || !(r_max * kappa < 1e13))
    throw std::runtime_error("build_radial_distribution: tail envelope cannot certify tail_bound = " +
                             std::to_string(tail_bound));

  // Geometric part with the same per-e-fold density as above.
  const double per_efold = std::clamp(nodes_per_s * kGeometricWeight, 64.0, 4096.0);
  const int n_tail_cells = std::max(1, static_cast<int>(std::ceil(per_efold * std::log(r_max / r_switch))));
  auto smoothed = [&](double x) { return radial_pdf_smoothed(params, x); };
  for (int i = 1; i <= n_tail_cells; ++i) {
    const double next = (i == n_tail_cells)
                            ? r_max
                            : r_switch * std::exp(std::log(r_max / r_switch) * i / n_tail_cells);
    if (next <= r) continue;
    mass.push_back(mass.back() + gauss_legendre(smoothed, r, next));
    grid.push_back(next);
    r = next;
  }
  envelope = std::max(envelope, 2.0 * d / (kPi * kappa) * hankel_power(nu, z_switch));

  // Averaged mass above r_max, integrated in u = 1/r where the integrand is smooth.
  const double tail = gauss_legendre(
      [&](double u) { return d / (kPi * kappa) * hankel_power(nu, kappa / u); }, 0.0, 1.0 / r_max);

  const double total = mass.back() + tail;
  for (double& m : mass) m /= total;
  dist.raw_mass_ = total;
  dist.tail_mass_ = tail / total;
  dist.envelope_constant_ = envelope;
  return dist;
}

double radius_from_uniform(const RadialDistribution& dist, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("radius_from_uniform: u must be in [0, 1]");
  return dist.quantile(u * dist.cdf().back());
}

double sample_radius(const RadialDistribution& dist, Rng& rng) {
  return radius_from_uniform(dist, uniform01(rng));
}

void sample_direction(int d, Rng& rng, std::span<double> out) {
  if (d < 1) throw std::invalid_argument("sample_direction: d must be >= 1");
  if (static_cast<int>(out.size()) != d) throw std::invalid_argument("sample_direction: size mismatch");
  std::normal_distribution<double> normal(0.0, 1.0);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : out) {
      v = normal(rng);
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double norm = std::sqrt(norm2);
  for (double& v : out) v /= norm;
}

Eigen::VectorXd sample_direction(int d, Rng& rng) {
  Eigen::VectorXd out(d);
  sample_direction(d, rng, std::span<double>(out.data(), static_cast<std::size_t>(d)));
  return out;
}

Batch sample_directions(int d, Rng& rng, int n) {
  if (n < 0) throw std::invalid_argument("sample_directions: n must be >= 0");
  Batch out(n, d);
  for (int i = 0; i < n; ++i) sample_direction(d, rng, std::span<double>(out.row(i).data(), static_cast<std::size_t>(d)));
  return out;
}

Eigen::VectorXd sample_input(const RadialDistribution& dist, Rng& rng) {
  const double radius = sample_radius(dist, rng);
  return radius * sample_direction(dist.params().d, rng);
}

Batch sample_inputs(const RadialDistribution& dist, Rng& rng, int n) {
  const int d = dist.params().d;
  Batch out(n, d);
  for (int i = 0; i < n; ++i) {
    const double radius = sample_radius(dist, rng);
    std::span<double> row(out.row(i).data(), static_cast<std::size_t>(d));
    sample_direction(d, rng, row);
    for (double& v : row) v *= radius;
  }
  return out;
}

RegularityReport regularity_report(const RadialDistribution& dist, std::size_t n_samples,
                                   std::uint64_t seed, double reg_c) {
  RegularityReport report;
  const int d = dist.params().d;
  report.d = d;
  report.n_samples = n_samples;
  report.reg_c = reg_c;

  // Only the radius matters for every quantity below.
  Rng rng = make_stream(seed, 0);
  std::vector<double> radii(n_samples);
  for (double& r : radii) r = sample_radius(dist, rng);

  std::vector<double> values(n_samples);
  auto estimate = [&](auto&& g) {
    for (std::size_t i = 0; i < n_samples; ++i) values[i] = g(radii[i]);
    return mean_estimate(values);
  };
  report.mean_norm_below_099 = estimate([](double r) { return r <= 0.99 ? r : 0.0; });
  report.mean_target = estimate([](double r) { return std::max(1.0 - r, 0.0); });
  const double cut = reg_c * d;
  report.mean_norm_below_cd = estimate([cut](double r) { return r <= cut ? r : 0.0; });

  for (double radius = 1.0; radius <= 0.5 * dist.r_max(); radius *= 4.0) {
    report.second_moment_radii.push_back(radius);
    report.second_moments.push_back(estimate([radius](double r) { return r <= radius ? r * r : 0.0; }));
  }

  std::sort(radii.begin(), radii.end());
  const double half_max = 0.5 * dist.r_max();
  for (double radius = 1.0; radius <= half_max; radius *= 1.05) {
    const auto above = radii.end() - std::lower_bound(radii.begin(), radii.end(), radius);
    const double p = static_cast<double>(above) / static_cast<double>(n_samples);
    report.max_tail_product = std::max(report.max_tail_product, radius * p);
  }
  return report;
}

}  // namespace mfd3
