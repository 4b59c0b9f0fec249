// Monte-Carlo checks of the closed-form identities for spherically symmetric
// laws, and of symmetry preservation under one step of the flow.
//
// Each identity is estimated on paired samples: both sides are evaluated on
// the same draws and the z-score uses the spread of the per-sample difference.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfd3/dynamics.hpp"
#include "mfd3/input_distribution.hpp"
#include "mfd3/network.hpp"
#include "mfd3/random.hpp"

namespace mfd3 {

inline constexpr double kDefaultZThreshold = 4.0;

struct IdentityReport {
  std::string name;
  double mc_estimate = 0.0;
  double mc_stderr = 0.0;
  double closed_form = 0.0;
  /// (mc_estimate - closed_form) / mc_stderr; 0 when both sides agree
  /// exactly with zero spread.
  double z_score = 0.0;

  bool passed(double threshold = kDefaultZThreshold) const { return std::abs(z_score) <= threshold; }
};

/// A radial profile g(x) = g(|x|).
using RadialFn = std::function<double(double)>;

/// Law of the neuron norm |w| for check_two_homogeneous; the direction is
/// always uniform.
struct NormLaw {
  std::string name;
  std::function<double(Rng&)> draw;
  double second_moment = 0.0;

  static NormLaw constant(double s);
  /// |w| uniform on [lo, hi].
  static NormLaw uniform(double lo, double hi);
};

struct CheckOptions {
  std::uint64_t seed = 1;
  /// Multiplies C_Gamma in every closed form. Anything but 1 should make the
  /// checks fail; used as a sensitivity canary.
  double c_gamma_scale = 1.0;
  int max_workers = worker_count();
};

/// E_{w~mu} |w| relu(w . x) against C_Gamma E|w|^2 |x| / sqrt(d), n neuron draws.
IdentityReport check_two_homogeneous(const NormLaw& law, int d, const Vector& x, std::size_t n,
                                     const CheckOptions& opt = {});

/// E_x[g relu(v . x)] against (C_Gamma / sqrt(d)) E_x[g |x|] |v|.
IdentityReport check_g_sigma(const RadialFn& g, const Vector& v, const RadialDistribution& dist, std::size_t n,
                             const CheckOptions& opt = {});

/// E_x[g relu'(v . x) x] against (C_Gamma / sqrt(d)) E_x[g |x|] v/|v|, one
/// report per coordinate of an orthonormal basis whose first vector is v/|v|
/// (the remaining d - 1 closed forms are 0).
std::vector<IdentityReport> check_g_sigma_prime(const RadialFn& g, const Vector& v, const RadialDistribution& dist,
                                                std::size_t n, const CheckOptions& opt = {});

/// E_x[g F] against alpha E_x[g |x|], for any first layer.
IdentityReport check_gF_corollary(const NetworkState& state, const RadialFn& g, const RadialDistribution& dist,
                                  std::size_t n, const CheckOptions& opt = {});

/// One unclipped step from a first layer made of n_copies / 2 uniformly
/// rotated copies of a single neuron and their antipodes (all of norm
/// sigma1), with the second layer at w2 = -1, b2 = sigma_r.
struct SymmetricFlowReport {
  int n_neurons = 0;
  int batch = 0;
  /// max_i |tangential part of dv_i| / max_i |radial part of dv_i|.
  double tangential_ratio = 0.0;
  double delta_alpha = 0.0;
  /// eta (4 C_Gamma / sqrt(d)) E[S F] on the same batch.
  double predicted_delta_alpha = 0.0;
  /// |delta_alpha - predicted| / |delta_alpha|.
  double alpha_residual = 0.0;
  /// max_i d|v_i|^2 / min_i d|v_i|^2 - 1.
  double radial_nonuniformity = 0.0;
};

SymmetricFlowReport check_symmetric_flow(const HyperParams& hp, int n_copies, int batch,
                                         const RadialDistribution& dist, const CheckOptions& opt = {});

struct SuiteSettings {
  int d = 10;
  std::size_t n = 1000000;
  std::uint64_t seed = 1;
  /// Seeds seed and seed + seed_stride are run; a check fails only if it
  /// fails in both.
  std::uint64_t seed_stride = 1000003;
  double z_threshold = kDefaultZThreshold;
  double c_gamma_scale = 1.0;
  /// Optional first layer for the corollary check; a fixed anisotropic layer
  /// is used when empty.
  std::optional<NetworkState> state;
  int max_workers = worker_count();
};

struct SuiteEntry {
  IdentityReport first;
  IdentityReport second;
  bool failed = false;
};

struct SuiteResult {
  std::vector<SuiteEntry> entries;
  bool passed() const;
};

SuiteResult run_identity_suite(const SuiteSettings& settings, const RadialDistribution& dist);

}  // namespace mfd3
