// Clipped gradient flow for the mean-field network, discretised as SGD with
// a fresh batch every step.
//
// Velocities are the mean-field ones, i.e. width times the negative partial
// derivative of the loss:
//   dv1/dt = E_x Proj_{R_v1}[ S(x) (v1/|v1| relu(v1.x) + |v1| relu'(v1.x) x) ]
//   dv2/dt = E_x Proj_{R_v2}[ (f* - f) relu'(v2 F + r2) F ]
//   dr2/dt = E_x Proj_{R_r2}[ (f* - f) relu'(v2 F + r2) ]
// with S(x) = (f* - f) E_{(w2,b2)} relu'(w2 F + b2) w2. Proj is applied to
// each per-sample integrand before averaging.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "mfd3/diagnostics.hpp"
#include "mfd3/input_distribution.hpp"
#include "mfd3/network.hpp"
#include "mfd3/parallel.hpp"
#include "mfd3/random.hpp"

namespace mfd3 {

/// Non-finite parameters appeared during training.
class NumericAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClipRadii {
  double v1 = std::numeric_limits<double>::infinity();
  double v2 = std::numeric_limits<double>::infinity();
  double r2 = std::numeric_limits<double>::infinity();

  /// All three infinite: projection never triggers.
  static ClipRadii none() { return {}; }
};

struct HyperParams {
  int d = 10;
  int m1 = 512;
  int m2 = 128;
  double sigma1 = 1.0 / std::sqrt(10.0);
  double sigma2 = 1e-6;
  double sigma_r = 0.5;
  // R_v1 = c_v1 d, R_v2 = c_v2 d^3, R_r2 = c_r2. Infinity disables a clip.
  double c_v1 = 10.0;
  double c_v2 = 10.0;
  double c_r2 = 10.0;
  double eta = 1e-4;
  int batch = 4096;
  long max_steps = 10000;
  double eps_target = 1e-3;
  long checkpoint_every = 100;

  /// Defaults that scale with d: sigma1 = 1/sqrt(d), eta = 1e-3/d.
  static HyperParams defaults(int d);

  ClipRadii clip_radii() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// First layer uniform on the sphere of radius sigma1, w2 ~ N(0, sigma2^2),
/// every b2 = sigma_r.
NetworkState init_network(const HyperParams& hp, Rng& rng);

/// S(x) = (f*(x) - f(x)) * mean_j relu'(w2_j F(x) + b2_j) w2_j.
double score_S(const NetworkState& state, const Eigen::Ref<const Vector>& x);

/// Per-neuron velocities plus the fraction of (sample, neuron) integrands
/// that were projected.
struct NeuronGrad {
  Matrix dv1;
  Vector dv2;
  Vector dr2;
  double clip_rate_v1 = 0.0;
  double clip_rate_v2 = 0.0;
  double clip_rate_r2 = 0.0;

  /// mean_i |dv1_i|^2 + mean_j (dv2_j^2 + dr2_j^2). For an unclipped
  /// gradient, a step of size eta changes the loss by about -eta times this.
  double mean_sq_norm() const;
};

/// Multiplier that maps a vector of norm `norm` onto the ball of radius R.
inline double projection_scale(double norm, double radius) {
  return norm > radius ? radius / norm : 1.0;
}

/// Reference single-sample integrands (clip rates are 0 or 1 per neuron).
NeuronGrad per_sample_grads(const NetworkState& state, const Eigen::Ref<const Vector>& x,
                            const ClipRadii& radii);

/// Batch average of the projected integrands. The batch is processed in
/// fixed 256-row chunks reduced in chunk order, so the result does not depend
/// on the worker count.
NeuronGrad batch_gradient(const NetworkState& state, const Batch& inputs, const ClipRadii& radii,
                          int max_workers = worker_count());

/// theta <- theta + eta * velocity, for all neurons at once.
void apply_update(NetworkState& state, const NeuronGrad& grad, double eta);

struct BatchUpdate {
  NetworkState state;
  NeuronGrad grad;
};
BatchUpdate batch_update(const NetworkState& state, const Batch& inputs, double eta, const ClipRadii& radii,
                         int max_workers = worker_count());

/// Stage after which first_layer_drift is measured against a fresh reference.
enum class RereferenceAt { never, T11, T12, T1 };

struct TrainSettings {
  HyperParams hp;
  DistributionParams dist_params;
  std::uint64_t seed = 0;
  /// Training samples come from `streams` independent streams, one per
  /// contiguous block of the batch.
  int streams = 16;
  int diag_samples = 16384;
  int direction_samples = 1024;
  int radii_samples = 200;
  int fshape_directions = 64;
  double trunc_c = 1.0;
  double stage_c12 = 1.0;
  double stage_c1 = 100.0;
  RereferenceAt rereference = RereferenceAt::never;
  /// Where the last finite state is written before a NumericAbort; empty to skip.
  std::string abort_dump_path;
  int max_workers = worker_count();
};

// Stream layout for a run with base seed s: s + 0 initialisation, s + 1
// diagnostic samples, s + 2 probe directions, s + 3 profile directions,
// s + 16 + k training block k.
inline constexpr std::uint64_t kStreamInit = 0;
inline constexpr std::uint64_t kStreamDiagSamples = 1;
inline constexpr std::uint64_t kStreamDiagDirections = 2;
inline constexpr std::uint64_t kStreamProfileDirections = 3;
inline constexpr std::uint64_t kStreamTrainBase = 16;

struct Checkpoint {
  const DiagnosticsRecord& record;
  const NetworkState& state;
  const RadialProfile& profile;
};

struct TrainSinks {
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct RunSummary {
  long steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool reached_target = false;
  StageEvents events;
  DiagnosticsRecord last;
  NetworkState final_state;
};

/// Records diagnostics at step 0, every checkpoint_every steps and at the last
/// step. Stops at the first checkpoint whose loss is <= eps_target, or after
/// max_steps. Throws NumericAbort on non-finite parameters.
RunSummary train(const TrainSettings& settings, const RadialDistribution& dist, const TrainSinks& sinks = {});

/// Same, starting from a given state instead of init_network.
RunSummary train_from(const TrainSettings& settings, const RadialDistribution& dist, NetworkState start,
                      const TrainSinks& sinks = {});

}  // namespace mfd3
