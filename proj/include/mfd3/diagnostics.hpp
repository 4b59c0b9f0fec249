// Measured analysis quantities for a network snapshot: loss and its
// decomposition around the infinite-width surrogate, second-layer spread,
// first-layer drift, errors of F / alpha, partition radii and stage events.
#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfd3/input_distribution.hpp"
#include "mfd3/network.hpp"
#include "mfd3/stats.hpp"

namespace mfd3 {

/// 1/2 mean (f* - f)^2 over the rows of `inputs`, with its standard error.
Estimate loss_estimate(const NetworkState& state, const Batch& inputs);

/// L = L1 + L2 + L3 with
///   L1 = 1/2 E (f* - f~)^2,  L2 = 1/2 E (f~ - f)^2,  L3 = E (f* - f~)(f~ - f),
/// all on the same samples.
struct LossDecomposition {
  double loss = 0.0;
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
  double L3_se = 0.0;
  /// |L - (L1 + L2 + L3)|; only rounding survives.
  double recon_gap = 0.0;
  /// (w2_bar^2 / 2) E[1{|x| <= R1} (F~ - F)^2], the fully-activated part of L2.
  double L2_approx = 0.0;
};

/// `r1` bounds the region where every second-layer neuron is active (use
/// partition_radii; +inf means everywhere).
LossDecomposition loss_decomposition(const NetworkState& state, const Batch& inputs, double r1);

/// delta2 = max pairwise |(w2, b2) - (w2', b2')|.
double second_layer_spread(const NetworkState& state);

struct FirstLayerDrift {
  double delta1T = 0.0;  // max_i |v_i/|v_i| - v_i(ref)/|v_i(ref)||
  double delta1R = 0.0;  // max_i ||v_i|^2 - E|w|^2| / E|w|^2
};
/// Throws std::invalid_argument if the layers differ in shape.
FirstLayerDrift first_layer_drift(const NetworkState& state, const NetworkState& reference);

struct FbarErrors {
  double err_L2 = 0.0;
  double err_Linf = 0.0;
  double r_trunc = 0.0;
};

/// err_Linf = max over the rows of `directions` (unit vectors) of |F(u)/alpha - 1|.
/// err_L2 = sqrt(E[(F(x)/alpha - |x|)^2 1{|x| <= R}]) with R = trunc_c / (|w2_bar| alpha),
/// or r_max when w2_bar = 0. Radius and direction are independent under the
/// input law and F is ray-homogeneous, so the expectation factorises into the
/// tabulated truncated second moment times the direction average of
/// (F(u)/alpha - 1)^2.
FbarErrors fbar_errors(const NetworkState& state, const RadialDistribution& dist, const Batch& directions,
                       double trunc_c = 1.0);

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Along direction u, neuron j with w2_j < 0 switches off at
/// r* = -b2_j / (w2_j F(u)). R1, R2 are the min and max of r* over directions
/// and such neurons; both are kUnbounded when every w2_j >= 0.
std::pair<double, double> partition_radii(const NetworkState& state, const Batch& directions);

/// max over the rows of `inputs` of |f(x) - relu(w2_bar F(x) + b2_bar)|.
double mean_neuron_gap(const NetworkState& state, const Batch& inputs);

struct StageThresholds {
  /// T12 when -w2_bar >= c12 * d * delta2.
  double c12 = 1.0;
  /// T1 when -w2_bar >= c1 / R_v2.
  double c1 = 100.0;
  double R_v2 = 1.0;
  /// T2 when loss <= eps.
  double eps = 1e-3;
};

struct StageEvents {
  std::optional<long> T11;
  std::optional<long> T12;
  std::optional<long> T1;
  std::optional<long> T2;
};

/// Latches the four events in order: an event can fire only once the previous
/// one has fired (possibly at the same step), so T11 <= T12 <= T1 <= T2.
class StageTracker {
 public:
  explicit StageTracker(StageThresholds thresholds) : th_(thresholds) {}

  /// `loss` may be NaN when no estimate is available at this step.
  void observe(long step, int d, double w2_max, double w2_bar, double delta2, double loss);

  const StageEvents& events() const { return events_; }
  const StageThresholds& thresholds() const { return th_; }

 private:
  StageThresholds th_;
  StageEvents events_;
};

struct DiagnosticsRecord {
  long step = 0;
  double loss = 0.0;
  double loss_se = 0.0;
  double L1 = 0.0;
  double L2_term = 0.0;
  double L3_term = 0.0;
  double recon_gap = 0.0;
  double alpha = 0.0;
  double w2_bar = 0.0;
  double b2_bar = 0.0;
  double delta2 = 0.0;
  double delta1T = 0.0;
  double delta1R = 0.0;
  double err_L2 = 0.0;
  double err_Linf = 0.0;
  double R1 = kUnbounded;
  double R2 = kUnbounded;
  double clip_v1 = 0.0;
  double clip_v2 = 0.0;
  double clip_r2 = 0.0;
  bool past_T11 = false;
  bool past_T12 = false;
  bool past_T1 = false;
  bool reached_T2 = false;

  // Kept for the stage tracker and acceptance checks; not in metrics.csv.
  int d = 0;
  double w2_max = 0.0;
  double L3_se = 0.0;
  double L2_approx = 0.0;
  double neuron_gap = 0.0;
};

/// Fixed probe data for a run. Reusing the same samples at every checkpoint
/// keeps the diagnostic curves free of resampling noise.
struct DiagnosticsProbe {
  const RadialDistribution* dist = nullptr;
  Batch samples;
  Batch directions;
  double trunc_c = 1.0;
};

/// Everything except the clip rates and stage flags, which belong to the
/// trainer.
DiagnosticsRecord compute_diagnostics(long step, const NetworkState& state, const NetworkState& reference,
                                      const DiagnosticsProbe& probe);

/// Replays stage detection over a record stream in step order.
StageEvents stage_tracker(std::span<const DiagnosticsRecord> records, const StageThresholds& thresholds);

// CSV outputs. Column sets are fixed; downstream plotting depends on them.
extern const std::vector<std::string> kMetricsColumns;
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const DiagnosticsRecord& record);

struct RadialProfile {
  std::vector<double> r;
  std::vector<double> f;        // f(r u) averaged over directions
  std::vector<double> f_tilde;  // f~ at radius r
  std::vector<double> f_star;
};

/// n_radii equally spaced radii on [0, r_hi] with
/// r_hi = min(3 / (|w2_bar| alpha), r_max), or r_max when w2_bar = 0.
RadialProfile radial_profile(const NetworkState& state, const Batch& directions, double r_max, int n_radii = 200);

void write_fshape_csv(std::ostream& out, const RadialProfile& profile);
void write_neurons2_csv(std::ostream& out, const NetworkState& state);

}  // namespace mfd3
