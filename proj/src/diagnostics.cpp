#include "mfd3/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace mfd3 {
namespace {

std::string fmt(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

Vector row_norms(const Batch& inputs) { return inputs.rowwise().norm(); }

}  // namespace

Estimate loss_estimate(const NetworkState& state, const Batch& inputs) {
  if (inputs.rows() == 0) throw std::invalid_argument("loss_estimate: empty batch");
  const Vector F = forward_F_batch(state, inputs);
  const Vector norms = row_norms(inputs);
  std::vector<double> half_sq(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index s = 0; s < inputs.rows(); ++s) {
    const double e = f_star_of_norm(norms[s]) - second_layer_output(state.second, F[s]);
    half_sq[static_cast<std::size_t>(s)] = 0.5 * e * e;
  }
  return mean_estimate(half_sq);
}

LossDecomposition loss_decomposition(const NetworkState& state, const Batch& inputs, double r1) {
  if (inputs.rows() == 0) throw std::invalid_argument("loss_decomposition: empty batch");
  const auto view = infinite_width_view(state);
  const Vector F = forward_F_batch(state, inputs);
  const Vector norms = row_norms(inputs);
  const std::size_t n = static_cast<std::size_t>(inputs.rows());

  std::vector<double> loss(n), l1(n), l2(n), l3(n);
  double l2_active = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const double target = f_star_of_norm(norms[si]);
    const double Ft = tilde_F_of_norm(view, norms[si]);
    const double f = second_layer_output(state.second, F[si]);
    const double ft = second_layer_output(state.second, Ft);
    loss[s] = 0.5 * (target - f) * (target - f);
    l1[s] = 0.5 * (target - ft) * (target - ft);
    l2[s] = 0.5 * (ft - f) * (ft - f);
    l3[s] = (target - ft) * (ft - f);
    if (norms[si] <= r1) l2_active += (Ft - F[si]) * (Ft - F[si]);
  }
  LossDecomposition out;
  out.loss = mean_estimate(loss).mean;
  out.L1 = mean_estimate(l1).mean;
  out.L2 = mean_estimate(l2).mean;
  const Estimate e3 = mean_estimate(l3);
  out.L3 = e3.mean;
  out.L3_se = e3.se;
  out.recon_gap = std::abs(out.loss - (out.L1 + out.L2 + out.L3));
  out.L2_approx = 0.5 * view.w2_bar * view.w2_bar * l2_active / static_cast<double>(n);
  return out;
}

double second_layer_spread(const NetworkState& state) {
  const Vector& w = state.second.w;
  const Vector& b = state.second.b;
  double best = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    for (Eigen::Index k = j + 1; k < w.size(); ++k)
      best = std::max(best, std::hypot(w[j] - w[k], b[j] - b[k]));
  return best;
}

FirstLayerDrift first_layer_drift(const NetworkState& state, const NetworkState& reference) {
  const Matrix& v = state.first.weights;
  const Matrix& v0 = reference.first.weights;
  if (v.rows() != v0.rows() || v.cols() != v0.cols())
    throw std::invalid_argument("first_layer_drift: state and reference have different first layers");
  const Vector sq = v.rowwise().squaredNorm();
  const double mean_sq = sq.mean();
  FirstLayerDrift out;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double n = std::sqrt(sq[i]);
    const double n0 = v0.row(i).norm();
    if (n > 0.0 && n0 > 0.0) out.delta1T = std::max(out.delta1T, (v.row(i) / n - v0.row(i) / n0).norm());
    if (mean_sq > 0.0) out.delta1R = std::max(out.delta1R, std::abs(sq[i] - mean_sq) / mean_sq);
  }
  return out;
}

FbarErrors fbar_errors(const NetworkState& state, const RadialDistribution& dist, const Batch& directions,
                       double trunc_c) {
  if (directions.rows() == 0) throw std::invalid_argument("fbar_errors: no directions");
  const double a = alpha(state);
  if (!(a >= 1e-300)) throw DegenerateStateError("fbar_errors: alpha is zero");
  const Vector Fbar = forward_F_batch(state, directions) / a;

  FbarErrors out;
  double sq = 0.0;
  for (Eigen::Index k = 0; k < Fbar.size(); ++k) {
    const double e = Fbar[k] - 1.0;
    out.err_Linf = std::max(out.err_Linf, std::abs(e));
    sq += e * e;
  }
  const double w2_bar = state.second.w.mean();
  out.r_trunc = w2_bar != 0.0 ? std::min(trunc_c / (std::abs(w2_bar) * a), dist.r_max()) : dist.r_max();
  out.err_L2 = std::sqrt(dist.truncated_moment(out.r_trunc, 2) * sq / static_cast<double>(Fbar.size()));
  return out;
}

std::pair<double, double> partition_radii(const NetworkState& state, const Batch& directions) {
  const Vector F = forward_F_batch(state, directions);
  double r1 = kUnbounded, r2 = -kUnbounded;
  bool any = false;
  for (Eigen::Index j = 0; j < state.second.w.size(); ++j) {
    const double w = state.second.w[j];
    if (!(w < 0.0)) continue;
    any = true;
    const double b = state.second.b[j];
    for (Eigen::Index k = 0; k < F.size(); ++k) {
      // Off for every r when b <= 0; never switches off along a dead direction.
      const double r = b <= 0.0 ? 0.0 : (F[k] > 0.0 ? -b / (w * F[k]) : kUnbounded);
      r1 = std::min(r1, r);
      r2 = std::max(r2, r);
    }
  }
  if (!any) return {kUnbounded, kUnbounded};
  return {r1, r2};
}

double mean_neuron_gap(const NetworkState& state, const Batch& inputs) {
  const Vector F = forward_F_batch(state, inputs);
  const double w_bar = state.second.w.mean();
  const double b_bar = state.second.b.mean();
  double gap = 0.0;
  for (Eigen::Index s = 0; s < F.size(); ++s)
    gap = std::max(gap, std::abs(second_layer_output(state.second, F[s]) - relu(w_bar * F[s] + b_bar)));
  return gap;
}

void StageTracker::observe(long step, int d, double w2_max, double w2_bar, double delta2, double loss) {
  if (!events_.T11 && w2_max < 0.0) events_.T11 = step;
  if (events_.T11 && !events_.T12 && -w2_bar >= th_.c12 * d * delta2) events_.T12 = step;
  if (events_.T12 && !events_.T1 && -w2_bar >= th_.c1 / th_.R_v2) events_.T1 = step;
  if (events_.T1 && !events_.T2 && !std::isnan(loss) && loss <= th_.eps) events_.T2 = step;
}

DiagnosticsRecord compute_diagnostics(long step, const NetworkState& state, const NetworkState& reference,
                                      const DiagnosticsProbe& probe) {
  if (probe.dist == nullptr) throw std::invalid_argument("compute_diagnostics: probe has no distribution");
  DiagnosticsRecord rec;
  rec.step = step;
  rec.d = state.d;
  const auto view = infinite_width_view(state);
  rec.alpha = view.alpha;
  rec.w2_bar = view.w2_bar;
  rec.b2_bar = view.b2_bar;
  rec.w2_max = state.second.w.maxCoeff();
  rec.delta2 = second_layer_spread(state);
  const auto drift = first_layer_drift(state, reference);
  rec.delta1T = drift.delta1T;
  rec.delta1R = drift.delta1R;

  const auto [r1, r2] = partition_radii(state, probe.directions);
  rec.R1 = r1;
  rec.R2 = r2;

  const Estimate loss = loss_estimate(state, probe.samples);
  rec.loss = loss.mean;
  rec.loss_se = loss.se;
  const auto dec = loss_decomposition(state, probe.samples, r1);
  rec.L1 = dec.L1;
  rec.L2_term = dec.L2;
  rec.L3_term = dec.L3;
  rec.L3_se = dec.L3_se;
  rec.recon_gap = dec.recon_gap;
  rec.L2_approx = dec.L2_approx;

  const auto err = fbar_errors(state, *probe.dist, probe.directions, probe.trunc_c);
  rec.err_L2 = err.err_L2;
  rec.err_Linf = err.err_Linf;
  rec.neuron_gap = mean_neuron_gap(state, probe.samples);
  return rec;
}

StageEvents stage_tracker(std::span<const DiagnosticsRecord> records, const StageThresholds& thresholds) {
  StageTracker tracker(thresholds);
  for (const auto& r : records) tracker.observe(r.step, r.d, r.w2_max, r.w2_bar, r.delta2, r.loss);
  return tracker.events();
}

const std::vector<std::string> kMetricsColumns = {
    "step",    "loss",    "loss_se", "L1",      "L2_term", "L3_term",  "recon_gap", "alpha",
    "w2_bar",  "b2_bar",  "delta2",  "delta1T", "delta1R", "err_L2",   "err_Linf",  "R1",
    "R2",      "clip_v1", "clip_v2", "clip_r2", "past_T11", "past_T12", "past_T1",  "reached_T2"};

void write_metrics_header(std::ostream& out) {
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) out << (i ? "," : "") << kMetricsColumns[i];
  out << '\n';
}

void write_metrics_row(std::ostream& out, const DiagnosticsRecord& r) {
  out << r.step;
  for (double v : {r.loss, r.loss_se, r.L1, r.L2_term, r.L3_term, r.recon_gap, r.alpha, r.w2_bar, r.b2_bar,
                   r.delta2, r.delta1T, r.delta1R, r.err_L2, r.err_Linf, r.R1, r.R2, r.clip_v1, r.clip_v2,
                   r.clip_r2})
    out << ',' << fmt(v);
  for (bool flag : {r.past_T11, r.past_T12, r.past_T1, r.reached_T2}) out << ',' << (flag ? 1 : 0);
  out << '\n';
}

RadialProfile radial_profile(const NetworkState& state, const Batch& directions, double r_max, int n_radii) {
  if (n_radii < 2) throw std::invalid_argument("radial_profile: need at least 2 radii");
  if (directions.rows() == 0) throw std::invalid_argument("radial_profile: no directions");
  const auto view = infinite_width_view(state);
  const double scale = std::abs(view.w2_bar) * view.alpha;
  const double r_hi = scale > 0.0 ? std::min(3.0 / scale, r_max) : r_max;
  // F is ray-homogeneous: F(r u) = r F(u).
  const Vector F_dirs = forward_F_batch(state, directions);

  RadialProfile p;
  for (int k = 0; k < n_radii; ++k) {
    const double r = r_hi * k / (n_radii - 1);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < F_dirs.size(); ++i) sum += second_layer_output(state.second, r * F_dirs[i]);
    p.r.push_back(r);
    p.f.push_back(sum / static_cast<double>(F_dirs.size()));
    p.f_tilde.push_back(second_layer_output(state.second, tilde_F_of_norm(view, r)));
    p.f_star.push_back(f_star_of_norm(r));
  }
  return p;
}

void write_fshape_csv(std::ostream& out, const RadialProfile& p) {
  out << "r,f,f_tilde,f_star\n";
  for (std::size_t k = 0; k < p.r.size(); ++k)
    out << fmt(p.r[k]) << ',' << fmt(p.f[k]) << ',' << fmt(p.f_tilde[k]) << ',' << fmt(p.f_star[k]) << '\n';
}

void write_neurons2_csv(std::ostream& out, const NetworkState& state) {
  out << "w2,b2\n";
  for (Eigen::Index j = 0; j < state.second.w.size(); ++j)
    out << fmt(state.second.w[j]) << ',' << fmt(state.second.b[j]) << '\n';
}

}  // namespace mfd3
