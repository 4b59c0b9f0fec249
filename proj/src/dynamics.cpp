#include "mfd3/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mfd3/state_io.hpp"

namespace mfd3 {
namespace {

constexpr Eigen::Index kChunkRows = 256;

bool positive_or_inf(double v) { return v > 0.0; }

struct Partial {
  Matrix G;    // sum_s c_si x_s, scaled by |v_i| at the end
  Vector rad;  // sum_s c_si (v_i . x_s)
  Vector gv2;
  Vector gr2;
  long clips_v1 = 0;
  long clips_v2 = 0;
  long clips_r2 = 0;
};

void accumulate_chunk(const NetworkState& state, const Vector& norms, const Batch& inputs, Eigen::Index begin,
                      Eigen::Index rows, const ClipRadii& radii, Partial& p) {
  const Matrix& V = state.first.weights;
  const Eigen::Index m1 = V.rows();
  const Eigen::Index m2 = state.second.w.size();
  const auto X = inputs.middleRows(begin, rows);
  const Matrix Z = X * V.transpose();
  const Vector F = Z.cwiseMax(0.0) * norms / static_cast<double>(m1);
  Matrix C = Matrix::Zero(rows, m1);

  p.G = Matrix::Zero(m1, V.cols());
  p.rad = Vector::Zero(m1);
  p.gv2 = Vector::Zero(m2);
  p.gr2 = Vector::Zero(m2);

  const Vector& w2 = state.second.w;
  const Vector& b2 = state.second.b;
  for (Eigen::Index s = 0; s < rows; ++s) {
    const double x_sq = X.row(s).squaredNorm();
    const double Fs = F[s];
    double f = 0.0, active_w = 0.0;
    for (Eigen::Index j = 0; j < m2; ++j) {
      const double pre = w2[j] * Fs + b2[j];
      if (pre > 0.0) {
        f += pre;
        active_w += w2[j];
      }
    }
    f /= static_cast<double>(m2);
    const double e = f_star_of_norm(std::sqrt(x_sq)) - f;
    const double S = e * active_w / static_cast<double>(m2);

    if (e != 0.0) {
      const double gv = e * Fs;
      const double sv = projection_scale(std::abs(gv), radii.v2);
      const double sr = projection_scale(std::abs(e), radii.r2);
      for (Eigen::Index j = 0; j < m2; ++j) {
        if (!(w2[j] * Fs + b2[j] > 0.0)) continue;
        p.gv2[j] += gv * sv;
        p.gr2[j] += e * sr;
        p.clips_v2 += sv < 1.0;
        p.clips_r2 += sr < 1.0;
      }
    }
    if (S == 0.0) continue;
    for (Eigen::Index i = 0; i < m1; ++i) {
      const double z = Z(s, i);
      if (!(z > 0.0)) continue;
      // |v/|v| z + |v| x|^2 = 3 z^2 + |v|^2 |x|^2 since |v| (v/|v| . x) = z.
      const double mag = std::abs(S) * std::sqrt(3.0 * z * z + norms[i] * norms[i] * x_sq);
      const double scale = projection_scale(mag, radii.v1);
      const double c = S * scale;
      C(s, i) = c;
      p.rad[i] += c * z;
      p.clips_v1 += scale < 1.0;
    }
  }
  p.G.noalias() = C.transpose() * X;
}

}  // namespace

HyperParams HyperParams::defaults(int d) {
  HyperParams hp;
  hp.d = d;
  hp.sigma1 = d >= 1 ? 1.0 / std::sqrt(static_cast<double>(d)) : hp.sigma1;
  hp.eta = d >= 1 ? 1e-3 / d : hp.eta;
  return hp;
}

ClipRadii HyperParams::clip_radii() const {
  const double dd = d;
  return {c_v1 * dd, c_v2 * dd * dd * dd, c_r2};
}

void HyperParams::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("HyperParams: " + field + " " + why);
  };
  if (d < 1) fail("d", "must be >= 1");
  if (m1 < 1) fail("m1", "must be >= 1");
  if (m2 < 1) fail("m2", "must be >= 1");
  if (!(sigma1 > 0.0 && std::isfinite(sigma1))) fail("sigma1", "must be positive and finite");
  if (!(sigma2 > 0.0 && std::isfinite(sigma2))) fail("sigma2", "must be positive and finite");
  if (!(sigma_r > 0.0 && std::isfinite(sigma_r))) fail("sigma_r", "must be positive and finite");
  if (!positive_or_inf(c_v1)) fail("c_v1", "must be positive (inf disables clipping)");
  if (!positive_or_inf(c_v2)) fail("c_v2", "must be positive (inf disables clipping)");
  if (!positive_or_inf(c_r2)) fail("c_r2", "must be positive (inf disables clipping)");
  if (!(eta > 0.0 && std::isfinite(eta))) fail("eta", "must be positive and finite");
  if (batch < 1) fail("batch", "must be >= 1");
  if (max_steps < 0) fail("max_steps", "must be >= 0");
  if (!(eps_target >= 0.0)) fail("eps_target", "must be >= 0");
  if (checkpoint_every < 1) fail("checkpoint_every", "must be >= 1");
}

NetworkState init_network(const HyperParams& hp, Rng& rng) {
  hp.validate();
  Matrix first(hp.m1, hp.d);
  for (int i = 0; i < hp.m1; ++i) {
    sample_direction(hp.d, rng, std::span<double>(first.row(i).data(), static_cast<std::size_t>(hp.d)));
    first.row(i) *= hp.sigma1;
  }
  std::normal_distribution<double> normal(0.0, hp.sigma2);
  Vector w2(hp.m2);
  for (int j = 0; j < hp.m2; ++j) w2[j] = normal(rng);
  Vector b2 = Vector::Constant(hp.m2, hp.sigma_r);
  return make_state(std::move(first), std::move(w2), std::move(b2));
}

double score_S(const NetworkState& state, const Eigen::Ref<const Vector>& x) {
  const double F = forward_F(state, x);
  double active_w = 0.0;
  for (int j = 0; j < state.second.width(); ++j)
    if (state.second.w[j] * F + state.second.b[j] > 0.0) active_w += state.second.w[j];
  const double e = f_star(x) - second_layer_output(state.second, F);
  return e * active_w / state.second.width();
}

double NeuronGrad::mean_sq_norm() const {
  return dv1.rowwise().squaredNorm().mean() + (dv2.array().square() + dr2.array().square()).mean();
}

NeuronGrad per_sample_grads(const NetworkState& state, const Eigen::Ref<const Vector>& x,
                            const ClipRadii& radii) {
  const int m1 = state.first.width();
  const int m2 = state.second.width();
  const double F = forward_F(state, x);
  const double e = f_star(x) - second_layer_output(state.second, F);
  const double S = score_S(state, x);

  NeuronGrad g;
  g.dv1 = Matrix::Zero(m1, state.d);
  g.dv2 = Vector::Zero(m2);
  g.dr2 = Vector::Zero(m2);
  for (int i = 0; i < m1; ++i) {
    const Vector v = state.first.weights.row(i).transpose();
    const double n = v.norm();
    const double z = v.dot(x);
    if (n == 0.0) continue;
    const Vector integrand = S * (v / n * relu(z) + n * relu_prime(z) * x);
    const double scale = projection_scale(integrand.norm(), radii.v1);
    g.dv1.row(i) = (scale * integrand).transpose();
    g.clip_rate_v1 += scale < 1.0;
  }
  for (int j = 0; j < m2; ++j) {
    const double act = relu_prime(state.second.w[j] * F + state.second.b[j]);
    const double gv = e * act * F;
    const double gr = e * act;
    const double sv = projection_scale(std::abs(gv), radii.v2);
    const double sr = projection_scale(std::abs(gr), radii.r2);
    g.dv2[j] = gv * sv;
    g.dr2[j] = gr * sr;
    g.clip_rate_v2 += sv < 1.0;
    g.clip_rate_r2 += sr < 1.0;
  }
  g.clip_rate_v1 /= m1;
  g.clip_rate_v2 /= m2;
  g.clip_rate_r2 /= m2;
  return g;
}

NeuronGrad batch_gradient(const NetworkState& state, const Batch& inputs, const ClipRadii& radii,
                          int max_workers) {
  if (inputs.rows() < 1) throw std::invalid_argument("batch_gradient: empty batch");
  if (inputs.cols() != state.d) throw std::invalid_argument("batch_gradient: input dimension mismatch");
  const Eigen::Index n = inputs.rows();
  const int n_chunks = static_cast<int>((n + kChunkRows - 1) / kChunkRows);
  const Vector norms = state.first.norms();

  std::vector<Partial> parts(static_cast<std::size_t>(n_chunks));
  parallel_for(
      n_chunks,
      [&](int c) {
        const Eigen::Index begin = c * kChunkRows;
        const Eigen::Index rows = std::min(kChunkRows, n - begin);
        accumulate_chunk(state, norms, inputs, begin, rows, radii, parts[static_cast<std::size_t>(c)]);
      },
      max_workers);

  Partial total = std::move(parts.front());
  for (std::size_t c = 1; c < parts.size(); ++c) {
    total.G += parts[c].G;
    total.rad += parts[c].rad;
    total.gv2 += parts[c].gv2;
    total.gr2 += parts[c].gr2;
    total.clips_v1 += parts[c].clips_v1;
    total.clips_v2 += parts[c].clips_v2;
    total.clips_r2 += parts[c].clips_r2;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix& V = state.first.weights;
  NeuronGrad g;
  g.dv1 = Matrix::Zero(V.rows(), V.cols());
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    if (norms[i] == 0.0) continue;
    g.dv1.row(i) = (total.rad[i] / norms[i]) * V.row(i) + norms[i] * total.G.row(i);
  }
  g.dv1 *= inv_n;
  g.dv2 = total.gv2 * inv_n;
  g.dr2 = total.gr2 * inv_n;
  g.clip_rate_v1 = static_cast<double>(total.clips_v1) * inv_n / static_cast<double>(V.rows());
  g.clip_rate_v2 = static_cast<double>(total.clips_v2) * inv_n / static_cast<double>(state.second.width());
  g.clip_rate_r2 = static_cast<double>(total.clips_r2) * inv_n / static_cast<double>(state.second.width());
  return g;
}

void apply_update(NetworkState& state, const NeuronGrad& grad, double eta) {
  state.first.weights += eta * grad.dv1;
  state.second.w += eta * grad.dv2;
  state.second.b += eta * grad.dr2;
}

BatchUpdate batch_update(const NetworkState& state, const Batch& inputs, double eta, const ClipRadii& radii,
                         int max_workers) {
  if (!(eta >= 0.0)) throw std::invalid_argument("batch_update: eta must be >= 0");
  BatchUpdate out{state, batch_gradient(state, inputs, radii, max_workers)};
  apply_update(out.state, out.grad, eta);
  return out;
}

RunSummary train(const TrainSettings& settings, const RadialDistribution& dist, const TrainSinks& sinks) {
  settings.hp.validate();
  Rng rng = make_stream(settings.seed, kStreamInit);
  return train_from(settings, dist, init_network(settings.hp, rng), sinks);
}

RunSummary train_from(const TrainSettings& settings, const RadialDistribution& dist, NetworkState state,
                      const TrainSinks& sinks) {
  const HyperParams& hp = settings.hp;
  hp.validate();
  state.validate();
  if (state.d != hp.d || dist.params().d != hp.d)
    throw std::invalid_argument("train: dimension of state, distribution and hyperparameters must agree");
  if (settings.streams < 1) throw std::invalid_argument("train: streams must be >= 1");

  const ClipRadii radii = hp.clip_radii();
  DiagnosticsProbe probe;
  probe.dist = &dist;
  probe.trunc_c = settings.trunc_c;
  {
    Rng r = make_stream(settings.seed, kStreamDiagSamples);
    probe.samples = sample_inputs(dist, r, settings.diag_samples);
    Rng q = make_stream(settings.seed, kStreamDiagDirections);
    probe.directions = sample_directions(hp.d, q, settings.direction_samples);
  }
  Rng profile_rng = make_stream(settings.seed, kStreamProfileDirections);
  const Batch profile_dirs = sample_directions(hp.d, profile_rng, settings.fshape_directions);

  std::vector<Rng> streams;
  for (int k = 0; k < settings.streams; ++k)
    streams.push_back(make_stream(settings.seed, kStreamTrainBase + static_cast<std::uint64_t>(k)));

  StageThresholds th;
  th.c12 = settings.stage_c12;
  th.c1 = settings.stage_c1;
  th.R_v2 = radii.v2;
  th.eps = hp.eps_target;
  StageTracker tracker(th);
  NetworkState reference = state;

  auto watched = [&](const StageEvents& ev) -> std::optional<long> {
    switch (settings.rereference) {
      case RereferenceAt::T11: return ev.T11;
      case RereferenceAt::T12: return ev.T12;
      case RereferenceAt::T1: return ev.T1;
      case RereferenceAt::never: break;
    }
    return std::nullopt;
  };
  auto maybe_rereference = [&](const StageEvents& before) {
    if (!watched(before) && watched(tracker.events())) reference = state;
  };

  RunSummary summary;
  NeuronGrad last_grad;
  auto checkpoint = [&](long step) {
    DiagnosticsRecord rec = compute_diagnostics(step, state, reference, probe);
    const StageEvents before = tracker.events();
    tracker.observe(step, hp.d, rec.w2_max, rec.w2_bar, rec.delta2, rec.loss);
    maybe_rereference(before);
    rec.clip_v1 = last_grad.clip_rate_v1;
    rec.clip_v2 = last_grad.clip_rate_v2;
    rec.clip_r2 = last_grad.clip_rate_r2;
    const auto& ev = tracker.events();
    rec.past_T11 = ev.T11.has_value();
    rec.past_T12 = ev.T12.has_value();
    rec.past_T1 = ev.T1.has_value();
    rec.reached_T2 = ev.T2.has_value();
    if (sinks.on_checkpoint) {
      const RadialProfile profile = radial_profile(state, profile_dirs, dist.r_max(), settings.radii_samples);
      sinks.on_checkpoint(Checkpoint{rec, state, profile});
    }
    summary.last = rec;
    return rec;
  };

  const DiagnosticsRecord first = checkpoint(0);
  summary.initial_loss = first.loss;
  summary.reached_target = first.loss <= hp.eps_target;

  Batch batch(hp.batch, hp.d);
  const int n_blocks = settings.streams;
  long step = 0;
  while (!summary.reached_target && step < hp.max_steps) {
    parallel_for(
        n_blocks,
        [&](int k) {
          const Eigen::Index lo = static_cast<Eigen::Index>(hp.batch) * k / n_blocks;
          const Eigen::Index hi = static_cast<Eigen::Index>(hp.batch) * (k + 1) / n_blocks;
          auto& rng = streams[static_cast<std::size_t>(k)];
          for (Eigen::Index s = lo; s < hi; ++s) {
            const double r = sample_radius(dist, rng);
            sample_direction(hp.d, rng, std::span<double>(batch.row(s).data(), static_cast<std::size_t>(hp.d)));
            batch.row(s) *= r;
          }
        },
        settings.max_workers);

    last_grad = batch_gradient(state, batch, radii, settings.max_workers);
    NetworkState next = state;
    apply_update(next, last_grad, hp.eta);
    ++step;
    if (!next.all_finite()) {
      if (!settings.abort_dump_path.empty())
        save_state(settings.abort_dump_path, state,
                   {"last finite state before numeric abort at step " + std::to_string(step)});
      throw NumericAbort("train: non-finite parameters at step " + std::to_string(step));
    }
    state = std::move(next);

    const StageEvents before = tracker.events();
    tracker.observe(step, hp.d, state.second.w.maxCoeff(), state.second.w.mean(), second_layer_spread(state),
                    std::nan(""));
    maybe_rereference(before);

    if (step % hp.checkpoint_every == 0 || step == hp.max_steps) {
      const DiagnosticsRecord rec = checkpoint(step);
      summary.reached_target = rec.loss <= hp.eps_target;
    }
  }
  if (summary.last.step != step) checkpoint(step);

  summary.steps = step;
  summary.final_loss = summary.last.loss;
  summary.events = tracker.events();
  summary.final_state = std::move(state);
  return summary;
}

}  // namespace mfd3
