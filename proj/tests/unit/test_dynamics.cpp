#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "mfd3/dynamics.hpp"
#include "mfd3/special_functions.hpp"
#include "mfd3/state_io.hpp"
#include "oracles.hpp"

using namespace mfd3;

namespace {

const RadialDistribution& dist10() {
  static const RadialDistribution d = build_radial_distribution(DistributionParams{10, 1.0, 1.0});
  return d;
}

// Mid-training-like state: negative second layer with spread, so every term
// of the gradient is active somewhere on the batch.
NetworkState spread_state(int d, int m1, int m2, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> n01;
  Matrix W(m1, d);
  for (int i = 0; i < m1; ++i)
    for (int k = 0; k < d; ++k) W(i, k) = n01(rng) * 2.0 / std::sqrt(double(d));
  Vector w(m2), b(m2);
  for (int j = 0; j < m2; ++j) {
    w(j) = -0.6 + 0.3 * n01(rng);
    b(j) = 0.6 + 0.1 * n01(rng);
  }
  return make_state(W, w, b);
}

TrainSettings small_settings(std::uint64_t seed) {
  TrainSettings s;
  s.hp = HyperParams::defaults(10);
  s.hp.m1 = 32;
  s.hp.m2 = 4;
  s.hp.batch = 512;
  s.hp.eta = 0.05;
  s.hp.max_steps = 60;
  s.hp.checkpoint_every = 20;
  s.dist_params = DistributionParams{10, 1.0, 1.0};
  s.seed = seed;
  s.streams = 4;
  s.diag_samples = 2048;
  s.direction_samples = 128;
  s.radii_samples = 20;
  s.fshape_directions = 8;
  return s;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("hyperparameter defaults, radii and validation") {
  const auto hp = HyperParams::defaults(16);
  CHECK(hp.sigma1 == doctest::Approx(0.25));
  CHECK(hp.eta == doctest::Approx(1e-3 / 16));
  const auto r = hp.clip_radii();
  CHECK(r.v1 == doctest::Approx(160.0));
  CHECK(r.v2 == doctest::Approx(10.0 * 4096.0));
  CHECK(r.r2 == doctest::Approx(10.0));
  CHECK(std::isinf(ClipRadii::none().v1));

  auto bad = hp;
  bad.eta = -1.0;
  try {
    bad.validate();
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("eta") != std::string::npos);
  }
  bad = hp;
  bad.m2 = 0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("m2"), std::invalid_argument);
}

TEST_CASE("init_network") {
  auto hp = HyperParams::defaults(20);
  hp.m1 = 300;
  hp.m2 = 10000;
  hp.sigma2 = 0.2;
  Rng rng = make_stream(1, 0);
  const auto s = init_network(hp, rng);
  CHECK((s.first.norms().array() - hp.sigma1).abs().maxCoeff() <= 1e-12);
  const double mean = s.second.w.mean();
  const double sd = std::sqrt((s.second.w.array() - mean).square().sum() / (hp.m2 - 1));
  CHECK(std::abs(sd / hp.sigma2 - 1.0) <= 0.05);
  CHECK((s.second.b.array() == hp.sigma_r).all());
  CHECK(alpha(s) == doctest::Approx(c_gamma(20) * hp.sigma1 * hp.sigma1 / std::sqrt(20.0)).epsilon(1e-12));
}

TEST_CASE("score_S examples") {
  // d = 1, F(x) = s^2 x = 0.5 at a tiny x, so f* ~ 1.
  const double x0 = 1e-6;
  Matrix W(1, 1);
  W << std::sqrt(0.5 / x0);
  Vector w(1), b(1);
  w << -1.0;
  b << 1.0;
  const auto s = make_state(W, w, b);
  Vector x(1);
  x << x0;
  CHECK(score_S(s, x) == doctest::Approx(-(1.0 - x0 - 0.5)).epsilon(1e-12));

  // Inactive second layer.
  Vector bneg(1);
  bneg << -1.0;
  CHECK(score_S(make_state(W, w, bneg), x) == 0.0);

  // Perfect fit at x = 0: f = relu(b) = 1 = f*(0).
  CHECK(score_S(s, Vector::Zero(1)) == 0.0);
}

TEST_CASE("per_sample_grads: one-neuron hand computation") {
  Matrix W(1, 2);
  W << 1.0, 1.0;
  Vector w(1), b(1);
  w << -0.5;
  b << 1.0;
  const auto s = make_state(W, w, b);
  Vector x(2);
  x << 0.3, 0.1;
  const double nv = std::sqrt(2.0), z = 0.4, F = nv * z;
  const double pre = -0.5 * F + 1.0, f = pre;
  const double e = (1.0 - std::sqrt(0.1)) - f;
  const double S = e * -0.5;
  const auto g = per_sample_grads(s, x, ClipRadii::none());
  CHECK(g.dv1(0, 0) == doctest::Approx(S * (1.0 / nv * z + nv * 0.3)).epsilon(1e-14));
  CHECK(g.dv1(0, 1) == doctest::Approx(S * (1.0 / nv * z + nv * 0.1)).epsilon(1e-14));
  CHECK(g.dv2(0) == doctest::Approx(e * F).epsilon(1e-14));
  CHECK(g.dr2(0) == doctest::Approx(e).epsilon(1e-14));
  CHECK(g.clip_rate_v1 == 0.0);
  CHECK(g.mean_sq_norm() == doctest::Approx(g.dv1.squaredNorm() + e * F * e * F + e * e));
}

TEST_CASE("per_sample_grads: inactive neuron and projection") {
  const auto s = spread_state(6, 5, 3, 2);
  Vector x = Vector::LinSpaced(6, -0.3, 0.4);
  Matrix W = s.first.weights;
  W.row(0) = -x.transpose();  // v . x < 0
  const auto t = make_state(W, s.second.w, s.second.b);
  const auto g = per_sample_grads(t, x, ClipRadii::none());
  CHECK(g.dv1.row(0).norm() == 0.0);

  const auto free = per_sample_grads(s, x, ClipRadii::none());
  int i = 0;
  while (i < 5 && free.dv1.row(i).norm() == 0.0) ++i;
  REQUIRE(i < 5);
  const double n = free.dv1.row(i).norm();
  REQUIRE(n > 0.0);
  ClipRadii radii = ClipRadii::none();
  radii.v1 = n / 2.0;
  const auto clipped = per_sample_grads(s, x, radii);
  CHECK(clipped.dv1.row(i).norm() == doctest::Approx(n / 2.0).epsilon(1e-14));
  CHECK((clipped.dv1.row(i) / clipped.dv1.row(i).norm() - free.dv1.row(i) / n).norm() < 1e-14);
  CHECK(clipped.clip_rate_v1 > 0.0);
  CHECK(projection_scale(2.0, 1.0) == 0.5);
  CHECK(projection_scale(0.5, 1.0) == 1.0);
}

TEST_CASE("batch_gradient equals the mean of per-sample integrands") {
  const auto s = spread_state(10, 24, 5, 3);
  Rng rng = make_stream(4, 0);
  const Batch X = sample_inputs(dist10(), rng, 700);
  for (const ClipRadii radii : {ClipRadii::none(), ClipRadii{0.05, 0.02, 0.05}}) {
    const auto g = batch_gradient(s, X, radii, 1);
    NeuronGrad ref;
    ref.dv1 = Matrix::Zero(24, 10);
    ref.dv2 = Vector::Zero(5);
    ref.dr2 = Vector::Zero(5);
    double c1 = 0, c2 = 0, c3 = 0;
    for (int n = 0; n < X.rows(); ++n) {
      const auto p = per_sample_grads(s, X.row(n).transpose(), radii);
      ref.dv1 += p.dv1;
      ref.dv2 += p.dv2;
      ref.dr2 += p.dr2;
      c1 += p.clip_rate_v1;
      c2 += p.clip_rate_v2;
      c3 += p.clip_rate_r2;
    }
    const double B = double(X.rows());
    CHECK((g.dv1 - ref.dv1 / B).norm() <= 1e-12 * (ref.dv1 / B).norm());
    CHECK((g.dv2 - ref.dv2 / B).norm() <= 1e-12 * (ref.dv2 / B).norm());
    CHECK((g.dr2 - ref.dr2 / B).norm() <= 1e-12 * (ref.dr2 / B).norm());
    CHECK(g.clip_rate_v1 == doctest::Approx(c1 / B));
    CHECK(g.clip_rate_v2 == doctest::Approx(c2 / B));
    CHECK(g.clip_rate_r2 == doctest::Approx(c3 / B));
  }
}

TEST_CASE("batch_gradient is independent of the worker count") {
  const auto s = spread_state(10, 40, 6, 5);
  Rng rng = make_stream(6, 0);
  const Batch X = sample_inputs(dist10(), rng, 2000);
  const auto a = batch_gradient(s, X, ClipRadii{0.1, 1.0, 1.0}, 1);
  const auto b = batch_gradient(s, X, ClipRadii{0.1, 1.0, 1.0}, 3);
  CHECK(a.dv1 == b.dv1);
  CHECK(a.dv2 == b.dv2);
  CHECK(a.dr2 == b.dr2);
  CHECK(a.clip_rate_v1 == b.clip_rate_v1);
}

TEST_CASE("gradient against central finite differences, small instance") {
  const auto s = spread_state(4, 6, 3, 7);
  Rng rng = make_stream(8, 0);
  const Batch X = sample_inputs(build_radial_distribution(DistributionParams{4, 1.0, 1.0}), rng, 48);
  const auto g = batch_gradient(s, X, ClipRadii::none(), 1);
  const auto fd = oracle::finite_difference_gradient(s, X, 1e-6);
  int compared = 0;
  for (int i = 0; i < 6; ++i) {
    if (fd.kink1[i]) continue;
    ++compared;
    CHECK((g.dv1.row(i) - fd.dv1.row(i)).norm() <= 1e-4 * fd.dv1.row(i).norm() + 1e-12);
  }
  for (int j = 0; j < 3; ++j) {
    if (fd.kink2[j]) continue;
    CHECK(std::abs(g.dv2(j) - fd.dv2(j)) <= 1e-4 * std::abs(fd.dv2(j)) + 1e-12);
    CHECK(std::abs(g.dr2(j) - fd.dr2(j)) <= 1e-4 * std::abs(fd.dr2(j)) + 1e-12);
  }
  CHECK(compared >= 4);
}

TEST_CASE("batch_update: eta = 0, zero residual, descent") {
  const auto s = spread_state(10, 16, 4, 9);
  Rng rng = make_stream(10, 0);
  const Batch X = sample_inputs(dist10(), rng, 1024);
  const auto same = batch_update(s, X, 0.0, ClipRadii::none());
  CHECK(same.state.first.weights == s.first.weights);
  CHECK(same.state.second.w == s.second.w);
  CHECK_THROWS_AS(batch_update(s, X, -1.0, ClipRadii::none()), std::invalid_argument);

  // f = relu(b2) = 1 = f*(0) on a batch of zeros.
  Vector ones = Vector::Ones(4);
  const auto fit = make_state(s.first.weights, s.second.w, ones);
  const auto still = batch_update(fit, Batch::Zero(8, 10), 0.5, ClipRadii::none());
  CHECK(still.state.first.weights == fit.first.weights);
  CHECK(still.state.second.w == fit.second.w);
  CHECK(still.state.second.b == fit.second.b);

  // Small steps on a fixed batch never increase the batch loss.
  NetworkState cur = s;
  double prev = loss_estimate(cur, X).mean;
  for (int t = 0; t < 100; ++t) {
    cur = batch_update(cur, X, 1e-3, ClipRadii::none()).state;
    const double now = loss_estimate(cur, X).mean;
    CHECK(now <= prev);
    prev = now;
  }
}

TEST_CASE("first-order descent identity") {
  const auto s = spread_state(10, 32, 4, 11);
  Rng rng = make_stream(12, 0);
  const Batch X = sample_inputs(dist10(), rng, 4096);
  const double eta = 1e-5;
  const auto up = batch_update(s, X, eta, ClipRadii::none());
  const double drop = loss_estimate(up.state, X).mean - loss_estimate(s, X).mean;
  CHECK(drop / (-eta * up.grad.mean_sq_norm()) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("train: replay, worker independence and checkpoints") {
  auto settings = small_settings(21);
  std::vector<long> steps;
  std::vector<double> losses;
  TrainSinks sinks;
  sinks.on_checkpoint = [&](const Checkpoint& cp) {
    steps.push_back(cp.record.step);
    losses.push_back(cp.record.loss);
    CHECK(cp.profile.r.size() == 20);
  };
  settings.max_workers = 1;
  const auto a = train(settings, dist10(), sinks);
  CHECK(steps == std::vector<long>{0, 20, 40, 60});
  settings.max_workers = 3;
  const auto b = train(settings, dist10());
  CHECK(a.final_state.first.weights == b.final_state.first.weights);
  CHECK(a.final_state.second.w == b.final_state.second.w);
  CHECK(a.final_state.second.b == b.final_state.second.b);
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.steps == 60);
  CHECK(a.initial_loss == losses.front());

  auto other = small_settings(22);
  const auto c = train(other, dist10());
  CHECK(c.final_state.first.weights != a.final_state.first.weights);
}

TEST_CASE("train stops at the loss target") {
  auto settings = small_settings(3);
  settings.hp.eps_target = 1.0;
  const auto r = train(settings, dist10());
  CHECK(r.steps == 0);
  CHECK(r.reached_target);
}

TEST_CASE("single second-layer neuron still learns") {
  auto settings = small_settings(5);
  settings.hp.m2 = 1;
  settings.hp.max_steps = 300;
  settings.hp.checkpoint_every = 100;
  const auto r = train(settings, dist10());
  CHECK(r.final_loss < r.initial_loss);
}

TEST_CASE("numeric abort keeps the last finite state") {
  auto settings = small_settings(1);
  settings.hp.eta = 1e308;
  settings.hp.c_v1 = settings.hp.c_v2 = settings.hp.c_r2 = std::numeric_limits<double>::infinity();
  const auto dump = std::filesystem::path(MFD3_TEST_TMP) / "abort.state";
  std::filesystem::create_directories(dump.parent_path());
  std::filesystem::remove(dump);
  settings.abort_dump_path = dump.string();
  CHECK_THROWS_AS(train(settings, dist10()), NumericAbort);
  const auto last = load_state(dump.string());
  CHECK(last.all_finite());
}

}  // TEST_SUITE
