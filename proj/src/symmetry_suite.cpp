#include "mfd3/symmetry_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>

#include "mfd3/special_functions.hpp"

namespace mfd3 {
namespace {

constexpr int kChunks = 64;

double z_of(double estimate, double closed_form, double se) {
  const double diff = estimate - closed_form;
  if (se > 0.0) return diff / se;
  if (diff == 0.0) return 0.0;
  return std::copysign(std::numeric_limits<double>::infinity(), diff);
}

// Paired accumulators per chunk: lhs, rhs and lhs - rhs.
struct Paired {
  RunningStats lhs, rhs, diff;

  void add(double l, double r) {
    lhs.add(l);
    rhs.add(r);
    diff.add(l - r);
  }
  void merge(const Paired& o) {
    lhs.merge(o.lhs);
    rhs.merge(o.rhs);
    diff.merge(o.diff);
  }
};

IdentityReport paired_report(std::string name, const Paired& p) {
  IdentityReport r;
  r.name = std::move(name);
  r.mc_estimate = p.lhs.mean();
  r.closed_form = p.rhs.mean();
  r.mc_stderr = p.diff.estimate().se;
  r.z_score = z_of(p.diff.mean(), 0.0, r.mc_stderr);
  return r;
}

// Runs body(chunk, rng, begin, end) over kChunks fixed slices of [0, n);
// chunk k draws from stream seed + k.
template <class Acc, class Body>
Acc chunked(std::size_t n, const CheckOptions& opt, Body&& body) {
  std::vector<Acc> parts(kChunks);
  parallel_for(
      kChunks,
      [&](int k) {
        Rng rng = make_stream(opt.seed, static_cast<std::uint64_t>(k));
        const std::size_t lo = n * static_cast<std::size_t>(k) / kChunks;
        const std::size_t hi = n * static_cast<std::size_t>(k + 1) / kChunks;
        body(parts[static_cast<std::size_t>(k)], rng, lo, hi);
      },
      opt.max_workers);
  Acc total = std::move(parts.front());
  for (std::size_t k = 1; k < parts.size(); ++k) total.merge(parts[k]);
  return total;
}

double scaled_cgamma(int d, const CheckOptions& opt) { return c_gamma(d) * opt.c_gamma_scale; }

}  // namespace

NormLaw NormLaw::constant(double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("NormLaw::constant: s must be >= 0");
  return {"constant(" + std::to_string(s) + ")", [s](Rng&) { return s; }, s * s};
}

NormLaw NormLaw::uniform(double lo, double hi) {
  if (!(lo >= 0.0 && hi > lo)) throw std::invalid_argument("NormLaw::uniform: need 0 <= lo < hi");
  return {"uniform(" + std::to_string(lo) + "," + std::to_string(hi) + ")",
          [lo, hi](Rng& rng) { return lo + (hi - lo) * uniform01(rng); },
          (hi * hi * hi - lo * lo * lo) / (3.0 * (hi - lo))};
}

IdentityReport check_two_homogeneous(const NormLaw& law, int d, const Vector& x, std::size_t n,
                                     const CheckOptions& opt) {
  if (x.size() != d) throw std::invalid_argument("check_two_homogeneous: x has wrong dimension");
  const RunningStats acc = chunked<RunningStats>(n, opt, [&](RunningStats& s, Rng& rng, std::size_t lo, std::size_t hi) {
    Vector u(d);
    for (std::size_t i = lo; i < hi; ++i) {
      const double norm = law.draw(rng);
      sample_direction(d, rng, std::span<double>(u.data(), static_cast<std::size_t>(d)));
      s.add(norm * relu(norm * u.dot(x)));
    }
  });
  IdentityReport r;
  r.name = "two_homogeneous[" + law.name + "]";
  r.mc_estimate = acc.mean();
  r.mc_stderr = acc.estimate().se;
  r.closed_form = scaled_cgamma(d, opt) * law.second_moment * x.norm() / std::sqrt(static_cast<double>(d));
  r.z_score = z_of(r.mc_estimate, r.closed_form, r.mc_stderr);
  return r;
}

IdentityReport check_g_sigma(const RadialFn& g, const Vector& v, const RadialDistribution& dist, std::size_t n,
                             const CheckOptions& opt) {
  const int d = dist.params().d;
  if (v.size() != d) throw std::invalid_argument("check_g_sigma: v has wrong dimension");
  const double k = scaled_cgamma(d, opt) / std::sqrt(static_cast<double>(d)) * v.norm();
  const Paired acc = chunked<Paired>(n, opt, [&](Paired& p, Rng& rng, std::size_t lo, std::size_t hi) {
    Vector u(d);
    for (std::size_t i = lo; i < hi; ++i) {
      const double r = sample_radius(dist, rng);
      sample_direction(d, rng, std::span<double>(u.data(), static_cast<std::size_t>(d)));
      const double gr = g(r);
      p.add(gr * relu(r * v.dot(u)), k * gr * r);
    }
  });
  return paired_report("g_sigma", acc);
}

std::vector<IdentityReport> check_g_sigma_prime(const RadialFn& g, const Vector& v, const RadialDistribution& dist,
                                                std::size_t n, const CheckOptions& opt) {
  const int d = dist.params().d;
  if (v.size() != d) throw std::invalid_argument("check_g_sigma_prime: v has wrong dimension");
  const double vn = v.norm();
  if (!(vn > 0.0)) throw std::invalid_argument("check_g_sigma_prime: v must be nonzero");
  const Vector vbar = v / vn;
  // Householder reflection H swapping vbar and e_1; the coordinates of x in
  // the basis {H e_k} are H x, and H e_1 = vbar.
  Vector h = vbar;
  h[0] -= 1.0;
  const double h_sq = h.squaredNorm();
  const double k = scaled_cgamma(d, opt) / std::sqrt(static_cast<double>(d));

  struct Acc {
    std::vector<Paired> comp;
    void merge(const Acc& o) {
      if (comp.empty()) comp.resize(o.comp.size());
      for (std::size_t c = 0; c < comp.size(); ++c) comp[c].merge(o.comp[c]);
    }
  };
  const Acc acc = chunked<Acc>(n, opt, [&](Acc& a, Rng& rng, std::size_t lo, std::size_t hi) {
    a.comp.resize(static_cast<std::size_t>(d));
    Vector u(d);
    for (std::size_t i = lo; i < hi; ++i) {
      const double r = sample_radius(dist, rng);
      sample_direction(d, rng, std::span<double>(u.data(), static_cast<std::size_t>(d)));
      const double gr = g(r);
      const bool active = v.dot(u) > 0.0;
      Vector c = r * u;
      if (h_sq > 0.0) c -= (2.0 * h.dot(c) / h_sq) * h;
      for (int j = 0; j < d; ++j) {
        const double lhs = active ? gr * c[j] : 0.0;
        const double rhs = j == 0 ? k * gr * r : 0.0;
        a.comp[static_cast<std::size_t>(j)].add(lhs, rhs);
      }
    }
  });
  std::vector<IdentityReport> out;
  for (int j = 0; j < d; ++j)
    out.push_back(paired_report(j == 0 ? "g_sigma_prime[along v]" : "g_sigma_prime[orth " + std::to_string(j) + "]",
                                acc.comp[static_cast<std::size_t>(j)]));
  return out;
}

IdentityReport check_gF_corollary(const NetworkState& state, const RadialFn& g, const RadialDistribution& dist,
                                  std::size_t n, const CheckOptions& opt) {
  const int d = dist.params().d;
  if (state.d != d) throw std::invalid_argument("check_gF_corollary: state and distribution dimensions differ");
  const double a = alpha(state) * opt.c_gamma_scale;
  const Paired acc = chunked<Paired>(n, opt, [&](Paired& p, Rng& rng, std::size_t lo, std::size_t hi) {
    constexpr std::size_t kBlock = 1024;
    for (std::size_t b = lo; b < hi; b += kBlock) {
      const int rows = static_cast<int>(std::min(kBlock, hi - b));
      const Batch x = sample_inputs(dist, rng, rows);
      const Vector F = forward_F_batch(state, x);
      for (int s = 0; s < rows; ++s) {
        const double r = x.row(s).norm();
        const double gr = g(r);
        p.add(gr * F[s], a * gr * r);
      }
    }
  });
  return paired_report("gF_corollary", acc);
}

SymmetricFlowReport check_symmetric_flow(const HyperParams& hp, int n_copies, int batch,
                                         const RadialDistribution& dist, const CheckOptions& opt) {
  hp.validate();
  if (n_copies < 2 || n_copies % 2 != 0) throw std::invalid_argument("check_symmetric_flow: n_copies must be even");
  if (batch < 1) throw std::invalid_argument("check_symmetric_flow: batch must be >= 1");
  if (dist.params().d != hp.d) throw std::invalid_argument("check_symmetric_flow: dimension mismatch");
  const int d = hp.d;
  Rng rng = make_stream(opt.seed, 0);

  Matrix first(n_copies, d);
  for (int i = 0; i < n_copies / 2; ++i) {
    sample_direction(d, rng, std::span<double>(first.row(2 * i).data(), static_cast<std::size_t>(d)));
    first.row(2 * i) *= hp.sigma1;
    first.row(2 * i + 1) = -first.row(2 * i);
  }
  std::normal_distribution<double> normal(0.0, hp.sigma2);
  Vector w2(hp.m2);
  for (int j = 0; j < hp.m2; ++j) w2[j] = -1.0 + normal(rng);
  NetworkState state = make_state(std::move(first), std::move(w2), Vector::Constant(hp.m2, hp.sigma_r));

  Rng batch_rng = make_stream(opt.seed, 1);
  const Batch x = sample_inputs(dist, batch_rng, batch);
  const BatchUpdate step = batch_update(state, x, hp.eta, ClipRadii::none(), opt.max_workers);

  SymmetricFlowReport rep;
  rep.n_neurons = n_copies;
  rep.batch = batch;
  double max_tan = 0.0, max_rad = 0.0;
  double min_growth = std::numeric_limits<double>::infinity(), max_growth = -min_growth;
  for (int i = 0; i < n_copies; ++i) {
    const Vector v = state.first.weights.row(i).transpose();
    const Vector dv = step.state.first.weights.row(i).transpose() - v;
    const Vector vbar = v.normalized();
    const double radial = dv.dot(vbar);
    max_rad = std::max(max_rad, std::abs(radial));
    max_tan = std::max(max_tan, (dv - radial * vbar).norm());
    const double growth = step.state.first.weights.row(i).squaredNorm() - v.squaredNorm();
    min_growth = std::min(min_growth, growth);
    max_growth = std::max(max_growth, growth);
  }
  rep.tangential_ratio = max_rad > 0.0 ? max_tan / max_rad : std::numeric_limits<double>::infinity();
  rep.radial_nonuniformity = max_growth / min_growth - 1.0;
  if (!(min_growth * max_growth > 0.0)) rep.radial_nonuniformity = std::numeric_limits<double>::infinity();

  rep.delta_alpha = alpha(step.state) - alpha(state);
  const Vector F = forward_F_batch(state, x);
  double sf = 0.0;
  for (int s = 0; s < batch; ++s) sf += score_S(state, x.row(s).transpose()) * F[s];
  sf /= batch;
  rep.predicted_delta_alpha = hp.eta * 4.0 * scaled_cgamma(d, opt) / std::sqrt(static_cast<double>(d)) * sf;
  rep.alpha_residual = std::abs(rep.delta_alpha - rep.predicted_delta_alpha) / std::abs(rep.delta_alpha);
  return rep;
}

bool SuiteResult::passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const SuiteEntry& e) { return e.failed; });
}

SuiteResult run_identity_suite(const SuiteSettings& settings, const RadialDistribution& dist) {
  const int d = settings.d;
  if (dist.params().d != d) throw std::invalid_argument("run_identity_suite: dimension mismatch");

  // Fixed probe vectors; only their norms and the state's first layer matter
  // to the closed forms.
  Rng probe = make_stream(settings.seed, 1u << 20);
  const Vector x = 0.7 * sample_direction(d, probe);
  const Vector v = 1.3 * sample_direction(d, probe);
  NetworkState state;
  if (settings.state) {
    state = *settings.state;
  } else {
    // Anisotropic layer: 16 neurons clustered around e_1 with unequal norms.
    Matrix first(16, d);
    for (int i = 0; i < 16; ++i) {
      Vector u = sample_direction(d, probe) * 0.3;
      u[0] += 1.0;
      first.row(i) = (0.2 + 0.1 * i) * u.normalized().transpose();
    }
    state = make_state(std::move(first), Vector::Constant(1, -1.0), Vector::Constant(1, 0.5));
  }

  const RadialFn one = [](double) { return 1.0; };
  const RadialFn inside = [](double r) { return r <= 1.0 ? 1.0 : 0.0; };
  const RadialFn decay = [](double r) { return std::exp(-r); };

  auto run = [&](std::uint64_t seed) {
    CheckOptions opt;
    opt.seed = seed;
    opt.c_gamma_scale = settings.c_gamma_scale;
    opt.max_workers = settings.max_workers;
    std::vector<IdentityReport> out;
    out.push_back(check_two_homogeneous(NormLaw::constant(1.0), d, x, settings.n, opt));
    out.push_back(check_two_homogeneous(NormLaw::uniform(0.5, 1.5), d, x, settings.n, opt));
    auto a = check_g_sigma(one, v, dist, settings.n, opt);
    a.name += "[g=1]";
    out.push_back(a);
    auto b = check_g_sigma(inside, v, dist, settings.n, opt);
    b.name += "[g=1{r<=1}]";
    out.push_back(b);
    for (auto& r : check_g_sigma_prime(decay, v, dist, settings.n, opt)) {
      r.name += "[g=exp(-r)]";
      out.push_back(r);
    }
    auto c = check_gF_corollary(state, inside, dist, settings.n, opt);
    c.name += "[g=1{r<=1}]";
    out.push_back(c);
    auto e = check_gF_corollary(state, decay, dist, settings.n, opt);
    e.name += "[g=exp(-r)]";
    out.push_back(e);
    return out;
  };

  const auto first = run(settings.seed);
  const auto second = run(settings.seed + settings.seed_stride);
  SuiteResult result;
  for (std::size_t i = 0; i < first.size(); ++i) {
    SuiteEntry e{first[i], second[i], false};
    e.failed = !e.first.passed(settings.z_threshold) && !e.second.passed(settings.z_threshold);
    result.entries.push_back(std::move(e));
  }
  return result;
}

}  // namespace mfd3
