#include "mfd3/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "mfd3/diagnostics.hpp"
#include "mfd3/dynamics.hpp"
#include "mfd3/state_io.hpp"
#include "mfd3/symmetry_suite.hpp"

namespace mfd3 {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.10g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string event_str(const std::optional<long>& t) { return t ? std::to_string(*t) : "none"; }

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

// Composite Simpson on (0, hi] for E[h(r)] under the exact radial density.
template <class H>
double radial_quadrature(const DistributionParams& params, H&& h, double hi, int panels) {
  const double step = hi / (2 * panels);
  double sum = 0.0;
  for (int k = 0; k <= 2 * panels; ++k) {
    const double r = k * step;
    const double v = r > 0.0 ? h(r) * radial_pdf(params, r) : 0.0;
    sum += v * (k == 0 || k == 2 * panels ? 1.0 : (k % 2 ? 4.0 : 2.0));
  }
  return sum * step / 3.0;
}

}  // namespace

void write_output_header(std::ostream& out, std::uint64_t seed, const std::vector<std::string>& echo) {
  out << "# mfd3 " << kVersion << '\n';
  out << "# seed = " << seed << '\n';
  for (const auto& line : echo) out << "# " << line << '\n';
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  const auto echo = config_echo(config);
  const fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir / "snapshots", ec);
  if (ec) {
    log << "error: cannot create " << (dir / "snapshots").string() << ": " << ec.message() << '\n';
    return kExitConfigError;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    const RadialDistribution dist = build_radial_distribution(config.train.dist_params, config.n_grid, config.tail_bound);
    log << "distribution: r_max = " << fmt(dist.r_max()) << ", tail_mass = " << fmt(dist.tail_mass()) << '\n';

    auto metrics = open_output(dir / "metrics.csv");
    write_output_header(metrics, config.train.seed, echo);
    write_metrics_header(metrics);

    TrainSettings settings = config.train;
    settings.abort_dump_path = (dir / "abort.state").string();
    TrainSinks sinks;
    sinks.on_checkpoint = [&](const Checkpoint& cp) {
      const long k = cp.record.step;
      write_metrics_row(metrics, cp.record);
      metrics.flush();
      auto fshape = open_output(dir / ("fshape_" + std::to_string(k) + ".csv"));
      write_output_header(fshape, config.train.seed, echo);
      write_fshape_csv(fshape, cp.profile);
      auto neurons = open_output(dir / ("neurons2_" + std::to_string(k) + ".csv"));
      write_output_header(neurons, config.train.seed, echo);
      write_neurons2_csv(neurons, cp.state);
      if (config.emit_snapshots) {
        std::vector<std::string> comments = {std::string("mfd3 ") + kVersion,
                                             "seed = " + std::to_string(config.train.seed),
                                             "step = " + std::to_string(k)};
        comments.insert(comments.end(), echo.begin(), echo.end());
        save_state((dir / "snapshots" / ("step_" + std::to_string(k) + ".state")).string(), cp.state, comments);
      }
      log << "step " << k << "  loss " << fmt(cp.record.loss) << "  alpha " << fmt(cp.record.alpha) << "  w2_bar "
          << fmt(cp.record.w2_bar) << "  delta2 " << fmt(cp.record.delta2) << '\n';
    };

    const RunSummary summary = train(settings, dist, sinks);

    auto out = open_output(dir / "run_summary.txt");
    write_output_header(out, config.train.seed, echo);
    out << "steps = " << summary.steps << '\n';
    out << "initial_loss = " << fmt(summary.initial_loss) << '\n';
    out << "final_loss = " << fmt(summary.final_loss) << '\n';
    out << "reached_target = " << (summary.reached_target ? "true" : "false") << '\n';
    out << "T11 = " << event_str(summary.events.T11) << '\n';
    out << "T12 = " << event_str(summary.events.T12) << '\n';
    out << "T1 = " << event_str(summary.events.T1) << '\n';
    out << "T2 = " << event_str(summary.events.T2) << '\n';
    const auto& r = summary.last;
    out << "final_alpha = " << fmt(r.alpha) << '\n';
    out << "final_w2_bar = " << fmt(r.w2_bar) << '\n';
    out << "final_b2_bar = " << fmt(r.b2_bar) << '\n';
    out << "final_delta2 = " << fmt(r.delta2) << '\n';
    out << "final_L2_term = " << fmt(r.L2_term) << '\n';
    out << "final_L2_approx = " << fmt(r.L2_approx) << '\n';
    out << "final_L3_term = " << fmt(r.L3_term) << '\n';
    out << "final_L3_se = " << fmt(r.L3_se) << '\n';
    out << "final_neuron_gap = " << fmt(r.neuron_gap) << '\n';
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << "done: " << summary.steps << " steps in " << fmt(secs) << " s, final loss " << fmt(summary.final_loss)
        << '\n';
    return kExitOk;
  } catch (const NumericAbort& e) {
    log << "numeric abort: " << e.what() << " (last finite state in " << (dir / "abort.state").string() << ")\n";
    return kExitNumericAbort;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

int cmd_verify_identities(const VerifyIdentitiesOptions& opt, std::ostream& out, std::ostream& log) {
  try {
    DistributionParams params;
    params.d = opt.d;
    const RadialDistribution dist = build_radial_distribution(params);

    SuiteSettings s;
    s.d = opt.d;
    s.n = opt.n;
    s.seed = opt.seed;
    s.c_gamma_scale = opt.c_gamma_scale;
    s.z_threshold = opt.z_threshold;
    if (!opt.state_path.empty()) s.state = load_state(opt.state_path);
    const SuiteResult suite = run_identity_suite(s, dist);
    bool ok = suite.passed();

    std::optional<SymmetricFlowReport> flow;
    bool flow_ok = true;
    if (opt.flow) {
      HyperParams hp = HyperParams::defaults(opt.d);
      hp.m2 = 4;
      CheckOptions copt;
      copt.seed = opt.seed;
      copt.c_gamma_scale = opt.c_gamma_scale;
      flow = check_symmetric_flow(hp, opt.flow_copies, opt.flow_batch, dist, copt);
      flow_ok = flow->tangential_ratio <= 0.1 && flow->alpha_residual <= 0.2 && flow->radial_nonuniformity <= 0.1;
      ok = ok && flow_ok;
    }

    if (opt.json) {
      nlohmann::json j;
      j["version"] = kVersion;
      j["d"] = opt.d;
      j["n"] = opt.n;
      j["seed"] = opt.seed;
      j["z_threshold"] = opt.z_threshold;
      j["c_gamma_scale"] = opt.c_gamma_scale;
      for (const auto& e : suite.entries) {
        for (const auto* r : {&e.first, &e.second}) {
          j["reports"].push_back({{"name", r->name},
                                  {"mc_estimate", r->mc_estimate},
                                  {"mc_stderr", r->mc_stderr},
                                  {"closed_form", r->closed_form},
                                  {"z_score", r->z_score},
                                  {"seed", r == &e.first ? opt.seed : opt.seed + s.seed_stride}});
        }
        j["checks"].push_back({{"name", e.first.name}, {"failed", e.failed}});
      }
      if (flow)
        j["symmetric_flow"] = {{"n_neurons", flow->n_neurons},
                               {"batch", flow->batch},
                               {"tangential_ratio", flow->tangential_ratio},
                               {"delta_alpha", flow->delta_alpha},
                               {"predicted_delta_alpha", flow->predicted_delta_alpha},
                               {"alpha_residual", flow->alpha_residual},
                               {"radial_nonuniformity", flow->radial_nonuniformity},
                               {"passed", flow_ok}};
      j["passed"] = ok;
      out << j.dump(2) << '\n';
    } else {
      write_output_header(out, opt.seed,
                          {"d = " + std::to_string(opt.d), "n = " + std::to_string(opt.n),
                           "z_threshold = " + fmt(opt.z_threshold), "c_gamma_scale = " + fmt(opt.c_gamma_scale)});
      for (const auto& e : suite.entries) {
        for (const auto* r : {&e.first, &e.second})
          out << r->name << "  seed=" << (r == &e.first ? opt.seed : opt.seed + s.seed_stride)
              << "  mc_estimate=" << fmt(r->mc_estimate) << "  mc_stderr=" << fmt(r->mc_stderr)
              << "  closed_form=" << fmt(r->closed_form) << "  z=" << fmt(r->z_score) << '\n';
        out << (e.failed ? "FAIL " : "PASS ") << e.first.name << '\n';
      }
      if (flow)
        out << (flow_ok ? "PASS " : "FAIL ") << "symmetric_flow  neurons=" << flow->n_neurons
            << "  batch=" << flow->batch << "  tangential_ratio=" << fmt(flow->tangential_ratio)
            << "  alpha_residual=" << fmt(flow->alpha_residual)
            << "  radial_nonuniformity=" << fmt(flow->radial_nonuniformity) << '\n';
      out << (ok ? "all checks passed" : "verification FAILED") << '\n';
    }
    return ok ? kExitOk : kExitVerificationFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

int cmd_verify_dist(const VerifyDistOptions& opt, std::ostream& out, std::ostream& log) {
  try {
    bool ok = true;
    auto check = [&](const std::string& name, bool pass) {
      out << name << "_ok = " << (pass ? "true" : "false") << '\n';
      ok = ok && pass;
    };
    write_output_header(out, opt.seed,
                        {"d = " + std::to_string(opt.d), "n = " + std::to_string(opt.n), "a = " + fmt(opt.a),
                         "b = " + fmt(opt.b), "reg_c = " + fmt(opt.reg_c), "n_grid = " + std::to_string(opt.n_grid),
                         "tail_bound = " + fmt(opt.tail_bound)});

    DistributionParams params{opt.d, opt.a, opt.b};
    const RadialDistribution dist = build_radial_distribution(params, opt.n_grid, opt.tail_bound);
    out << "r_min = " << fmt(dist.r_min()) << '\n';
    out << "r_max = " << fmt(dist.r_max()) << '\n';
    out << "tail_mass = " << fmt(dist.tail_mass()) << '\n';
    out << "raw_mass = " << fmt(dist.raw_mass()) << '\n';
    out << "envelope_constant = " << fmt(dist.envelope_constant()) << '\n';
    check("normalisation", std::abs(dist.raw_mass() - 1.0) <= 1e-3);

    const RegularityReport rep = regularity_report(dist, opt.n, opt.seed, opt.reg_c);
    auto est = [&](const std::string& key, const Estimate& e) {
      out << key << " = " << fmt(e.mean) << '\n' << key << "_se = " << fmt(e.se) << '\n';
    };
    est("mean_norm_below_099", rep.mean_norm_below_099);
    est("mean_target", rep.mean_target);
    est("mean_norm_below_cd", rep.mean_norm_below_cd);
    out << "max_tail_product = " << fmt(rep.max_tail_product) << '\n';
    for (std::size_t k = 0; k < rep.second_moment_radii.size(); ++k)
      out << "second_moment[R=" << fmt(rep.second_moment_radii[k]) << "] = " << fmt(rep.second_moments[k].mean)
          << '\n';

    // P(|x| >= R) <= C / R for the certified envelope constant C.
    check("tail_product_bounded", rep.max_tail_product <= dist.envelope_constant());
    const auto& a = rep.mean_norm_below_099;
    check("mean_norm_below_099_bounded", a.mean >= 0.05 && a.mean <= 0.99);
    const double target_quad =
        radial_quadrature(params, [](double r) { return std::max(1.0 - r, 0.0); }, 1.0, 20000);
    out << "mean_target_quadrature = " << fmt(target_quad) << '\n';
    check("mean_target_positive", rep.mean_target.mean >= 0.5 * target_quad && target_quad > 0.0 &&
                                      std::abs(rep.mean_target.mean - target_quad) <= 4.0 * rep.mean_target.se);
    bool se_small = true;
    for (const Estimate* e : {&rep.mean_norm_below_099, &rep.mean_target, &rep.mean_norm_below_cd})
      se_small = se_small && e->se < 0.05 * e->mean;
    check("standard_errors_below_5pct", se_small);

    bool grows = rep.second_moments.size() >= 3;
    for (std::size_t k = 2; k < rep.second_moments.size(); ++k)
      grows = grows && rep.second_moments[k].mean >= 2.0 * rep.second_moments[k - 1].mean;
    check("second_moment_unbounded", grows);

    std::vector<double> growth;
    for (int gd : opt.growth_dims) {
      const RadialDistribution g = build_radial_distribution(DistributionParams{gd, opt.a, opt.b}, opt.n_grid,
                                                             opt.tail_bound);
      const double m = regularity_report(g, opt.n, opt.seed, opt.reg_c).mean_norm_below_cd.mean;
      out << "mean_norm_below_cd[d=" << gd << "] = " << fmt(m) << '\n';
      growth.push_back(m);
    }
    bool monotone = growth.size() >= 2;
    for (std::size_t k = 1; k < growth.size(); ++k) monotone = monotone && growth[k] >= growth[k - 1];
    const double ratio = growth.empty() ? 0.0 : growth.back() / growth.front();
    out << "growth_ratio = " << fmt(ratio) << '\n';
    check("log_growth", monotone && ratio >= 1.0 && ratio <= 4.0);

    out << "passed = " << (ok ? "true" : "false") << '\n';
    return ok ? kExitOk : kExitVerificationFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

int cmd_sample(const SampleOptions& opt, std::ostream& out, std::ostream& log) {
  try {
    DistributionParams params{opt.d, opt.a, opt.b};
    const RadialDistribution dist = build_radial_distribution(params, opt.n_grid, opt.tail_bound);
    write_output_header(out, opt.seed,
                        {"d = " + std::to_string(opt.d), "n = " + std::to_string(opt.n), "a = " + fmt(opt.a),
                         "b = " + fmt(opt.b), "n_grid = " + std::to_string(opt.n_grid),
                         "tail_bound = " + fmt(opt.tail_bound)});
    out << "radius";
    for (int k = 1; k <= opt.d; ++k) out << ",x_" << k;
    out << '\n';
    Rng rng = make_stream(opt.seed, 0);
    std::vector<double> u(static_cast<std::size_t>(opt.d));
    std::string line;
    char buf[32];
    for (std::size_t i = 0; i < opt.n; ++i) {
      const double r = sample_radius(dist, rng);
      sample_direction(opt.d, rng, u);
      line.clear();
      line.append(buf, static_cast<std::size_t>(std::snprintf(buf, sizeof buf, "%.17g", r)));
      for (double c : u) {
        line.push_back(',');
        line.append(buf, static_cast<std::size_t>(std::snprintf(buf, sizeof buf, "%.17g", r * c)));
      }
      line.push_back('\n');
      out << line;
    }
    return out ? kExitOk : kExitConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace mfd3
