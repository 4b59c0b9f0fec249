// mfd3: training runs, verification suites and input sampling.
//
//   mfd3 train --config run.cfg [--<key> <value> ...]
//   mfd3 verify-identities --d 10 --n 1000000 [--json] [--seed s] [--corrupt-cgamma f]
//   mfd3 verify-dist --d 10 --n 1000000
//   mfd3 sample --d 10 --n 1000 [--out samples.csv]
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "mfd3/commands.hpp"
#include "mfd3/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mean-field three-layer ReLU network experiments"};
  app.set_version_flag("--version", std::string(mfd3::kVersion));
  app.require_subcommand(1);

  // train: every config key is also a flag; flags win over the file.
  auto* train = app.add_subcommand("train", "run the clipped SGD trainer");
  std::string config_path;
  train->add_option("--config", config_path, "key = value configuration file");
  std::map<std::string, std::string> overrides;
  for (const auto& key : mfd3::config_keys())
    train->add_option("--" + key, overrides[key], "override config key '" + key + "'");

  mfd3::VerifyIdentitiesOptions vi;
  auto* verify_id = app.add_subcommand("verify-identities", "Monte-Carlo checks of the symmetry identities");
  verify_id->add_option("--d", vi.d, "input dimension")->check(CLI::PositiveNumber);
  verify_id->add_option("--n", vi.n, "samples per check and seed")->check(CLI::PositiveNumber);
  verify_id->add_option("--seed", vi.seed, "base seed (a second seed is derived from it)");
  verify_id->add_flag("--json", vi.json, "machine-readable output");
  verify_id->add_option("--corrupt-cgamma", vi.c_gamma_scale, "multiply C_Gamma in the closed forms (canary)");
  verify_id->add_option("--z-threshold", vi.z_threshold, "|z| acceptance threshold");
  verify_id->add_option("--state", vi.state_path, "state file for the E[gF] = alpha E[g|x|] check");
  verify_id->add_option("--flow-batch", vi.flow_batch, "batch size of the symmetric-flow check");
  verify_id->add_option("--flow-copies", vi.flow_copies, "first-layer neurons in the symmetric-flow check");
  bool no_flow = false;
  verify_id->add_flag("--no-flow", no_flow, "skip the symmetric-flow check");

  mfd3::VerifyDistOptions vd;
  auto* verify_dist = app.add_subcommand("verify-dist", "validity and regularity checks of the input law");
  verify_dist->add_option("--d", vd.d, "input dimension")->check(CLI::PositiveNumber);
  verify_dist->add_option("--n", vd.n, "Monte-Carlo samples")->check(CLI::PositiveNumber);
  verify_dist->add_option("--seed", vd.seed, "seed");
  verify_dist->add_option("--a", vd.a, "scale constant a");
  verify_dist->add_option("--b", vd.b, "scale constant b");
  verify_dist->add_option("--reg-c", vd.reg_c, "truncation constant c in E_{|x|<=c d}|x|");
  verify_dist->add_option("--n-grid", vd.n_grid, "minimum tabulation nodes");
  verify_dist->add_option("--tail-bound", vd.tail_bound, "certified tail mass");
  verify_dist->add_option("--growth-dims", vd.growth_dims, "dimensions for the log d growth check");

  mfd3::SampleOptions so;
  std::string sample_out;
  auto* sample = app.add_subcommand("sample", "draw inputs from the radial law as CSV");
  sample->add_option("--d", so.d, "input dimension")->check(CLI::PositiveNumber);
  sample->add_option("--n", so.n, "number of samples");
  sample->add_option("--seed", so.seed, "seed");
  sample->add_option("--a", so.a, "scale constant a");
  sample->add_option("--b", so.b, "scale constant b");
  sample->add_option("--n-grid", so.n_grid, "minimum tabulation nodes");
  sample->add_option("--tail-bound", so.tail_bound, "certified tail mass");
  sample->add_option("--out", sample_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfd3::kExitConfigError;
  }

  if (*train) {
    try {
      mfd3::ConfigValues values;
      if (!config_path.empty()) values = mfd3::read_config_file(config_path);
      for (const auto& key : mfd3::config_keys())
        if (train->count("--" + key)) values[key] = overrides[key];
      return mfd3::cmd_train(mfd3::config_from_values(values), std::cerr);
    } catch (const mfd3::ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return mfd3::kExitConfigError;
    }
  }
  if (*verify_id) {
    vi.flow = !no_flow;
    return mfd3::cmd_verify_identities(vi, std::cout, std::cerr);
  }
  if (*verify_dist) return mfd3::cmd_verify_dist(vd, std::cout, std::cerr);
  if (*sample) {
    if (sample_out.empty()) return mfd3::cmd_sample(so, std::cout, std::cerr);
    std::ofstream out(sample_out);
    if (!out) {
      std::cerr << "error: cannot open " << sample_out << '\n';
      return mfd3::kExitConfigError;
    }
    return mfd3::cmd_sample(so, out, std::cerr);
  }
  return mfd3::kExitConfigError;
}
