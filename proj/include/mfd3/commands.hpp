// Subcommand bodies behind the mfd3 executable. Each returns a process exit
// status and writes human-readable progress to `log`.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfd3/config.hpp"

namespace mfd3 {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitVerificationFailure = 2,
  kExitNumericAbort = 3,
};

/// Writes metrics.csv, fshape_<k>.csv, neurons2_<k>.csv, snapshots/step_<k>.state
/// and run_summary.txt under config.out_dir.
int cmd_train(const RunConfig& config, std::ostream& log);

struct VerifyIdentitiesOptions {
  int d = 10;
  std::size_t n = 1000000;
  std::uint64_t seed = 1;
  bool json = false;
  /// C_Gamma multiplier in the closed forms; 1.1 forces failures.
  double c_gamma_scale = 1.0;
  double z_threshold = 4.0;
  /// Optional snapshot for the corollary check.
  std::string state_path;
  bool flow = true;
  int flow_copies = 512;
  int flow_batch = 1 << 18;
};
int cmd_verify_identities(const VerifyIdentitiesOptions& opt, std::ostream& out, std::ostream& log);

struct VerifyDistOptions {
  int d = 10;
  std::size_t n = 1000000;
  std::uint64_t seed = 1;
  double a = 1.0;
  double b = 1.0;
  double reg_c = 1.0;
  int n_grid = 1 << 16;
  double tail_bound = 1e-4;
  /// Dimensions for the growth check of E_{|x|<=c d}|x|.
  std::vector<int> growth_dims = {10, 50, 100};
};
int cmd_verify_dist(const VerifyDistOptions& opt, std::ostream& out, std::ostream& log);

struct SampleOptions {
  int d = 10;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  double a = 1.0;
  double b = 1.0;
  int n_grid = 1 << 16;
  double tail_bound = 1e-4;
};
/// CSV rows radius,x_1,...,x_d after a comment header.
int cmd_sample(const SampleOptions& opt, std::ostream& out, std::ostream& log);

/// Comment header shared by every output file: version, seed and the given
/// key = value lines, each prefixed with "# ".
void write_output_header(std::ostream& out, std::uint64_t seed, const std::vector<std::string>& echo);

}  // namespace mfd3
