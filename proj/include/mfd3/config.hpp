// Line-oriented run configuration:
//
//   # comment
//   key = value
//
// Unknown keys, duplicate keys and malformed values are errors.
#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfd3/dynamics.hpp"
#include "mfd3/input_distribution.hpp"

namespace mfd3 {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ConfigValues = std::map<std::string, std::string>;

struct RunConfig {
  TrainSettings train;
  std::string out_dir;
  bool emit_snapshots = true;
  int n_grid = kDefaultGridNodes;
  double tail_bound = kDefaultTailBound;
};

/// Every accepted key, in echo order.
const std::vector<std::string>& config_keys();
/// Keys without a default.
const std::vector<std::string>& required_config_keys();

ConfigValues parse_config_text(std::istream& in);
ConfigValues read_config_file(const std::string& path);

/// Applies defaults, then `values`. Throws ConfigError naming the key on an
/// unknown or missing key or a bad value.
RunConfig config_from_values(const ConfigValues& values);

/// "key = value" for every key, reflecting the effective configuration.
std::vector<std::string> config_echo(const RunConfig& config);

}  // namespace mfd3
