#include "mfd3/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>

namespace mfd3 {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError("config: key '" + key + "' is out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

const char* rereference_name(RereferenceAt r) {
  switch (r) {
    case RereferenceAt::T11: return "T11";
    case RereferenceAt::T12: return "T12";
    case RereferenceAt::T1: return "T1";
    case RereferenceAt::never: break;
  }
  return "never";
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MFD3_DOUBLE_KEY(name, field)                                                         \
  Key {                                                                                      \
    name, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); },          \
        [](const RunConfig& c) { return fmt(c.field); }                                      \
  }
#define MFD3_INT_KEY(name, field)                                                            \
  Key {                                                                                      \
    name, [](RunConfig& c, const std::string& v) { c.field = to_int(name, v); },             \
        [](const RunConfig& c) { return std::to_string(c.field); }                           \
  }
#define MFD3_LONG_KEY(name, field)                                                           \
  Key {                                                                                      \
    name, [](RunConfig& c, const std::string& v) { c.field = static_cast<long>(to_integer(name, v)); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                           \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      MFD3_INT_KEY("d", train.hp.d),
      MFD3_INT_KEY("m1", train.hp.m1),
      MFD3_INT_KEY("m2", train.hp.m2),
      Key{"seed",
          [](RunConfig& c, const std::string& v) {
            const long long s = to_integer("seed", v);
            if (s < 0) throw ConfigError("config: key 'seed' must be >= 0");
            c.train.seed = static_cast<std::uint64_t>(s);
          },
          [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      Key{"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
          [](const RunConfig& c) { return c.out_dir; }},
      MFD3_LONG_KEY("max_steps", train.hp.max_steps),
      MFD3_DOUBLE_KEY("a", train.dist_params.a),
      MFD3_DOUBLE_KEY("b", train.dist_params.b),
      MFD3_DOUBLE_KEY("sigma1", train.hp.sigma1),
      MFD3_DOUBLE_KEY("sigma2", train.hp.sigma2),
      MFD3_DOUBLE_KEY("sigma_r", train.hp.sigma_r),
      MFD3_DOUBLE_KEY("c_v1", train.hp.c_v1),
      MFD3_DOUBLE_KEY("c_v2", train.hp.c_v2),
      MFD3_DOUBLE_KEY("c_r2", train.hp.c_r2),
      MFD3_DOUBLE_KEY("eta", train.hp.eta),
      MFD3_INT_KEY("batch", train.hp.batch),
      MFD3_DOUBLE_KEY("eps_target", train.hp.eps_target),
      MFD3_LONG_KEY("checkpoint_every", train.hp.checkpoint_every),
      MFD3_INT_KEY("streams", train.streams),
      MFD3_INT_KEY("diag_samples", train.diag_samples),
      MFD3_INT_KEY("direction_samples", train.direction_samples),
      MFD3_INT_KEY("radii_samples", train.radii_samples),
      MFD3_INT_KEY("fshape_directions", train.fshape_directions),
      MFD3_DOUBLE_KEY("trunc_c", train.trunc_c),
      MFD3_DOUBLE_KEY("stage_c12", train.stage_c12),
      MFD3_DOUBLE_KEY("stage_c1", train.stage_c1),
      Key{"rereference",
          [](RunConfig& c, const std::string& v) {
            if (v == "never") c.train.rereference = RereferenceAt::never;
            else if (v == "T11") c.train.rereference = RereferenceAt::T11;
            else if (v == "T12") c.train.rereference = RereferenceAt::T12;
            else if (v == "T1") c.train.rereference = RereferenceAt::T1;
            else throw ConfigError("config: key 'rereference' expects never, T11, T12 or T1, got '" + v + "'");
          },
          [](const RunConfig& c) { return std::string(rereference_name(c.train.rereference)); }},
      Key{"emit_snapshots", [](RunConfig& c, const std::string& v) { c.emit_snapshots = to_bool("emit_snapshots", v); },
          [](const RunConfig& c) { return std::string(c.emit_snapshots ? "true" : "false"); }},
      MFD3_INT_KEY("n_grid", n_grid),
      MFD3_DOUBLE_KEY("tail_bound", tail_bound),
  };
  return keys;
}

#undef MFD3_DOUBLE_KEY
#undef MFD3_INT_KEY
#undef MFD3_LONG_KEY

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys = {"d", "m1", "m2", "seed", "out_dir", "max_steps"};
  return keys;
}

ConfigValues parse_config_text(std::istream& in) {
  ConfigValues values;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ConfigError("config: line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    if (!values.emplace(key, value).second)
      throw ConfigError("config: line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return values;
}

ConfigValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config_text(in);
}

RunConfig config_from_values(const ConfigValues& values) {
  const auto& table = key_table();
  for (const auto& [key, value] : values) {
    (void)value;
    if (std::none_of(table.begin(), table.end(), [&](const Key& k) { return k.name == key; }))
      throw ConfigError("config: unknown key '" + key + "'");
  }
  for (const auto& key : required_config_keys())
    if (!values.count(key)) throw ConfigError("config: missing required key '" + key + "'");

  RunConfig config;
  table.front().set(config, values.at("d"));
  if (config.train.hp.d < 1) throw ConfigError("config: key 'd' must be >= 1");
  config.train.hp = HyperParams::defaults(config.train.hp.d);
  config.train.dist_params.d = config.train.hp.d;
  for (const auto& k : table)
    if (auto it = values.find(k.name); it != values.end()) k.set(config, it->second);
  config.train.dist_params.d = config.train.hp.d;

  try {
    config.train.hp.validate();
    config.train.dist_params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (config.out_dir.empty()) throw ConfigError("config: key 'out_dir' is empty");
  auto positive = [](const char* key, long long v) {
    if (v < 1) throw ConfigError(std::string("config: key '") + key + "' must be >= 1");
  };
  positive("streams", config.train.streams);
  positive("diag_samples", config.train.diag_samples);
  positive("direction_samples", config.train.direction_samples);
  positive("fshape_directions", config.train.fshape_directions);
  if (config.train.radii_samples < 2) throw ConfigError("config: key 'radii_samples' must be >= 2");
  if (!(config.train.trunc_c > 0.0)) throw ConfigError("config: key 'trunc_c' must be > 0");
  if (!(config.train.stage_c12 > 0.0)) throw ConfigError("config: key 'stage_c12' must be > 0");
  if (!(config.train.stage_c1 > 0.0)) throw ConfigError("config: key 'stage_c1' must be > 0");
  if (config.n_grid < 1000) throw ConfigError("config: key 'n_grid' must be >= 1000");
  if (!(config.tail_bound > 0.0 && config.tail_bound < 0.1))
    throw ConfigError("config: key 'tail_bound' must be in (0, 0.1)");
  return config;
}

std::vector<std::string> config_echo(const RunConfig& config) {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name + " = " + k.get(config));
  return out;
}

}  // namespace mfd3
