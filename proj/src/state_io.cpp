#include "mfd3/state_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mfd3 {
namespace {

std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    return true;
  }
  return false;
}

std::vector<double> parse_row(const std::string& line, std::size_t expected) {
  std::vector<double> values;
  values.reserve(expected);
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
      throw std::runtime_error("read_state: bad number '" + token + "'");
    values.push_back(v);
  }
  if (values.size() != expected)
    throw std::runtime_error("read_state: expected " + std::to_string(expected) + " values, got " +
                             std::to_string(values.size()));
  return values;
}

}  // namespace

void write_state(std::ostream& out, const NetworkState& state, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  const int m1 = state.first.width();
  const int m2 = state.second.width();
  out << kStateMagic << " v" << kStateVersion << ' ' << state.d << ' ' << m1 << ' ' << m2 << '\n';
  for (int i = 0; i < m1; ++i) {
    for (int k = 0; k < state.d; ++k) {
      if (k) out << ' ';
      out << format_double(state.first.weights(i, k));
    }
    out << '\n';
  }
  for (int j = 0; j < m2; ++j)
    out << format_double(state.second.w[j]) << ' ' << format_double(state.second.b[j]) << '\n';
}

void save_state(const std::string& path, const NetworkState& state, const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_state: cannot open " + path);
  write_state(out, state, comments);
  if (!out) throw std::runtime_error("save_state: write failed for " + path);
}

NetworkState read_state(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line)) throw std::runtime_error("read_state: missing header");
  std::istringstream header(line);
  std::string magic, version;
  int d = 0, m1 = 0, m2 = 0;
  header >> magic >> version >> d >> m1 >> m2;
  if (!header || magic != kStateMagic) throw std::runtime_error("read_state: bad header '" + line + "'");
  if (version != "v" + std::to_string(kStateVersion))
    throw std::runtime_error("read_state: unsupported version " + version);
  if (d < 1 || m1 < 1 || m2 < 1) throw std::runtime_error("read_state: bad dimensions in header");

  Matrix first(m1, d);
  for (int i = 0; i < m1; ++i) {
    if (!next_data_line(in, line)) throw std::runtime_error("read_state: truncated first layer");
    const auto row = parse_row(line, static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) first(i, k) = row[static_cast<std::size_t>(k)];
  }
  Vector w2(m2), b2(m2);
  for (int j = 0; j < m2; ++j) {
    if (!next_data_line(in, line)) throw std::runtime_error("read_state: truncated second layer");
    const auto row = parse_row(line, 2);
    w2[j] = row[0];
    b2[j] = row[1];
  }
  if (next_data_line(in, line)) throw std::runtime_error("read_state: trailing data '" + line + "'");
  try {
    return make_state(std::move(first), std::move(w2), std::move(b2));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("read_state: ") + e.what());
  }
}

NetworkState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_state: cannot open " + path);
  return read_state(in);
}

}  // namespace mfd3
