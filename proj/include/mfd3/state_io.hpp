// Text serialisation of a NetworkState:
//
//   # optional comment lines
//   mfd3-state v1 <d> <m1> <m2>
//   <m1 rows of d first-layer coordinates>
//   <m2 rows "w2 b2">
//
// Values are written with 17 significant digits, so a round trip is exact.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mfd3/network.hpp"

namespace mfd3 {

inline constexpr const char* kStateMagic = "mfd3-state";
inline constexpr int kStateVersion = 1;

void write_state(std::ostream& out, const NetworkState& state,
                 const std::vector<std::string>& comments = {});
void save_state(const std::string& path, const NetworkState& state,
                const std::vector<std::string>& comments = {});

/// Throws std::runtime_error on a malformed stream.
NetworkState read_state(std::istream& in);
NetworkState load_state(const std::string& path);

}  // namespace mfd3
