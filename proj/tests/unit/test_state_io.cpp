#include <sstream>

#include "doctest.h"
#include "mfd3/dynamics.hpp"
#include "mfd3/state_io.hpp"

using namespace mfd3;

TEST_SUITE("state_io") {

TEST_CASE("round trip is exact") {
  HyperParams hp = HyperParams::defaults(7);
  hp.m1 = 13;
  hp.m2 = 5;
  hp.sigma2 = 0.3;
  Rng rng = make_stream(3, 0);
  const auto s = init_network(hp, rng);
  std::stringstream buf;
  write_state(buf, s, {"seed = 3", "note"});
  CHECK(buf.str().rfind("# seed = 3\n# note\nmfd3-state v1 7 13 5\n", 0) == 0);
  const auto back = read_state(buf);
  CHECK(back.d == 7);
  CHECK(back.first.weights == s.first.weights);
  CHECK(back.second.w == s.second.w);
  CHECK(back.second.b == s.second.b);
}

TEST_CASE("malformed streams are rejected") {
  for (const char* text : {"", "mfd3-state v2 1 1 1\n1\n1 1\n", "other v1 1 1 1\n1\n1 1\n",
                           "mfd3-state v1 2 1 1\n1\n1 1\n", "mfd3-state v1 1 1 1\nnan\n1 1\n",
                           "mfd3-state v1 1 1 1\n1\n1 1\nextra\n", "mfd3-state v1 1 0 1\n1 1\n"}) {
    CAPTURE(text);
    std::istringstream in(text);
    CHECK_THROWS_AS(read_state(in), std::runtime_error);
  }
  CHECK_THROWS_AS(load_state("/nonexistent/dir/x.state"), std::runtime_error);
}

}  // TEST_SUITE
