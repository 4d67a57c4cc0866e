#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <sstream>

#include "mfnet/container.hpp"
#include "mfnet/finite_net.hpp"
#include "mfnet/mf_system.hpp"
#include "mfnet/rng.hpp"

using namespace mfnet;

namespace {

bool bit_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("format_double round-trips 17 significant digits") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(-0.0) == "-0");
  double vals[] = {0.1,    1.0 / 3.0, -2.7182818284590452, 1e-308, 5e-324,
                   1e308,  -0.0,      123456789.123456789, 0.0};
  for (double v : vals) {
    double back = std::strtod(format_double(v).c_str(), nullptr);
    CHECK(bit_equal(back, v));
  }
}

TEST_CASE("container round-trips meta and records bitwise") {
  TextContainer c;
  c.set_meta("kind", "demo");
  c.set_meta("note", "two words here");
  Matrix m(3, 4);
  CounterRng r = CounterRng::from_seed(5);
  for (size_t i = 0; i < m.a.size(); ++i) m.a[i] = r.normal(i) * std::pow(10.0, (int(i) % 9) - 4);
  m.a[0] = -0.0;
  m.a[1] = 5e-324;
  c.add_record("weights", m);
  Matrix empty_wide(1, 1);
  empty_wide.fill(1e308);
  c.add_record("edge", empty_wide);

  std::ostringstream os;
  c.write(os);
  std::istringstream is(os.str());
  TextContainer back = TextContainer::read(is);

  CHECK(back.get_meta("kind") == "demo");
  CHECK(back.get_meta("note") == "two words here");
  REQUIRE(back.has_record("weights"));
  const Matrix& w = back.record("weights");
  REQUIRE(w.rows == 3);
  REQUIRE(w.cols == 4);
  for (size_t i = 0; i < m.a.size(); ++i) CHECK(bit_equal(w.a[i], m.a[i]));
  CHECK(back.record("edge").a[0] == 1e308);

  // A second write of the parsed container is byte-identical.
  std::ostringstream os2;
  back.write(os2);
  CHECK(os.str() == os2.str());
}

TEST_CASE("container rejects duplicates and malformed input") {
  TextContainer c;
  c.add_record("a", Matrix(1, 1));
  CHECK_THROWS_AS(c.add_record("a", Matrix(1, 1)), ConfigError);
  CHECK_THROWS_AS(c.record("missing"), ConfigError);
  CHECK_THROWS_AS(c.get_meta("missing"), ConfigError);

  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return TextContainer::read(is);
  };
  CHECK_THROWS_AS(parse("wrong 1\nend\n"), ConfigError);
  CHECK_THROWS_AS(parse("mfnl 2\nend\n"), ConfigError);
  CHECK_THROWS_AS(parse("mfnl 1\nrecord a 2 2\n1 2\n"), ConfigError);       // truncated
  CHECK_THROWS_AS(parse("mfnl 1\nrecord a 1 2\n1 2 3\nend\n"), ConfigError);  // excess
  CHECK_THROWS_AS(parse("mfnl 1\nrecord a 1 1\nnope\nend\n"), ConfigError);
  CHECK_THROWS_AS(parse("mfnl 1\nrecord a 1 1\n1\n"), ConfigError);  // missing end
}

TEST_CASE("weight records round-trip through a container") {
  NetworkArch arch;
  arch.L = 3;
  arch.d = 2;
  arch.widths = {4, 3, 1};
  WeightMatrices w = WeightMatrices::zeros(arch.view());
  CounterRng r = CounterRng::from_seed(1);
  uint64_t ctr = 0;
  for (Matrix& m : w.mats)
    for (double& v : m.a) v = r.normal(ctr++);

  TextContainer c;
  weights_to_records(c, "snap/", w);
  WeightMatrices back = weights_from_records(c, "snap/", 3);
  REQUIRE(back.mats.size() == w.mats.size());
  for (size_t i = 0; i < w.mats.size(); ++i) CHECK(max_abs_diff(back.mats[i], w.mats[i]) == 0.0);
}

TEST_CASE("trajectory containers keep grid and checkpoints") {
  MfTrajectory traj;
  traj.counts = {3, 2, 1};
  traj.d = 2;
  traj.hidden = ActKind::Tanh;
  traj.output = ActKind::Identity;
  traj.scheme = Scheme::Rk4;
  traj.h = 0.25;
  traj.steps = 4;
  traj.checkpoint_every = 2;
  ArchView view{3, 2, traj.counts};
  CounterRng r = CounterRng::from_seed(8);
  uint64_t ctr = 0;
  for (long s : {0L, 2L, 4L}) {
    Checkpoint ck;
    ck.step = s;
    ck.t = static_cast<double>(s) * traj.h;
    ck.w = WeightMatrices::zeros(view);
    for (Matrix& m : ck.w.mats)
      for (double& v : m.a) v = r.normal(ctr++);
    traj.checkpoints.push_back(std::move(ck));
  }

  TextContainer c = trajectory_to_container(traj);
  MfTrajectory back = trajectory_from_container(c);
  CHECK(back.counts == traj.counts);
  CHECK(back.d == traj.d);
  CHECK(back.scheme == traj.scheme);
  CHECK(back.h == traj.h);
  CHECK(back.steps == traj.steps);
  CHECK(back.checkpoint_every == traj.checkpoint_every);
  REQUIRE(back.checkpoints.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.checkpoints[i].step == traj.checkpoints[i].step);
    CHECK(back.checkpoints[i].t == traj.checkpoints[i].t);
    for (size_t l = 0; l < 3; ++l)
      CHECK(max_abs_diff(back.checkpoints[i].w.mats[l], traj.checkpoints[i].w.mats[l]) == 0.0);
  }
  CHECK(back.at_step(2).t == 0.5);
  CHECK(back.has_step(4));
  CHECK_FALSE(back.has_step(3));
}
