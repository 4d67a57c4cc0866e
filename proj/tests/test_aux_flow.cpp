#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfnet/aux_flow.hpp"
#include "mfnet/diagnostics.hpp"
#include "mfnet/embedding.hpp"

using namespace mfnet;

namespace {

struct Lab {
  ParticleSystem ps;
  std::vector<Sample> panel;
  LossSpec loss = LossSpec::huber(1.0);
  ScheduleSpec schedules;
};

Lab make_lab(std::vector<int> counts, int d, uint64_t seed, ScheduleForm form) {
  Lab lab;
  lab.ps = ParticleSystem::zeros(
      counts, d,
      ActivationStack::make(static_cast<int>(counts.size()), ActKind::Tanh, ActKind::Identity));
  CounterRng r = CounterRng::from_seed(seed);
  uint64_t ctr = 0;
  for (Matrix& m : lab.ps.w.mats)
    for (double& v : m.a) v = 0.8 * r.normal(ctr++);

  CounterRng pr = CounterRng::from_seed(seed ^ 0xFACEull);
  for (int i = 0; i < 12; ++i) {
    Sample s;
    s.x.resize(static_cast<size_t>(d));
    for (int c = 0; c < d; ++c)
      s.x[static_cast<size_t>(c)] = pr.normal(static_cast<uint64_t>(i * d + c));
    s.y = pr.normal(1000 + static_cast<uint64_t>(i));
    lab.panel.push_back(std::move(s));
  }
  lab.schedules = ScheduleSpec::uniform(static_cast<int>(counts.size()), form);
  return lab;
}

double pair_distance(const AuxPairState& a, const AuxPairState& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.left.size(); ++i) m = std::max(m, std::fabs(a.left[i] - b.left[i]));
  for (size_t i = 0; i < a.right.size(); ++i) m = std::max(m, std::fabs(a.right[i] - b.right[i]));
  return m;
}

AuxPairState random_pair(int layer, size_t nl, size_t nr, uint64_t seed) {
  AuxPairState p;
  p.layer = layer;
  p.left.resize(nl);
  p.right.resize(nr);
  CounterRng r = CounterRng::from_seed(seed);
  for (size_t i = 0; i < nl; ++i) p.left[i] = r.normal(i);
  for (size_t i = 0; i < nr; ++i) p.right[i] = r.normal(0x8000ull + i);
  return p;
}

}  // namespace

TEST_CASE("pair shape validation") {
  std::vector<int> counts{4, 3, 1};
  ArchView arch{3, 2, counts};
  AuxPairState ok1;
  ok1.layer = 1;
  ok1.left.assign(2, 0.0);   // input dim
  ok1.right.assign(3, 0.0);  // M_2
  CHECK_NOTHROW(validate_pair(ok1, arch));
  AuxPairState ok2;
  ok2.layer = 2;
  ok2.left.assign(4, 0.0);   // M_1
  ok2.right.assign(1, 0.0);  // M_3
  CHECK_NOTHROW(validate_pair(ok2, arch));

  AuxPairState bad = ok1;
  bad.left.assign(3, 0.0);
  CHECK_THROWS_AS(validate_pair(bad, arch), ShapeError);
  bad = ok2;
  bad.layer = 3;  // output layer has no pair
  CHECK_THROWS_AS(validate_pair(bad, arch), ShapeError);
}

TEST_CASE("zero schedules freeze the pairs in both directions") {
  Lab lab = make_lab({4, 3, 1}, 2, 3, ScheduleForm::constant(0.0));
  MfTrajectory traj = integrate_mf(lab.ps, lab.panel, lab.loss, lab.schedules, Scheme::Rk4, 0.05,
                                   10, 1, ExecContext{});
  AuxPairState probe = random_pair(1, 2, 3, 9);
  AuxPairState fwd =
      aux_flow(traj, lab.panel, lab.loss, lab.schedules, probe, FlowDirection::Forward,
               ExecContext{});
  AuxPairState rev =
      aux_flow(traj, lab.panel, lab.loss, lab.schedules, probe, FlowDirection::Reverse,
               ExecContext{});
  CHECK(pair_distance(fwd, probe) == 0.0);
  CHECK(pair_distance(rev, probe) == 0.0);
}

TEST_CASE("a particle's own pair follows its stored trajectory exactly") {
  Lab lab = make_lab({5, 4, 1}, 2, 13, ScheduleForm::constant(1.0));
  WeightMatrices w0 = lab.ps.w;
  MfTrajectory traj = integrate_mf(lab.ps, lab.panel, lab.loss, lab.schedules, Scheme::Rk4, 0.02,
                                   25, 25, ExecContext{});
  const WeightMatrices& wT = traj.at_step(25).w;

  // Layer-1 particle j: left = its input weights (row j of w1), right = its
  // outgoing column pattern (row j of w2).
  for (int j : {0, 3}) {
    AuxPairState probe;
    probe.layer = 1;
    probe.left.assign(w0.layer(1).row(j), w0.layer(1).row(j) + 2);
    probe.right.assign(w0.layer(2).row(j), w0.layer(2).row(j) + 4);
    AuxPairState out = aux_flow(traj, lab.panel, lab.loss, lab.schedules, probe,
                                FlowDirection::Forward, ExecContext{});
    AuxPairState want;
    want.layer = 1;
    want.left.assign(wT.layer(1).row(j), wT.layer(1).row(j) + 2);
    want.right.assign(wT.layer(2).row(j), wT.layer(2).row(j) + 4);
    CHECK(pair_distance(out, want) <= 1e-12);
  }

  // Layer-2 particle k: left = column k of w2, right = row k of w3.
  for (int k : {1, 2}) {
    AuxPairState probe;
    probe.layer = 2;
    for (int j = 0; j < 5; ++j) probe.left.push_back(w0.layer(2).at(j, k));
    probe.right.assign(w0.layer(3).row(k), w0.layer(3).row(k) + 1);
    AuxPairState out = aux_flow(traj, lab.panel, lab.loss, lab.schedules, probe,
                                FlowDirection::Forward, ExecContext{});
    AuxPairState want;
    want.layer = 2;
    for (int j = 0; j < 5; ++j) want.left.push_back(wT.layer(2).at(j, k));
    want.right.assign(wT.layer(3).row(k), wT.layer(3).row(k) + 1);
    CHECK(pair_distance(out, want) <= 1e-12);
  }
}

TEST_CASE("reverse then forward returns the probe") {
  Lab lab = make_lab({4, 4, 1}, 2, 23, ScheduleForm::exp_decay(3.0, 1.0));
  MfTrajectory traj = integrate_mf(lab.ps, lab.panel, lab.loss, lab.schedules, Scheme::Rk4, 0.01,
                                   50, 50, ExecContext{});
  std::vector<AuxPairState> probes;
  for (uint64_t q = 0; q < 4; ++q) probes.push_back(random_pair(1, 2, 4, 300 + q));
  for (uint64_t q = 0; q < 4; ++q) probes.push_back(random_pair(2, 4, 1, 400 + q));

  VecD errs = diversity_roundtrip(traj, lab.panel, lab.loss, lab.schedules, probes, ExecContext{});
  REQUIRE(errs.size() == probes.size());
  for (double e : errs) CHECK(e <= 1e-5);
}

TEST_CASE("round-trip error shrinks at fourth order in the step") {
  auto worst_err = [](double h, long steps) {
    Lab lab = make_lab({4, 4, 1}, 2, 29, ScheduleForm::exp_decay(4.0, 1.5));
    MfTrajectory traj = integrate_mf(lab.ps, lab.panel, lab.loss, lab.schedules, Scheme::Rk4, h,
                                     steps, steps, ExecContext{});
    std::vector<AuxPairState> probes;
    for (uint64_t q = 0; q < 3; ++q) probes.push_back(random_pair(1, 2, 4, 500 + q));
    for (uint64_t q = 0; q < 3; ++q) probes.push_back(random_pair(2, 4, 1, 600 + q));
    VecD errs =
        diversity_roundtrip(traj, lab.panel, lab.loss, lab.schedules, probes, ExecContext{});
    double w = 0.0;
    for (double e : errs) w = std::max(w, e);
    return w;
  };
  double coarse = worst_err(0.05, 20);
  double fine = worst_err(0.025, 40);
  CHECK(coarse > 0.0);
  // Fourth-order integrator: halving the step should cut the defect by
  // about 16; demand at least 4 to stay clear of constants.
  CHECK(fine <= coarse / 4.0);
}

TEST_CASE("forward flows are bitwise identical across thread counts") {
  Lab lab = make_lab({6, 5, 1}, 2, 37, ScheduleForm::constant(1.0));
  MfTrajectory traj = integrate_mf(lab.ps, lab.panel, lab.loss, lab.schedules, Scheme::Rk4, 0.02,
                                   10, 10, ExecContext{});
  std::vector<AuxPairState> probes;
  for (uint64_t q = 0; q < 3; ++q) probes.push_back(random_pair(1, 2, 5, 700 + q));
  auto run = [&](int threads) {
    return flow_pairs(traj, lab.panel, lab.loss, lab.schedules, probes, FlowDirection::Forward,
                      ExecContext{threads, true});
  };
  std::vector<AuxPairState> a = run(1);
  std::vector<AuxPairState> b = run(4);
  for (size_t i = 0; i < a.size(); ++i) CHECK(pair_distance(a[i], b[i]) == 0.0);
}

TEST_CASE("a forward flow against the wrong panel is rejected") {
  Lab lab = make_lab({4, 3, 1}, 2, 41, ScheduleForm::constant(1.0));
  MfTrajectory traj = integrate_mf(lab.ps, lab.panel, lab.loss, lab.schedules, Scheme::Rk4, 0.05,
                                   5, 5, ExecContext{});
  std::vector<Sample> wrong = lab.panel;
  wrong[0].y += 0.5;
  AuxPairState probe = random_pair(1, 2, 3, 800);
  CHECK_THROWS_AS(aux_flow(traj, wrong, lab.loss, lab.schedules, probe, FlowDirection::Forward,
                           ExecContext{}),
                  RangeError);
}
