#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mfnet/diagnostics.hpp"
#include "mfnet/finite_net.hpp"

using namespace mfnet;

namespace {

FiniteWeights hand_instance() {
  NetworkArch arch;
  arch.L = 2;
  arch.d = 1;
  arch.widths = {2, 1};
  FiniteWeights net =
      FiniteWeights::zeros(arch, ActivationStack::make(2, ActKind::Tanh, ActKind::Identity));
  net.w.layer(1).at(0, 0) = 1.0;
  net.w.layer(1).at(1, 0) = -1.0;
  net.w.layer(2).at(0, 0) = 3.0;
  net.w.layer(2).at(1, 0) = 1.0;
  return net;
}

WeightMatrices copy_weights(const FiniteWeights& net) { return net.w; }

double weights_distance(const WeightMatrices& a, const WeightMatrices& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.mats.size(); ++i) m = std::max(m, max_abs_diff(a.mats[i], b.mats[i]));
  return m;
}

}  // namespace

TEST_CASE("zero schedule leaves weights untouched") {
  FiniteWeights net = hand_instance();
  WeightMatrices before = copy_weights(net);
  ScheduleSpec off = ScheduleSpec::uniform(2, ScheduleForm::constant(0.0));
  sgd_step(net, Sample{{1.0}, -5.0}, LossSpec::huber(1.0), off, 0.5, 0);
  CHECK(weights_distance(net.w, before) == 0.0);
}

TEST_CASE("zero loss slope leaves weights untouched") {
  FiniteWeights net = hand_instance();
  double yhat = forward_finite(net, {1.0});
  WeightMatrices before = copy_weights(net);
  ScheduleSpec one = ScheduleSpec::uniform(2, ScheduleForm::constant(1.0));
  sgd_step(net, Sample{{1.0}, yhat}, LossSpec::huber(1.0), one, 0.5, 0);
  CHECK(weights_distance(net.w, before) == 0.0);
}

TEST_CASE("hand-checked stochastic update") {
  FiniteWeights net = hand_instance();
  ScheduleSpec one = ScheduleSpec::uniform(2, ScheduleForm::constant(1.0));
  // Huber in the linear branch gives unit slope at this sample.
  sgd_step(net, Sample{{1.0}, -5.0}, LossSpec::huber(1.0), one, 0.1, 0);
  CHECK(net.w.layer(2).at(0, 0) ==
        doctest::Approx(3.0 - 0.1 * std::tanh(1.0)).epsilon(1e-15));
  CHECK(net.w.layer(2).at(0, 0) == doctest::Approx(2.9238405844044235).epsilon(1e-14));
}

TEST_CASE("training for zero steps returns the initial state") {
  FiniteWeights net = hand_instance();
  WeightMatrices before = copy_weights(net);
  DataModel data = DataModel::finite({Sample{{1.0}, 0.0}});
  ScheduleSpec one = ScheduleSpec::uniform(2, ScheduleForm::constant(1.0));
  CounterRng rng = CounterRng::from_seed(4);
  std::vector<Sample> panel = make_panel(data, 8, rng.child(1));
  TrainLog log = train_finite(net, data, LossSpec::huber(1.0), one, 0.1, 0, 1, rng,
                              TrainMode::Sgd, panel, ExecContext{});
  REQUIRE(log.snapshots.size() == 1);
  CHECK(log.snapshots[0].step == 0);
  CHECK(weights_distance(log.snapshots[0].w, before) == 0.0);
  CHECK(weights_distance(net.w, before) == 0.0);
}

TEST_CASE("identical seeds give bitwise identical runs") {
  Teacher teacher{TeacherKind::TanhLinear, {2.0, -1.0}};
  DataModel data = DataModel::synthetic(2, teacher, 1.0, 0.05);
  ScheduleSpec sched = ScheduleSpec::uniform(3, ScheduleForm::exp_decay(1.0, 0.2));

  auto run = [&](uint64_t seed) {
    NetworkArch arch;
    arch.L = 3;
    arch.d = 2;
    arch.widths = {6, 5, 1};
    FiniteWeights net =
        FiniteWeights::zeros(arch, ActivationStack::make(3, ActKind::Tanh, ActKind::Identity));
    CounterRng wr = CounterRng::from_seed(77);
    uint64_t ctr = 0;
    for (Matrix& m : net.w.mats)
      for (double& v : m.a) v = 0.5 * wr.normal(ctr++);
    CounterRng rng = CounterRng::from_seed(seed);
    std::vector<Sample> panel = make_panel(data, 16, rng.child(9));
    train_finite(net, data, LossSpec::huber(1.0), sched, 1e-2, 50, 10, rng, TrainMode::Sgd,
                 panel, ExecContext{});
    return net.w;
  };

  WeightMatrices a = run(5);
  WeightMatrices b = run(5);
  WeightMatrices c = run(6);
  CHECK(weights_distance(a, b) == 0.0);
  CHECK(weights_distance(a, c) > 0.0);
}

TEST_CASE("gradient descent on one sample decreases its loss") {
  FiniteWeights net = hand_instance();
  Sample s{{0.5}, 0.8};
  DataModel data = DataModel::finite({s});
  ScheduleSpec one = ScheduleSpec::uniform(2, ScheduleForm::constant(1.0));
  LossSpec loss = LossSpec::huber(1.0);
  CounterRng rng = CounterRng::from_seed(1);
  std::vector<Sample> panel = make_panel(data, 1, rng.child(1));
  TrainLog log = train_finite(net, data, loss, one, 0.05, 100, 1, rng, TrainMode::Sgd, panel,
                              ExecContext{});
  REQUIRE(log.snapshots.size() == 101);
  double prev = std::numeric_limits<double>::infinity();
  for (const WeightSnapshot& snap : log.snapshots) {
    FiniteWeights at = net;
    at.w = snap.w;
    double value = eval_loss(loss, s.y, forward_finite(at, s.x)).value;
    CHECK(value <= prev + 1e-15);
    prev = value;
  }
  CHECK(log.final_loss == doctest::Approx(prev).epsilon(1e-12));
}

TEST_CASE("snapshot cadence includes both endpoints") {
  FiniteWeights net = hand_instance();
  DataModel data = DataModel::finite({Sample{{1.0}, 0.0}});
  ScheduleSpec one = ScheduleSpec::uniform(2, ScheduleForm::constant(1.0));
  CounterRng rng = CounterRng::from_seed(2);
  std::vector<Sample> panel = make_panel(data, 1, rng.child(1));
  TrainLog log = train_finite(net, data, LossSpec::huber(1.0), one, 1e-3, 25, 10, rng,
                              TrainMode::Sgd, panel, ExecContext{});
  REQUIRE(log.snapshots.size() == 4);  // steps 0, 10, 20, 25
  CHECK(log.snapshots[0].step == 0);
  CHECK(log.snapshots[1].step == 10);
  CHECK(log.snapshots[2].step == 20);
  CHECK(log.snapshots[3].step == 25);
  CHECK(log.at_step(20).time == doctest::Approx(0.02));
  CHECK_THROWS_AS(log.at_step(15), RangeError);
}

TEST_CASE("divergence raises an overflow error with step context") {
  NetworkArch arch;
  arch.L = 2;
  arch.d = 1;
  arch.widths = {1, 1};
  FiniteWeights net =
      FiniteWeights::zeros(arch, ActivationStack::make(2, ActKind::Identity, ActKind::Identity));
  net.w.layer(1).at(0, 0) = 2.0;
  net.w.layer(2).at(0, 0) = 2.0;
  ScheduleSpec one = ScheduleSpec::uniform(2, ScheduleForm::constant(1.0));
  Sample s{{1.0}, 0.0};
  // Half-squared loss on an identity chain: a huge rate amplifies the
  // weights geometrically until they leave the finite range.
  bool threw = false;
  try {
    for (long k = 0; k < 10000; ++k) sgd_step(net, s, LossSpec::half_squared(), one, 1e6, k);
  } catch (const OverflowError& e) {
    threw = true;
    CHECK(e.step >= 1);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  CHECK(threw);
}
