#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mfnet/activation.hpp"
#include "mfnet/loss.hpp"
#include "mfnet/matrix.hpp"
#include "mfnet/reduce.hpp"
#include "mfnet/rng.hpp"
#include "mfnet/schedule.hpp"

using namespace mfnet;

TEST_CASE("counter rng is a pure function of key and counter") {
  CounterRng a = CounterRng::from_seed(42);
  CounterRng b = CounterRng::from_seed(42);
  for (uint64_t k = 0; k < 64; ++k) CHECK(a.bits(k) == b.bits(k));
  CHECK(a.bits(0) != CounterRng::from_seed(43).bits(0));
  CHECK(a.child(1).bits(0) != a.child(2).bits(0));
  CHECK(a.child(1).bits(0) == b.child(1).bits(0));
}

TEST_CASE("u01 stays strictly inside the unit interval") {
  CounterRng r = CounterRng::from_seed(7);
  for (uint64_t k = 0; k < 10000; ++k) {
    double u = r.u01(k);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("inverse normal cdf hits reference quantiles") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  // Classic two-sided 95% quantile.
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.1586552539314571) ==
        doctest::Approx(-1.0).epsilon(1e-12));  // Phi(-1)
  CHECK(inverse_normal_cdf(0.25) == -inverse_normal_cdf(0.75));
}

TEST_CASE("normal stream has standard moments at sampling accuracy") {
  CounterRng r = CounterRng::from_seed(11);
  const int n = 100000;
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    double z = r.normal(static_cast<uint64_t>(k));
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::fabs(s1 / n) < 0.02);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("radical inverse and halton bases") {
  CHECK(radical_inverse(0, 2) == 0.0);
  CHECK(radical_inverse(1, 2) == 0.5);
  CHECK(radical_inverse(2, 2) == 0.25);
  CHECK(radical_inverse(3, 2) == 0.75);
  CHECK(radical_inverse(1, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(halton_base(0) == 2);
  CHECK(halton_base(1) == 3);
  CHECK(halton_base(63) == 311);
  CHECK_THROWS_AS(halton_base(64), DomainError);
  CHECK_THROWS_AS(halton_base(-1), DomainError);
}

TEST_CASE("pairwise sum matches closed forms") {
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(pairwise_sum(v) == 1000.0 * 1001.0 / 2.0);
  CHECK(pairwise_sum(v.data(), 0) == 0.0);
  std::vector<double> ones(777, 1.0);
  CHECK(pairwise_sum(ones) == 777.0);
}

TEST_CASE("pairwise dot matches hand values and the sum tree") {
  std::vector<double> a(100), b(100), prod(100);
  CounterRng r = CounterRng::from_seed(3);
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = r.normal(i);
    b[i] = r.normal(1000 + i);
    prod[i] = a[i] * b[i];
  }
  // Same tree shape: dot must equal the pairwise sum of the products, bitwise.
  CHECK(pairwise_dot(a.data(), b.data(), a.size()) == pairwise_sum(prod));
}

TEST_CASE("block tree reduction is independent of the thread fan-out") {
  const size_t n = 1234;
  std::vector<double> v(n);
  CounterRng r = CounterRng::from_seed(9);
  for (size_t i = 0; i < n; ++i) v[i] = r.normal(i) * 1e3;

  auto run = [&](int threads) {
    double out = 0.0;
    block_tree_reduce(
        n, out,
        [&](size_t lo, size_t hi, double& acc) {
          acc = v[lo];
          for (size_t i = lo + 1; i < hi; ++i) acc += v[i];
        },
        [](double& into, const double& from) { into += from; },
        []() { return 0.0; }, ExecContext{threads, true});
    return out;
  };
  double base = run(1);
  CHECK(run(2) == base);
  CHECK(run(4) == base);
  CHECK(run(8) == base);
}

TEST_CASE("activation values at pinned points") {
  ActivationSpec tanh_h{ActKind::Tanh, ActRole::Hidden};
  ActivationSpec ident_o{ActKind::Identity, ActRole::Output};
  ActivationSpec logi_h{ActKind::Logistic, ActRole::Hidden};

  ActValue v0 = eval_activation(tanh_h, 0.0);
  CHECK(v0.value == 0.0);
  CHECK(v0.deriv == 1.0);

  ActValue vi = eval_activation(ident_o, 3.5);
  CHECK(vi.value == 3.5);
  CHECK(vi.deriv == 1.0);

  ActValue v1 = eval_activation(tanh_h, 1.0);
  CHECK(v1.value == doctest::Approx(0.7615941559557649).epsilon(1e-15));
  CHECK(v1.deriv == doctest::Approx(0.41997434161402614).epsilon(1e-14));

  ActValue l0 = eval_activation(logi_h, 0.0);
  CHECK(l0.value == 0.5);
  CHECK(l0.deriv == 0.25);

  // Saturation is overflow-safe.
  CHECK(std::isfinite(eval_activation(logi_h, 1000.0).value));
  CHECK(std::isfinite(eval_activation(logi_h, -1000.0).value));
  CHECK(eval_activation(logi_h, 1000.0).value == 1.0);
}

TEST_CASE("activation conformance scan") {
  ActScanReport tanh_h = scan_activation({ActKind::Tanh, ActRole::Hidden});
  CHECK(tanh_h.conforming);
  CHECK(tanh_h.value_bound <= 1.0);
  CHECK(tanh_h.deriv_bound <= 1.0);

  ActScanReport logi_h = scan_activation({ActKind::Logistic, ActRole::Hidden});
  CHECK(logi_h.conforming);

  ActScanReport ident_o = scan_activation({ActKind::Identity, ActRole::Output});
  CHECK(ident_o.conforming);
  CHECK(ident_o.deriv_min_abs == 1.0);

  // tanh saturates: its derivative vanishes on the tails of the grid, so it
  // cannot serve as the output nonlinearity.
  ActScanReport tanh_o = scan_activation({ActKind::Tanh, ActRole::Output});
  CHECK_FALSE(tanh_o.conforming);
  CHECK(tanh_o.deriv_min_abs == 0.0);
}

TEST_CASE("activation names round-trip") {
  CHECK(act_kind_from_name(act_kind_name(ActKind::Tanh)) == ActKind::Tanh);
  CHECK(act_kind_from_name(act_kind_name(ActKind::Logistic)) == ActKind::Logistic);
  CHECK(act_kind_from_name(act_kind_name(ActKind::Identity)) == ActKind::Identity);
  CHECK_THROWS_AS(act_kind_from_name("relu"), ConfigError);
}

TEST_CASE("loss values at pinned points") {
  LossSpec h1 = LossSpec::huber(1.0);
  LossValue at_target = eval_loss(h1, 2.0, 2.0);
  CHECK(at_target.value == 0.0);
  CHECK(at_target.d2 == 0.0);

  LossValue lin = eval_loss(h1, 0.0, 3.0);  // linear branch
  CHECK(lin.value == 2.5);
  CHECK(lin.d2 == 1.0);
  LossValue lin_neg = eval_loss(h1, 0.0, -3.0);
  CHECK(lin_neg.value == 2.5);
  CHECK(lin_neg.d2 == -1.0);

  LossValue quad = eval_loss(h1, 0.0, 0.5);  // quadratic branch
  CHECK(quad.value == 0.125);
  CHECK(quad.d2 == 0.5);

  LossSpec hs = LossSpec::half_squared();
  LossValue s = eval_loss(hs, 1.0, 0.0);
  CHECK(s.value == 0.5);
  CHECK(s.d2 == -1.0);

  LossSpec lg = LossSpec::logistic_nll();
  LossValue g = eval_loss(lg, 1.0, 0.0);
  CHECK(g.value == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(g.d2 == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(std::isfinite(eval_loss(lg, -1.0, 1000.0).value));
  CHECK(std::isfinite(eval_loss(lg, 1.0, -1000.0).value));
}

TEST_CASE("huber rejects non-positive widths") {
  CHECK_THROWS_AS(LossSpec::huber(0.0), ConfigError);
  CHECK_THROWS_AS(LossSpec::huber(-1.0), ConfigError);
}

TEST_CASE("loss conformance scan flags the unbounded derivative") {
  CHECK(scan_loss(LossSpec::huber(1.0)).conforming);
  CHECK(scan_loss(LossSpec::logistic_nll()).conforming);
  // The half-squared loss has d2 growing linearly in the prediction, so the
  // bounded-derivative contract fails on a widening scan.
  CHECK_FALSE(scan_loss(LossSpec::half_squared()).conforming);
}

TEST_CASE("schedule forms at pinned points") {
  ScheduleForm one = ScheduleForm::constant(1.0);
  CHECK(eval_schedule_form(one, 7.3) == 1.0);

  ScheduleForm e = ScheduleForm::exp_decay(2.0, 0.5);
  CHECK(eval_schedule_form(e, 0.0) == 2.0);
  CHECK(eval_schedule_form(e, 2.0) == doctest::Approx(0.7357588823428847).epsilon(1e-15));

  ScheduleForm pw = ScheduleForm::piecewise_linear({0.0, 1.0, 2.0}, {0.0, 2.0, 0.0});
  CHECK(eval_schedule_form(pw, 0.5) == 1.0);
  CHECK(eval_schedule_form(pw, 1.0) == 2.0);
  CHECK(eval_schedule_form(pw, 5.0) == 0.0);  // clamped at the last knot

  CHECK_THROWS_AS(eval_schedule_form(one, -0.1), DomainError);
  CHECK_THROWS_AS(ScheduleForm::piecewise_linear({0.5, 1.0}, {1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(ScheduleForm::piecewise_linear({0.0, 0.0}, {1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(ScheduleForm::piecewise_linear({0.0}, {1.0, 2.0}), ConfigError);
}

TEST_CASE("schedule bounds are closed form") {
  ScheduleBounds c = schedule_bounds(ScheduleForm::constant(3.0), 10.0);
  CHECK(c.bound == 3.0);
  CHECK(c.lipschitz == 0.0);

  ScheduleBounds e = schedule_bounds(ScheduleForm::exp_decay(2.0, 0.5), 4.0);
  CHECK(e.bound == 2.0);
  CHECK(e.lipschitz == 1.0);

  ScheduleBounds pw =
      schedule_bounds(ScheduleForm::piecewise_linear({0.0, 1.0, 3.0}, {0.0, 2.0, 1.0}), 3.0);
  CHECK(pw.bound == 2.0);
  CHECK(pw.lipschitz == 2.0);
}

TEST_CASE("per-layer schedule stack") {
  ScheduleSpec s = ScheduleSpec::uniform(3, ScheduleForm::constant(1.0));
  CHECK(s.depth() == 3);
  CHECK(s.layer_is_unit(3));
  s.layers[2] = ScheduleForm::exp_decay(1.0, 0.1);
  CHECK_FALSE(s.layer_is_unit(3));
  CHECK(eval_schedule(s, 1, 0.5) == 1.0);
  CHECK_THROWS_AS(eval_schedule(s, 4, 0.0), ShapeError);
}

TEST_CASE("matrix shape guards") {
  Matrix a(2, 3), b(3, 2);
  a.fill(1.0);
  b.fill(1.0);
  CHECK_THROWS_AS(max_abs_diff(a, b), ShapeError);
  Matrix c(2, 3);
  c.fill(1.5);
  CHECK(max_abs_diff(a, c) == 0.5);
  CHECK(mean_abs_diff(a, c) == 0.5);
  CHECK(a.all_finite());
  c.at(1, 2) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(c.all_finite());
}
