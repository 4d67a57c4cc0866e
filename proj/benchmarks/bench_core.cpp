#include <benchmark/benchmark.h>

#include "mfnet/diagnostics.hpp"
#include "mfnet/embedding.hpp"
#include "mfnet/mf_system.hpp"
#include "mfnet/reduce.hpp"

namespace {

using namespace mfnet;

struct Fixture {
  NetworkArch arch;
  FiniteWeights net;
  std::vector<Sample> panel;
  LossSpec loss = LossSpec::huber(3.0);
  ScheduleSpec schedules;

  explicit Fixture(int width, int panel_n) {
    arch.L = 3;
    arch.d = 4;
    arch.widths = {width, width, 1};
    net = FiniteWeights::zeros(arch, ActivationStack::make(3, ActKind::Tanh, ActKind::Identity));
    CounterRng rng = CounterRng::from_seed(17);
    uint64_t ctr = 0;
    for (Matrix& m : net.w.mats)
      for (double& v : m.a) v = rng.normal(ctr++);
    Teacher t{TeacherKind::TanhLinear, {1.0, -0.5, 0.25, 0.0}};
    DataModel data = DataModel::synthetic(4, t, 1.0, 0.0);
    panel = make_panel(data, panel_n, rng.child(1));
    schedules = ScheduleSpec::uniform(3, ScheduleForm::constant(1.0));
  }
};

void BM_PairwiseSum(benchmark::State& state) {
  VecD v(static_cast<size_t>(state.range(0)));
  CounterRng rng = CounterRng::from_seed(3);
  for (size_t i = 0; i < v.size(); ++i) v[i] = rng.normal(i);
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_sum(v.data(), v.size()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PairwiseSum)->Arg(1 << 10)->Arg(1 << 16);

void BM_ForwardPass(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), 1);
  NetWorkspace ws;
  ws.prepare(f.arch.view());
  for (auto _ : state) {
    forward_pass(f.arch.view(), f.net.w, f.net.acts, f.panel[0].x, ws.fwd, ws);
    benchmark::DoNotOptimize(ws.fwd.yhat);
  }
}
BENCHMARK(BM_ForwardPass)->Arg(32)->Arg(128);

void BM_PanelDrift(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)), 64);
  GradSet g = GradSet::zeros(f.arch.view());
  ExecContext exec;
  for (auto _ : state) {
    drift_at(f.arch.view(), f.net.w, f.net.acts, f.panel, f.loss, f.schedules, 0.0, -1.0, g,
             exec);
    benchmark::DoNotOptimize(g.mats[0].a[0]);
  }
}
BENCHMARK(BM_PanelDrift)->Arg(32)->Arg(128);

void BM_EmbeddingEval(benchmark::State& state) {
  LatentSpace latent;
  latent.L = 3;
  latent.dims = {8, 8, 0};
  NeuronalEmbedding emb =
      build_embedding(EmbedScheme::Bidiverse, 3, 4, latent, 11, EmbedOptions{});
  CounterRng rng = CounterRng::from_seed(5);
  VecD cp(8), cc(8);
  for (int i = 0; i < 8; ++i) {
    cp[static_cast<size_t>(i)] = rng.normal(static_cast<uint64_t>(i));
    cc[static_cast<size_t>(i)] = rng.normal(static_cast<uint64_t>(100 + i));
  }
  for (auto _ : state) benchmark::DoNotOptimize(emb.eval_wi(2, cp, cc));
}
BENCHMARK(BM_EmbeddingEval);

}  // namespace

BENCHMARK_MAIN();
