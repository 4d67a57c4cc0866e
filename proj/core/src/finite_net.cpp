#include "mfnet/finite_net.hpp"

#include <cmath>

#include "mfnet/stepper.hpp"

namespace mfnet {

FiniteWeights FiniteWeights::zeros(NetworkArch arch, ActivationStack acts) {
  arch.validate();
  if (acts.depth() != arch.L) throw ShapeError("FiniteWeights: activation stack depth != L");
  FiniteWeights net;
  net.w = WeightMatrices::zeros(arch.view());
  net.arch = std::move(arch);
  net.acts = std::move(acts);
  return net;
}

void FiniteWeights::validate() const {
  arch.validate();
  if (acts.depth() != arch.L) throw ShapeError("FiniteWeights: activation stack depth != L");
  w.check_shapes(arch.view());
}

double forward_finite(const FiniteWeights& net, const std::vector<double>& x, ForwardPass& pass,
                      NetWorkspace& ws) {
  forward_pass(net.arch.view(), net.w, net.acts, x, pass, ws);
  return pass.yhat;
}

double forward_finite(const FiniteWeights& net, const std::vector<double>& x) {
  NetWorkspace ws;
  ws.prepare(net.arch.view());
  forward_pass(net.arch.view(), net.w, net.acts, x, ws.fwd, ws);
  return ws.fwd.yhat;
}

FinitePass backward_finite(const FiniteWeights& net, const Sample& sample, const LossSpec& loss) {
  ArchView arch = net.arch.view();
  FinitePass pass;
  pass.fwd.prepare(arch);
  pass.bwd.prepare(arch);
  pass.dw = GradSet::zeros(arch);
  NetWorkspace ws;
  ws.prepare(arch);
  forward_pass(arch, net.w, net.acts, sample.x, pass.fwd, ws);
  backward_pass(arch, net.w, net.acts, sample.y, loss, pass.fwd, pass.bwd);
  accumulate_weight_grad(arch, sample.x, pass.fwd, pass.bwd, pass.dw);
  return pass;
}

namespace {

void apply_update(FiniteWeights& net, const GradSet& dir, const ScheduleSpec& schedules,
                  double eps, long k) {
  const double t = static_cast<double>(k) * eps;
  for (int ell = 1; ell <= net.arch.L; ++ell) {
    const double xi = eval_schedule(schedules, ell, t);
    Matrix& w = net.w.layer(ell);
    const Matrix& g = dir.layer(ell);
    for (size_t e = 0; e < w.a.size(); ++e) w.a[e] = w.a[e] - eps * (xi * g.a[e]);
  }
  if (!net.w.all_finite())
    throw OverflowError(k + 1, static_cast<double>(k + 1) * eps,
                        "finite training: weights became non-finite");
}

}  // namespace

void sgd_step(FiniteWeights& net, const Sample& sample, const LossSpec& loss,
              const ScheduleSpec& schedules, double eps, long k) {
  if (schedules.depth() != net.arch.L) throw ShapeError("sgd_step: schedule depth != L");
  if (!(eps > 0.0)) throw ConfigError("sgd_step: eps must be positive");
  FinitePass pass = backward_finite(net, sample, loss);
  apply_update(net, pass.dw, schedules, eps, k);
}

void full_batch_step(FiniteWeights& net, std::span<const Sample> panel, const LossSpec& loss,
                     const ScheduleSpec& schedules, double eps, long k,
                     const ExecContext& exec) {
  if (schedules.depth() != net.arch.L) throw ShapeError("full_batch_step: schedule depth != L");
  if (!(eps > 0.0)) throw ConfigError("full_batch_step: eps must be positive");
  GradSet avg;
  average_weight_grad(net.arch.view(), net.w, net.acts, loss, panel, avg, exec);
  apply_update(net, avg, schedules, eps, k);
}

const WeightSnapshot& TrainLog::at_step(long step) const {
  for (const WeightSnapshot& s : snapshots)
    if (s.step == step) return s;
  throw RangeError("TrainLog: no snapshot at step " + std::to_string(step));
}

TrainLog train_finite(FiniteWeights& net, const DataModel& data, const LossSpec& loss,
                      const ScheduleSpec& schedules, double eps, long steps, long log_every,
                      const CounterRng& rng, TrainMode mode, std::span<const Sample> panel,
                      const ExecContext& exec) {
  if (steps < 0) throw ConfigError("train_finite: negative step count");
  if (log_every < 1) throw ConfigError("train_finite: log_every must be >= 1");
  if (mode == TrainMode::FullBatch && panel.empty())
    throw ConfigError("train_finite: full-batch mode needs a panel");
  net.validate();

  TrainLog log;
  log.snapshots.push_back({0, 0.0, net.w});
  for (long k = 0; k < steps; ++k) {
    if (mode == TrainMode::Sgd) {
      Sample s = draw_sample(data, rng, static_cast<uint64_t>(k));
      sgd_step(net, s, loss, schedules, eps, k);
    } else {
      full_batch_step(net, panel, loss, schedules, eps, k, exec);
    }
    long done = k + 1;
    if (done % log_every == 0 || done == steps)
      log.snapshots.push_back({done, static_cast<double>(done) * eps, net.w});
  }
  if (log.snapshots.back().step != steps)
    log.snapshots.push_back({steps, static_cast<double>(steps) * eps, net.w});

  std::span<const Sample> eval_panel = panel;
  std::vector<Sample> fallback;
  if (eval_panel.empty()) {
    fallback = make_panel(data, 256, rng.child(0xEuLL));
    eval_panel = fallback;
  }
  log.final_loss =
      average_loss(net.arch.view(), net.w, net.acts, loss, eval_panel, exec);
  return log;
}

}  // namespace mfnet
