#include "mfnet/mf_system.hpp"

#include <cmath>

namespace mfnet {

ParticleSystem ParticleSystem::zeros(std::vector<int> counts, int d, ActivationStack acts) {
  ParticleSystem ps;
  ps.counts = std::move(counts);
  ps.d = d;
  ps.acts = std::move(acts);
  ps.arch().validate();
  if (ps.acts.depth() != static_cast<int>(ps.counts.size()))
    throw ShapeError("ParticleSystem: activation stack depth != L");
  ps.w = WeightMatrices::zeros(ps.arch());
  return ps;
}

void ParticleSystem::validate() const {
  arch().validate();
  if (acts.depth() != static_cast<int>(counts.size()))
    throw ShapeError("ParticleSystem: activation stack depth != L");
  w.check_shapes(arch());
}

double forward_particles(const ParticleSystem& ps, const std::vector<double>& x) {
  NetWorkspace ws;
  ws.prepare(ps.arch());
  forward_pass(ps.arch(), ps.w, ps.acts, x, ws.fwd, ws);
  return ws.fwd.yhat;
}

void drift_at(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
              std::span<const Sample> panel, const LossSpec& loss,
              const ScheduleSpec& schedules, double t, double sign, GradSet& out,
              const ExecContext& exec) {
  average_weight_grad(arch, w, acts, loss, panel, out, exec);
  for (int ell = 1; ell <= arch.L; ++ell) {
    const double xi = eval_schedule(schedules, ell, t);
    Matrix& m = out.layer(ell);
    for (double& v : m.a) v = sign * (xi * v);
  }
}

void mf_drift(const ParticleSystem& ps, std::span<const Sample> panel, const LossSpec& loss,
              const ScheduleSpec& schedules, GradSet& out, const ExecContext& exec) {
  ps.validate();
  if (schedules.depth() != static_cast<int>(ps.counts.size()))
    throw ShapeError("mf_drift: schedule depth != L");
  drift_at(ps.arch(), ps.w, ps.acts, panel, loss, schedules, ps.t, -1.0, out, exec);
}

const Checkpoint& MfTrajectory::at_step(long step) const {
  for (const Checkpoint& c : checkpoints)
    if (c.step == step) return c;
  throw RangeError("MfTrajectory: no checkpoint at step " + std::to_string(step));
}

bool MfTrajectory::has_step(long step) const {
  for (const Checkpoint& c : checkpoints)
    if (c.step == step) return true;
  return false;
}

namespace {

void scale_state_add(WeightMatrices& out, const WeightMatrices& base, double c,
                     const GradSet& k) {
  for (size_t i = 0; i < out.mats.size(); ++i) {
    const size_t n = out.mats[i].a.size();
    for (size_t e = 0; e < n; ++e)
      out.mats[i].a[e] = stage_entry(base.mats[i].a[e], c, k.mats[i].a[e]);
  }
}

void rk4_combine(WeightMatrices& w, const GradSet& k1, const GradSet& k2, const GradSet& k3,
                 const GradSet& k4, double h) {
  for (size_t i = 0; i < w.mats.size(); ++i) {
    const size_t n = w.mats[i].a.size();
    for (size_t e = 0; e < n; ++e)
      w.mats[i].a[e] = rk4_entry(w.mats[i].a[e], k1.mats[i].a[e], k2.mats[i].a[e],
                                 k3.mats[i].a[e], k4.mats[i].a[e], h);
  }
}

void euler_combine(WeightMatrices& w, const GradSet& k1, double h) {
  for (size_t i = 0; i < w.mats.size(); ++i) {
    const size_t n = w.mats[i].a.size();
    for (size_t e = 0; e < n; ++e)
      w.mats[i].a[e] = euler_entry(w.mats[i].a[e], h, k1.mats[i].a[e]);
  }
}

}  // namespace

MfTrajectory integrate_mf(ParticleSystem& ps, std::span<const Sample> panel,
                          const LossSpec& loss, const ScheduleSpec& schedules, Scheme scheme,
                          double h, long steps, long checkpoint_every,
                          const ExecContext& exec) {
  ps.validate();
  if (schedules.depth() != static_cast<int>(ps.counts.size()))
    throw ShapeError("integrate_mf: schedule depth != L");
  if (!(h > 0.0)) throw ConfigError("integrate_mf: step size must be positive");
  if (steps < 0) throw ConfigError("integrate_mf: negative step count");
  if (checkpoint_every < 1) throw ConfigError("integrate_mf: checkpoint_every must be >= 1");
  if (ps.t != 0.0) throw ConfigError("integrate_mf: system clock must start at 0");

  const ArchView arch = ps.arch();
  MfTrajectory traj;
  traj.counts = ps.counts;
  traj.d = ps.d;
  traj.hidden = ps.acts.layer(1).kind;
  traj.output = ps.acts.layer(arch.L).kind;
  traj.scheme = scheme;
  traj.h = h;
  traj.steps = steps;
  traj.checkpoint_every = checkpoint_every;
  traj.checkpoints.push_back({0, 0.0, ps.w});

  GradSet k1 = GradSet::zeros(arch);
  GradSet k2 = GradSet::zeros(arch);
  GradSet k3 = GradSet::zeros(arch);
  GradSet k4 = GradSet::zeros(arch);
  WeightMatrices stage = ps.w;

  for (long m = 0; m < steps; ++m) {
    const double t = static_cast<double>(m) * h;
    if (scheme == Scheme::Euler) {
      drift_at(arch, ps.w, ps.acts, panel, loss, schedules, t, -1.0, k1, exec);
      euler_combine(ps.w, k1, h);
    } else {
      drift_at(arch, ps.w, ps.acts, panel, loss, schedules, t, -1.0, k1, exec);
      scale_state_add(stage, ps.w, 0.5 * h, k1);
      drift_at(arch, stage, ps.acts, panel, loss, schedules, t + 0.5 * h, -1.0, k2, exec);
      scale_state_add(stage, ps.w, 0.5 * h, k2);
      drift_at(arch, stage, ps.acts, panel, loss, schedules, t + 0.5 * h, -1.0, k3, exec);
      scale_state_add(stage, ps.w, h, k3);
      drift_at(arch, stage, ps.acts, panel, loss, schedules, t + h, -1.0, k4, exec);
      rk4_combine(ps.w, k1, k2, k3, k4, h);
    }
    ps.t = static_cast<double>(m + 1) * h;
    if (!ps.w.all_finite())
      throw OverflowError(m + 1, ps.t, "mean-field integration: state became non-finite");
    if ((m + 1) % checkpoint_every == 0 || m + 1 == steps)
      traj.checkpoints.push_back({m + 1, ps.t, ps.w});
  }
  if (traj.checkpoints.back().step != steps)
    traj.checkpoints.push_back({steps, ps.t, ps.w});
  return traj;
}

WeightMatrices restrict_weights(const WeightMatrices& w, const ArchView& from,
                                std::span<const int> to_widths) {
  if (static_cast<int>(to_widths.size()) != from.L)
    throw ShapeError("restrict_weights: width list size != L");
  for (int ell = 1; ell <= from.L; ++ell) {
    int n = to_widths[static_cast<size_t>(ell) - 1];
    if (n < 1 || n > from.width(ell))
      throw ShapeError("restrict_weights: target widths must be within the source");
  }
  ArchView to{from.L, from.d, to_widths};
  WeightMatrices out = WeightMatrices::zeros(to);
  for (int ell = 1; ell <= from.L; ++ell) {
    const Matrix& src = w.layer(ell);
    Matrix& dst = out.layer(ell);
    for (int r = 0; r < dst.rows; ++r)
      for (int c = 0; c < dst.cols; ++c) dst.at(r, c) = src.at(r, c);
  }
  return out;
}

}  // namespace mfnet
