#include "mfnet/aux_flow.hpp"

#include <cmath>

#include "mfnet/reduce.hpp"
#include "mfnet/stepper.hpp"

namespace mfnet {

void validate_pair(const AuxPairState& p, const ArchView& arch) {
  if (p.layer < 1 || p.layer > arch.L - 1)
    throw ShapeError("aux pair: layer must lie in 1..L-1");
  size_t want_left = p.layer == 1 ? static_cast<size_t>(arch.d)
                                  : static_cast<size_t>(arch.width(p.layer - 1));
  size_t want_right = static_cast<size_t>(arch.width(p.layer + 1));
  if (p.left.size() != want_left) throw ShapeError("aux pair: left component size mismatch");
  if (p.right.size() != want_right) throw ShapeError("aux pair: right component size mismatch");
}

namespace {

struct PairVec {
  VecD left;
  VecD right;
};

/// Block-tree accumulator for one stage: the background weight gradient
/// plus the per-pair increments, all summed over the same sample blocks.
struct StageAcc {
  GradSet g;
  std::vector<PairVec> pairs;
  NetWorkspace ws;
};

/// Per-sample pair increments.  Every expression here mirrors, operand
/// order included, what forward_pass / backward_pass / accumulate_weight_grad
/// compute for the weight entry the pair component shadows; that is what
/// makes pairs started at actual weight columns track them bit for bit.
void accumulate_pair(const ArchView& arch, const ActivationStack& acts,
                     const std::vector<double>& x, const ForwardPass& fwd,
                     const BackwardPass& bwd, const AuxPairState& state, PairVec& into) {
  const int i = state.layer;
  const VecD& up = bwd.dH[static_cast<size_t>(i)];  // layer i+1 sensitivities
  const double fan_up = static_cast<double>(arch.width(i + 1));

  double hval;
  if (i == 1) {
    hval = pairwise_dot(state.left.data(), x.data(), x.size());
  } else {
    const VecD& prev = fwd.actv[static_cast<size_t>(i) - 2];
    double s = pairwise_dot(state.left.data(), prev.data(), prev.size());
    hval = s / static_cast<double>(arch.width(i - 1));
  }
  ActValue av = eval_activation(acts.layer(i), hval);

  double dot = pairwise_dot(up.data(), state.right.data(), up.size());
  double delta = (dot / fan_up) * av.deriv;

  if (i == 1) {
    for (size_t c = 0; c < x.size(); ++c) into.left[c] += delta * x[c];
  } else {
    const VecD& prev = fwd.actv[static_cast<size_t>(i) - 2];
    for (size_t c = 0; c < prev.size(); ++c) into.left[c] += delta * prev[c];
  }
  for (size_t c = 0; c < up.size(); ++c) into.right[c] += up[c] * av.value;
}

struct FusedSlopes {
  GradSet bg;                // background drift
  std::vector<PairVec> pk;   // pair slopes
};

/// Drift of background and pairs at one stage.  The background part runs
/// the exact arithmetic of drift_at (same per-sample calls, same reduction
/// tree, same scaling), with the pair sums riding along on the same blocks.
void fused_stage_eval(const ArchView& arch, const WeightMatrices& B,
                      const ActivationStack& acts, std::span<const Sample> panel,
                      const LossSpec& loss, const ScheduleSpec& schedules, double t_phys,
                      double sign, const std::vector<AuxPairState>& states, FusedSlopes& out,
                      const ExecContext& exec) {
  const size_t np = states.size();

  auto make = [&]() {
    StageAcc a;
    a.g = GradSet::zeros(arch);
    a.pairs.resize(np);
    for (size_t p = 0; p < np; ++p) {
      a.pairs[p].left.assign(states[p].left.size(), 0.0);
      a.pairs[p].right.assign(states[p].right.size(), 0.0);
    }
    a.ws.prepare(arch);
    return a;
  };
  auto eval_leaf = [&](size_t lo, size_t hi, StageAcc& acc) {
    acc.g.set_zero();
    for (size_t p = 0; p < np; ++p) {
      std::fill(acc.pairs[p].left.begin(), acc.pairs[p].left.end(), 0.0);
      std::fill(acc.pairs[p].right.begin(), acc.pairs[p].right.end(), 0.0);
    }
    for (size_t s = lo; s < hi; ++s) {
      const Sample& smp = panel[s];
      forward_pass(arch, B, acts, smp.x, acc.ws.fwd, acc.ws);
      backward_pass(arch, B, acts, smp.y, loss, acc.ws.fwd, acc.ws.bwd);
      accumulate_weight_grad(arch, smp.x, acc.ws.fwd, acc.ws.bwd, acc.g);
      for (size_t p = 0; p < np; ++p)
        accumulate_pair(arch, acts, smp.x, acc.ws.fwd, acc.ws.bwd, states[p], acc.pairs[p]);
    }
  };
  auto add = [](StageAcc& xa, const StageAcc& ya) {
    xa.g.add(ya.g);
    for (size_t p = 0; p < xa.pairs.size(); ++p) {
      for (size_t e = 0; e < xa.pairs[p].left.size(); ++e)
        xa.pairs[p].left[e] += ya.pairs[p].left[e];
      for (size_t e = 0; e < xa.pairs[p].right.size(); ++e)
        xa.pairs[p].right[e] += ya.pairs[p].right[e];
    }
  };

  StageAcc root = make();
  block_tree_reduce(panel.size(), root, eval_leaf, add, make, exec);

  const double n = static_cast<double>(panel.size());
  for (int ell = 1; ell <= arch.L; ++ell) {
    const double xi = eval_schedule(schedules, ell, t_phys);
    const Matrix& src = root.g.layer(ell);
    Matrix& dst = out.bg.layer(ell);
    for (size_t e = 0; e < src.a.size(); ++e) dst.a[e] = sign * (xi * (src.a[e] / n));
  }
  for (size_t p = 0; p < np; ++p) {
    const int i = states[p].layer;
    const double xi_i = eval_schedule(schedules, i, t_phys);
    const double xi_up = eval_schedule(schedules, i + 1, t_phys);
    out.pk[p].left.resize(states[p].left.size());
    out.pk[p].right.resize(states[p].right.size());
    for (size_t e = 0; e < states[p].left.size(); ++e)
      out.pk[p].left[e] = sign * (xi_i * (root.pairs[p].left[e] / n));
    for (size_t e = 0; e < states[p].right.size(); ++e)
      out.pk[p].right[e] = sign * (xi_up * (root.pairs[p].right[e] / n));
  }
}

void stage_pairs(std::vector<AuxPairState>& out, const std::vector<AuxPairState>& base,
                 double c, const std::vector<PairVec>& k) {
  for (size_t p = 0; p < base.size(); ++p) {
    for (size_t e = 0; e < base[p].left.size(); ++e)
      out[p].left[e] = stage_entry(base[p].left[e], c, k[p].left[e]);
    for (size_t e = 0; e < base[p].right.size(); ++e)
      out[p].right[e] = stage_entry(base[p].right[e], c, k[p].right[e]);
  }
}

void rk4_pairs(std::vector<AuxPairState>& st, const std::vector<PairVec>& k1,
               const std::vector<PairVec>& k2, const std::vector<PairVec>& k3,
               const std::vector<PairVec>& k4, double h) {
  for (size_t p = 0; p < st.size(); ++p) {
    for (size_t e = 0; e < st[p].left.size(); ++e)
      st[p].left[e] =
          rk4_entry(st[p].left[e], k1[p].left[e], k2[p].left[e], k3[p].left[e], k4[p].left[e], h);
    for (size_t e = 0; e < st[p].right.size(); ++e)
      st[p].right[e] = rk4_entry(st[p].right[e], k1[p].right[e], k2[p].right[e],
                                 k3[p].right[e], k4[p].right[e], h);
  }
}

void euler_pairs(std::vector<AuxPairState>& st, const std::vector<PairVec>& k1, double h) {
  for (size_t p = 0; p < st.size(); ++p) {
    for (size_t e = 0; e < st[p].left.size(); ++e)
      st[p].left[e] = euler_entry(st[p].left[e], h, k1[p].left[e]);
    for (size_t e = 0; e < st[p].right.size(); ++e)
      st[p].right[e] = euler_entry(st[p].right[e], h, k1[p].right[e]);
  }
}

void check_pairs_finite(const std::vector<AuxPairState>& st, long step, double t) {
  for (const AuxPairState& p : st) {
    for (double v : p.left)
      if (!std::isfinite(v)) throw OverflowError(step, t, "pair flow: state became non-finite");
    for (double v : p.right)
      if (!std::isfinite(v)) throw OverflowError(step, t, "pair flow: state became non-finite");
  }
}

}  // namespace

std::vector<AuxPairState> flow_pairs(const MfTrajectory& traj, std::span<const Sample> panel,
                                     const LossSpec& loss, const ScheduleSpec& schedules,
                                     const std::vector<AuxPairState>& init, FlowDirection dir,
                                     const ExecContext& exec) {
  const int L = static_cast<int>(traj.counts.size());
  const ArchView arch{L, traj.d, traj.counts};
  arch.validate();
  if (schedules.depth() != L) throw ShapeError("flow_pairs: schedule depth != L");
  if (panel.empty()) throw DomainError("flow_pairs: empty panel");
  for (const AuxPairState& p : init) validate_pair(p, arch);
  const ActivationStack acts = traj.act_stack();

  const double h = traj.h;
  const double T = traj.horizon();
  const double sign = dir == FlowDirection::Forward ? -1.0 : 1.0;

  WeightMatrices W =
      dir == FlowDirection::Forward ? traj.at_step(0).w : traj.at_step(traj.steps).w;
  std::vector<AuxPairState> st = init;

  const size_t np = init.size();
  auto make_slopes = [&]() {
    FusedSlopes s;
    s.bg = GradSet::zeros(arch);
    s.pk.resize(np);
    return s;
  };
  FusedSlopes k1 = make_slopes(), k2 = make_slopes(), k3 = make_slopes(), k4 = make_slopes();
  WeightMatrices stage = W;
  std::vector<AuxPairState> pstage = st;

  auto phys = [&](double theta) { return dir == FlowDirection::Forward ? theta : T - theta; };

  for (long m = 0; m < traj.steps; ++m) {
    const double t = static_cast<double>(m) * h;
    if (traj.scheme == Scheme::Euler) {
      fused_stage_eval(arch, W, acts, panel, loss, schedules, phys(t), sign, st, k1, exec);
      for (size_t i = 0; i < W.mats.size(); ++i)
        for (size_t e = 0; e < W.mats[i].a.size(); ++e)
          W.mats[i].a[e] = euler_entry(W.mats[i].a[e], h, k1.bg.mats[i].a[e]);
      euler_pairs(st, k1.pk, h);
    } else {
      fused_stage_eval(arch, W, acts, panel, loss, schedules, phys(t), sign, st, k1, exec);
      for (size_t i = 0; i < W.mats.size(); ++i)
        for (size_t e = 0; e < W.mats[i].a.size(); ++e)
          stage.mats[i].a[e] = stage_entry(W.mats[i].a[e], 0.5 * h, k1.bg.mats[i].a[e]);
      stage_pairs(pstage, st, 0.5 * h, k1.pk);
      fused_stage_eval(arch, stage, acts, panel, loss, schedules, phys(t + 0.5 * h), sign,
                       pstage, k2, exec);
      for (size_t i = 0; i < W.mats.size(); ++i)
        for (size_t e = 0; e < W.mats[i].a.size(); ++e)
          stage.mats[i].a[e] = stage_entry(W.mats[i].a[e], 0.5 * h, k2.bg.mats[i].a[e]);
      stage_pairs(pstage, st, 0.5 * h, k2.pk);
      fused_stage_eval(arch, stage, acts, panel, loss, schedules, phys(t + 0.5 * h), sign,
                       pstage, k3, exec);
      for (size_t i = 0; i < W.mats.size(); ++i)
        for (size_t e = 0; e < W.mats[i].a.size(); ++e)
          stage.mats[i].a[e] = stage_entry(W.mats[i].a[e], h, k3.bg.mats[i].a[e]);
      stage_pairs(pstage, st, h, k3.pk);
      fused_stage_eval(arch, stage, acts, panel, loss, schedules, phys(t + h), sign, pstage,
                       k4, exec);
      for (size_t i = 0; i < W.mats.size(); ++i)
        for (size_t e = 0; e < W.mats[i].a.size(); ++e)
          W.mats[i].a[e] = rk4_entry(W.mats[i].a[e], k1.bg.mats[i].a[e], k2.bg.mats[i].a[e],
                                     k3.bg.mats[i].a[e], k4.bg.mats[i].a[e], h);
      rk4_pairs(st, k1.pk, k2.pk, k3.pk, k4.pk, h);
    }
    if (!W.all_finite())
      throw OverflowError(m + 1, phys(static_cast<double>(m + 1) * h),
                          "pair flow: background became non-finite");
    check_pairs_finite(st, m + 1, phys(static_cast<double>(m + 1) * h));
  }

  // A forward run retraces the recorded background exactly; any deviation
  // means the panel, loss or schedules differ from the original run.
  if (dir == FlowDirection::Forward && traj.steps > 0) {
    const WeightMatrices& want = traj.at_step(traj.steps).w;
    for (size_t i = 0; i < W.mats.size(); ++i)
      if (max_abs_diff(W.mats[i], want.mats[i]) != 0.0)
        throw RangeError(
            "flow_pairs: background replay diverged from the stored trajectory; "
            "panel/loss/schedules do not match the original integration");
  }
  return st;
}

AuxPairState aux_flow(const MfTrajectory& traj, std::span<const Sample> panel,
                      const LossSpec& loss, const ScheduleSpec& schedules,
                      const AuxPairState& init, FlowDirection dir, const ExecContext& exec) {
  std::vector<AuxPairState> out =
      flow_pairs(traj, panel, loss, schedules, {init}, dir, exec);
  return out.front();
}

}  // namespace mfnet
