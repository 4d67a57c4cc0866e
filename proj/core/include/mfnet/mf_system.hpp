#pragma once

#include <functional>
#include <vector>

#include "mfnet/net_ops.hpp"
#include "mfnet/schedule.hpp"
#include "mfnet/stepper.hpp"

namespace mfnet {

/// Particle discretisation of the mean-field system: M_ell exchangeable
/// particles per layer (the last layer has exactly one), weights in the
/// same stacked layout as a finite network of those widths.  Expectations
/// over a layer are equal-weight particle averages, so the forward and
/// backward maps are shared verbatim with the finite network.
struct ParticleSystem {
  std::vector<int> counts;  // M_1..M_L, M_L = 1
  int d = 0;
  ActivationStack acts;
  WeightMatrices w;
  double t = 0.0;

  ArchView arch() const { return {static_cast<int>(counts.size()), d, counts}; }
  static ParticleSystem zeros(std::vector<int> counts, int d, ActivationStack acts);
  void validate() const;
};

/// Network output of the particle system at one input.
double forward_particles(const ParticleSystem& ps, const std::vector<double>& x);

/// Right-hand side of the training dynamics at the system's own clock:
/// out_ell = -xi_ell(t) * (panel average of the per-sample weight
/// sensitivities).
void mf_drift(const ParticleSystem& ps, std::span<const Sample> panel, const LossSpec& loss,
              const ScheduleSpec& schedules, GradSet& out, const ExecContext& exec);

/// Same drift at an explicit (state, time); the building block the
/// integrators and the pair flows share.
void drift_at(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
              std::span<const Sample> panel, const LossSpec& loss,
              const ScheduleSpec& schedules, double t, double sign, GradSet& out,
              const ExecContext& exec);

struct Checkpoint {
  long step = 0;
  double t = 0.0;
  WeightMatrices w;
};

/// Stored trajectory of an integration run: the grid description plus
/// checkpoints (always including both endpoints).
struct MfTrajectory {
  std::vector<int> counts;
  int d = 0;
  ActKind hidden = ActKind::Tanh;
  ActKind output = ActKind::Identity;
  Scheme scheme = Scheme::Rk4;
  double h = 0.0;
  long steps = 0;
  long checkpoint_every = 1;
  std::vector<Checkpoint> checkpoints;

  double horizon() const { return static_cast<double>(steps) * h; }
  const Checkpoint& at_step(long step) const;
  bool has_step(long step) const;
  ActivationStack act_stack() const {
    return ActivationStack::make(static_cast<int>(counts.size()), hidden, output);
  }
};

/// Fixed-step explicit integration of the particle dynamics from ps.t = 0
/// to T = steps * h.  Advances ps in place and returns the checkpointed
/// trajectory.  Throws OverflowError at the first non-finite state.
MfTrajectory integrate_mf(ParticleSystem& ps, std::span<const Sample> panel,
                          const LossSpec& loss, const ScheduleSpec& schedules, Scheme scheme,
                          double h, long steps, long checkpoint_every, const ExecContext& exec);

/// Top-left slice of a weight stack onto smaller widths (layer 1 keeps all
/// input columns).  Used to compare systems that share a code prefix.
WeightMatrices restrict_weights(const WeightMatrices& w, const ArchView& from,
                                std::span<const int> to_widths);

}  // namespace mfnet
