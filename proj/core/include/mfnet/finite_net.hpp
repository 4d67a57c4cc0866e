#pragma once

#include <vector>

#include "mfnet/net_ops.hpp"
#include "mfnet/schedule.hpp"

namespace mfnet {

/// Shape of a finite network: depth, input dim, widths n_1..n_L (n_L = 1).
struct NetworkArch {
  int L = 0;
  int d = 0;
  std::vector<int> widths;

  ArchView view() const { return {L, d, widths}; }
  void validate() const { view().validate(); }
};

/// A finite network: architecture, activations, and the weight stack.
struct FiniteWeights {
  NetworkArch arch;
  ActivationStack acts;
  WeightMatrices w;

  static FiniteWeights zeros(NetworkArch arch, ActivationStack acts);
  void validate() const;
};

/// Everything one labelled sample induces: forward state, sensitivities,
/// and the materialised per-weight update directions.
struct FinitePass {
  ForwardPass fwd;
  BackwardPass bwd;
  GradSet dw;
};

/// Prediction for one input; `pass` receives the full forward state.
double forward_finite(const FiniteWeights& net, const std::vector<double>& x,
                      ForwardPass& pass, NetWorkspace& ws);
double forward_finite(const FiniteWeights& net, const std::vector<double>& x);

/// Full per-sample sweep (forward + backward + weight directions).
FinitePass backward_finite(const FiniteWeights& net, const Sample& sample, const LossSpec& loss);

/// One stochastic update at step k (model time k*eps):
/// w_ell -= eps * xi_ell(k*eps) * dw_ell.  Throws OverflowError if any
/// weight leaves the finite range.
void sgd_step(FiniteWeights& net, const Sample& sample, const LossSpec& loss,
              const ScheduleSpec& schedules, double eps, long k);

/// Deterministic full-batch variant: the sample direction is replaced by
/// its panel average.
void full_batch_step(FiniteWeights& net, std::span<const Sample> panel, const LossSpec& loss,
                     const ScheduleSpec& schedules, double eps, long k, const ExecContext& exec);

struct WeightSnapshot {
  long step = 0;
  double time = 0.0;
  WeightMatrices w;
};

struct TrainLog {
  std::vector<WeightSnapshot> snapshots;  // always includes steps 0 and `steps`
  double final_loss = 0.0;

  const WeightSnapshot& at_step(long step) const;
};

enum class TrainMode { Sgd, FullBatch };

/// Runs `steps` updates from the current weights.  SGD draws sample k from
/// the stream attached to `rng`; full-batch uses `panel`.  Snapshots are
/// recorded every `log_every` steps plus both endpoints.
TrainLog train_finite(FiniteWeights& net, const DataModel& data, const LossSpec& loss,
                      const ScheduleSpec& schedules, double eps, long steps, long log_every,
                      const CounterRng& rng, TrainMode mode, std::span<const Sample> panel,
                      const ExecContext& exec);

}  // namespace mfnet
