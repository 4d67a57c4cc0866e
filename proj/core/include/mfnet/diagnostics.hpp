#pragma once

#include <optional>
#include <vector>

#include "mfnet/aux_flow.hpp"
#include "mfnet/finite_net.hpp"
#include "mfnet/mf_system.hpp"

namespace mfnet {

/// One metrics row along a trajectory.
struct MetricsRecord {
  double t = 0.0;
  double pop_loss = 0.0;
  double esssup_dwL = 0.0;       // max over top-layer particles of |mean update|
  VecD wl1;                      // weighted-L1 distance to a reference, per layer
  std::optional<double> coupling_dist;
};

/// Panel average of the pointwise loss for either kind of system.
double population_loss(const FiniteWeights& net, std::span<const Sample> panel,
                       const LossSpec& loss, const ExecContext& exec);
double population_loss(const ParticleSystem& ps, std::span<const Sample> panel,
                       const LossSpec& loss, const ExecContext& exec);

/// Largest |panel-averaged update direction| among the output layer's
/// incoming weights: the stationarity certificate of the training flow.
double esssup_output_drift(const ArchView& arch, const WeightMatrices& w,
                           const ActivationStack& acts, const LossSpec& loss,
                           std::span<const Sample> panel, const ExecContext& exec);

/// Layerwise weighted-L1 distances |w - ref| where deviations at layer i
/// are propagated through the mean absolute magnitudes of the reference
/// layers above: a chain-weighted norm in which the training flow is
/// continuous in its initial data.
VecD weighted_l1_distance(const ArchView& arch, const WeightMatrices& w,
                          const WeightMatrices& ref);

/// Loss / stationarity / distance-to-final metrics at every checkpoint.
std::vector<MetricsRecord> convergence_metrics(const MfTrajectory& traj,
                                               std::span<const Sample> panel,
                                               const LossSpec& loss, const ExecContext& exec);

/// Entrywise distance between a finite training log and a particle
/// trajectory on the aligned snapshot grid (k*eps matched with checkpoint
/// times to 1e-9): per-time max over layers of mean |difference|, and its
/// running maximum.  Throws RangeError when the grids cannot be aligned.
struct CouplingSeries {
  std::vector<double> t;
  std::vector<double> dist;
  std::vector<double> running_max;
};

CouplingSeries coupling_distance(const TrainLog& finite_log, const MfTrajectory& traj,
                                 double eps);

/// Central-difference check of the per-sample loss gradient implied by the
/// backward pass.  Relative errors use max(|analytic|, |numeric|, floor)
/// in the denominator.
struct GradCheckReport {
  double max_rel_error = 0.0;
  int worst_layer = 0;
  int worst_row = 0;
  int worst_col = 0;
};

GradCheckReport grad_check(const FiniteWeights& net, const Sample& sample, const LossSpec& loss,
                           double fd_h = 1e-6, double floor = 1e-5);

/// Round-trip defect of the pair flows: reverse-flow each probe through
/// the whole trajectory, forward-flow the result, and report the max-norm
/// distance to the original probe.
VecD diversity_roundtrip(const MfTrajectory& traj, std::span<const Sample> panel,
                         const LossSpec& loss, const ScheduleSpec& schedules,
                         const std::vector<AuxPairState>& probes, const ExecContext& exec);

/// CSV with header t,pop_loss,esssup_dwL,wl1_layer_1..L,coupling_dist.
std::string metrics_to_csv(const std::vector<MetricsRecord>& rows, int L);

}  // namespace mfnet
