#pragma once

#include <vector>

#include "mfnet/mf_system.hpp"

namespace mfnet {

/// State of one auxiliary pair attached to layer i of a particle system:
/// `left` couples to layer i-1 (input coordinates when i = 1), `right` to
/// layer i+1.  Under the forward flow the pair follows the same update law
/// as the corresponding weight columns/rows; the reverse flow undoes it
/// against the time-reversed background.
struct AuxPairState {
  int layer = 1;  // 1..L-1
  VecD left;
  VecD right;
};

enum class FlowDirection { Forward, Reverse };

/// Advances a batch of pairs through the whole horizon of `traj` with the
/// trajectory's own scheme and step size.  The background is not
/// interpolated from checkpoints: forward flows re-integrate it from the
/// initial state (bit-identical to the original run), reverse flows
/// co-integrate it backwards from the final state, so pair and background
/// always advance through the same stage states.  `panel`, `loss` and
/// `schedules` must be the ones the trajectory was produced with.
std::vector<AuxPairState> flow_pairs(const MfTrajectory& traj, std::span<const Sample> panel,
                                     const LossSpec& loss, const ScheduleSpec& schedules,
                                     const std::vector<AuxPairState>& init, FlowDirection dir,
                                     const ExecContext& exec);

/// Single-pair convenience wrapper.
AuxPairState aux_flow(const MfTrajectory& traj, std::span<const Sample> panel,
                      const LossSpec& loss, const ScheduleSpec& schedules,
                      const AuxPairState& init, FlowDirection dir, const ExecContext& exec);

/// Shape check of a pair against an architecture.
void validate_pair(const AuxPairState& p, const ArchView& arch);

}  // namespace mfnet
