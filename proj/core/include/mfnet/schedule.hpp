#pragma once

#include <string>
#include <vector>

#include "mfnet/common.hpp"

namespace mfnet {

enum class ScheduleKind { Constant, ExpDecay, PiecewiseLinear };

/// One learning-rate curve xi(t) on t >= 0.  Forms are enumerated so their
/// bound and Lipschitz constant on [0, T] are computable in closed form.
struct ScheduleForm {
  ScheduleKind kind = ScheduleKind::Constant;
  double c = 1.0;     // level (constant, exp_decay prefactor)
  double rate = 0.0;  // exp_decay: xi(t) = c * exp(-rate * t)
  std::vector<double> knot_t;  // piecewise_linear, strictly increasing from 0
  std::vector<double> knot_v;

  static ScheduleForm constant(double c) { return {ScheduleKind::Constant, c, 0.0, {}, {}}; }
  static ScheduleForm exp_decay(double c, double rate) {
    return {ScheduleKind::ExpDecay, c, rate, {}, {}};
  }
  static ScheduleForm piecewise_linear(std::vector<double> t, std::vector<double> v);
};

double eval_schedule_form(const ScheduleForm& f, double t);

/// sup |xi| and Lipschitz constant on [0, horizon].
struct ScheduleBounds {
  double bound = 0.0;
  double lipschitz = 0.0;
};
ScheduleBounds schedule_bounds(const ScheduleForm& f, double horizon);

/// Per-layer schedules xi_1..xi_L.
struct ScheduleSpec {
  std::vector<ScheduleForm> layers;

  static ScheduleSpec uniform(int L, ScheduleForm f) {
    ScheduleSpec s;
    s.layers.assign(static_cast<size_t>(L), f);
    return s;
  }
  int depth() const { return static_cast<int>(layers.size()); }
  const ScheduleForm& layer(int ell) const { return layers.at(static_cast<size_t>(ell) - 1); }

  /// True when xi_ell is the constant 1 (required of the output layer by
  /// the convergence diagnostics).
  bool layer_is_unit(int ell) const {
    const ScheduleForm& f = layer(ell);
    return f.kind == ScheduleKind::Constant && f.c == 1.0;
  }
};

/// xi_ell(t); t < 0 is outside the domain.
double eval_schedule(const ScheduleSpec& s, int ell, double t);

}  // namespace mfnet
