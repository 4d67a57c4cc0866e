#include "mfnet/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace mfnet {

ScheduleForm ScheduleForm::piecewise_linear(std::vector<double> t, std::vector<double> v) {
  if (t.size() != v.size() || t.size() < 2)
    throw ConfigError("piecewise_linear: need matching knot lists with >= 2 entries");
  if (t.front() != 0.0) throw ConfigError("piecewise_linear: first knot must sit at t=0");
  for (size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ConfigError("piecewise_linear: knots must increase");
  ScheduleForm f;
  f.kind = ScheduleKind::PiecewiseLinear;
  f.knot_t = std::move(t);
  f.knot_v = std::move(v);
  return f;
}

double eval_schedule_form(const ScheduleForm& f, double t) {
  if (t < 0.0) throw DomainError("schedule: t must be >= 0");
  switch (f.kind) {
    case ScheduleKind::Constant:
      return f.c;
    case ScheduleKind::ExpDecay:
      return f.c * std::exp(-f.rate * t);
    case ScheduleKind::PiecewiseLinear: {
      const auto& kt = f.knot_t;
      const auto& kv = f.knot_v;
      if (t >= kt.back()) return kv.back();
      size_t hi = static_cast<size_t>(
          std::upper_bound(kt.begin(), kt.end(), t) - kt.begin());
      size_t lo = hi - 1;
      double w = (t - kt[lo]) / (kt[hi] - kt[lo]);
      return kv[lo] + w * (kv[hi] - kv[lo]);
    }
  }
  throw DomainError("schedule: unknown form");
}

ScheduleBounds schedule_bounds(const ScheduleForm& f, double horizon) {
  if (horizon < 0.0) throw DomainError("schedule_bounds: negative horizon");
  switch (f.kind) {
    case ScheduleKind::Constant:
      return {std::fabs(f.c), 0.0};
    case ScheduleKind::ExpDecay: {
      double b = std::fabs(f.c) * (f.rate >= 0.0 ? 1.0 : std::exp(-f.rate * horizon));
      return {b, std::fabs(f.c * f.rate) * (f.rate >= 0.0 ? 1.0 : std::exp(-f.rate * horizon))};
    }
    case ScheduleKind::PiecewiseLinear: {
      ScheduleBounds out;
      for (double v : f.knot_v) out.bound = std::max(out.bound, std::fabs(v));
      for (size_t i = 1; i < f.knot_t.size(); ++i) {
        double slope = std::fabs((f.knot_v[i] - f.knot_v[i - 1]) / (f.knot_t[i] - f.knot_t[i - 1]));
        out.lipschitz = std::max(out.lipschitz, slope);
      }
      return out;
    }
  }
  throw DomainError("schedule_bounds: unknown form");
}

double eval_schedule(const ScheduleSpec& s, int ell, double t) {
  if (ell < 1 || ell > s.depth()) throw ShapeError("eval_schedule: layer out of range");
  return eval_schedule_form(s.layer(ell), t);
}

}  // namespace mfnet
