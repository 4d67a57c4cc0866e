#include "mfnet/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfnet {

ActValue eval_activation(const ActivationSpec& s, double h) {
  switch (s.kind) {
    case ActKind::Tanh: {
      double t = std::tanh(h);
      return {t, 1.0 - t * t};
    }
    case ActKind::Logistic: {
      // Evaluate through exp(-|h|) so neither branch overflows.
      double v;
      if (h >= 0.0) {
        double e = std::exp(-h);
        v = 1.0 / (1.0 + e);
      } else {
        double e = std::exp(h);
        v = e / (1.0 + e);
      }
      return {v, v * (1.0 - v)};
    }
    case ActKind::Identity:
      return {h, 1.0};
  }
  throw DomainError("eval_activation: unknown kind");
}

const char* act_kind_name(ActKind k) {
  switch (k) {
    case ActKind::Tanh: return "tanh";
    case ActKind::Logistic: return "logistic";
    case ActKind::Identity: return "identity";
  }
  return "?";
}

ActKind act_kind_from_name(const std::string& name) {
  if (name == "tanh") return ActKind::Tanh;
  if (name == "logistic") return ActKind::Logistic;
  if (name == "identity") return ActKind::Identity;
  throw ConfigError("unknown activation kind: " + name);
}

ActScanReport scan_activation(const ActivationSpec& s, double span, int points) {
  if (points < 3 || span <= 0.0) throw DomainError("scan_activation: bad grid");
  ActScanReport rep;
  rep.deriv_min_abs = std::numeric_limits<double>::infinity();
  const double step = 2.0 * span / (points - 1);
  const double fd_h = 1e-5;

  double prev_d = 0.0;
  bool have_prev = false;
  for (int i = 0; i < points; ++i) {
    double h = -span + step * i;
    ActValue v = eval_activation(s, h);
    rep.value_bound = std::max(rep.value_bound, std::fabs(v.value));
    rep.deriv_bound = std::max(rep.deriv_bound, std::fabs(v.deriv));
    rep.deriv_min_abs = std::min(rep.deriv_min_abs, std::fabs(v.deriv));
    if (have_prev) {
      double slope = std::fabs(v.deriv - prev_d) / step;
      rep.deriv_lipschitz = std::max(rep.deriv_lipschitz, slope);
    }
    prev_d = v.deriv;
    have_prev = true;

    // Check value/derivative consistency only where the curvature is tame;
    // in saturated tails the centred difference underflows to noise.
    if (std::fabs(h) <= 5.0) {
      double vp = eval_activation(s, h + fd_h).value;
      double vm = eval_activation(s, h - fd_h).value;
      double fd = (vp - vm) / (2.0 * fd_h);
      rep.max_fd_error = std::max(rep.max_fd_error, std::fabs(fd - v.deriv));
    }
  }

  rep.deriv_matches_fd = rep.max_fd_error < 1e-6;
  bool bounded = std::isfinite(rep.deriv_bound) && std::isfinite(rep.deriv_lipschitz);
  if (s.role == ActRole::Hidden) {
    rep.conforming = bounded && std::isfinite(rep.value_bound) && rep.deriv_matches_fd;
  } else {
    rep.conforming = bounded && rep.deriv_min_abs > 0.0 && rep.deriv_matches_fd;
  }
  return rep;
}

ActivationStack ActivationStack::make(int L, ActKind hidden, ActKind output) {
  if (L < 2) throw ConfigError("ActivationStack: depth must be >= 2");
  ActivationStack st;
  st.phi.resize(static_cast<size_t>(L));
  for (int ell = 1; ell < L; ++ell) st.phi[ell - 1] = {hidden, ActRole::Hidden};
  st.phi[L - 1] = {output, ActRole::Output};
  return st;
}

}  // namespace mfnet
