#pragma once

#include <string>
#include <vector>

#include "mfnet/common.hpp"

namespace mfnet {

enum class ActKind { Tanh, Logistic, Identity };

enum class ActRole { Hidden, Output };

/// Value and first derivative of an activation at one point.
struct ActValue {
  double value;
  double deriv;
};

/// One nonlinearity together with the role it plays in the layer stack.
/// Hidden layers are expected to be bounded with bounded, Lipschitz
/// derivatives; the output layer additionally needs a derivative bounded
/// away from zero.  Those expectations are checked by scan_activation, not
/// enforced at construction.
struct ActivationSpec {
  ActKind kind = ActKind::Tanh;
  ActRole role = ActRole::Hidden;
};

ActValue eval_activation(const ActivationSpec& s, double h);

const char* act_kind_name(ActKind k);
ActKind act_kind_from_name(const std::string& name);

/// Grid-scan conformance report for an activation in a given role.
/// `deriv_matches_fd`: centred finite differences of the value agree with
/// the returned derivative.  The remaining flags estimate the regularity
/// contract on the scanned grid.
struct ActScanReport {
  double value_bound = 0.0;
  double deriv_bound = 0.0;
  double deriv_lipschitz = 0.0;
  double deriv_min_abs = 0.0;
  double max_fd_error = 0.0;
  bool deriv_matches_fd = false;
  bool conforming = false;
};

/// Scans [-span, span] with `points` samples (default covers the saturated
/// tails).  A hidden-role spec conforms when value and derivative are
/// bounded and the derivative's grid Lipschitz constant is finite; an
/// output-role spec additionally requires min |deriv| > 0 on the grid.
ActScanReport scan_activation(const ActivationSpec& s, double span = 50.0, int points = 20001);

/// Per-layer activations phi_1..phi_L: layers 1..L-1 use the hidden kind,
/// layer L the output kind.
struct ActivationStack {
  std::vector<ActivationSpec> phi;

  static ActivationStack make(int L, ActKind hidden, ActKind output);
  const ActivationSpec& layer(int ell) const { return phi.at(static_cast<size_t>(ell) - 1); }
  int depth() const { return static_cast<int>(phi.size()); }
};

}  // namespace mfnet
