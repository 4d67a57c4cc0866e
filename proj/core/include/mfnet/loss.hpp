#pragma once

#include <string>

#include "mfnet/common.hpp"

namespace mfnet {

enum class LossKind { Huber, LogisticNll, HalfSquared };

/// Loss value and its partial derivative in the prediction argument.
struct LossValue {
  double value;
  double d2;
};

/// Pointwise loss L(y, yhat).  The training theory wants d2 bounded and
/// Lipschitz in yhat; huber and the logistic likelihood satisfy that, the
/// half-squared loss is provided for experiments but flagged by scan_loss.
struct LossSpec {
  LossKind kind = LossKind::Huber;
  double huber_delta = 1.0;

  static LossSpec huber(double delta) {
    if (!(delta > 0.0)) throw ConfigError("huber delta must be positive");
    return {LossKind::Huber, delta};
  }
  static LossSpec logistic_nll() { return {LossKind::LogisticNll, 1.0}; }
  static LossSpec half_squared() { return {LossKind::HalfSquared, 1.0}; }
};

LossValue eval_loss(const LossSpec& s, double y, double yhat);

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

/// Grid scan over (y, yhat) in [-y_span, y_span] x [-span, span]:
/// d2 boundedness, its Lipschitz constant in yhat, and agreement of d2
/// with finite differences of the value.
struct LossScanReport {
  double d2_bound = 0.0;
  double d2_lipschitz = 0.0;
  double max_fd_error = 0.0;
  bool d2_matches_fd = false;
  bool conforming = false;
};

LossScanReport scan_loss(const LossSpec& s, double y_span = 2.0, double span = 50.0,
                         int points = 2001);

}  // namespace mfnet
