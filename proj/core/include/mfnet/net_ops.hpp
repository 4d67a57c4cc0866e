#pragma once

#include <span>
#include <vector>

#include "mfnet/activation.hpp"
#include "mfnet/common.hpp"
#include "mfnet/data.hpp"
#include "mfnet/loss.hpp"
#include "mfnet/matrix.hpp"

namespace mfnet {

/// Layer widths n_1..n_L of an L-layer architecture with input dim d.
/// The last width is 1 (scalar output).  Both the finite network and the
/// particle system view their weights through this.
struct ArchView {
  int L = 0;
  int d = 0;
  std::span<const int> widths;  // size L

  int width(int ell) const { return widths[static_cast<size_t>(ell) - 1]; }
  void validate() const;
};

/// Weight stack: mats[0] is n_1 x d (one row per first-layer unit);
/// mats[ell-1] for ell >= 2 is n_{ell-1} x n_ell.  An entry (j, k) of
/// layer ell couples unit j of layer ell-1 to unit k of layer ell.
struct WeightMatrices {
  std::vector<Matrix> mats;

  static WeightMatrices zeros(const ArchView& arch);
  Matrix& layer(int ell) { return mats.at(static_cast<size_t>(ell) - 1); }
  const Matrix& layer(int ell) const { return mats.at(static_cast<size_t>(ell) - 1); }
  int depth() const { return static_cast<int>(mats.size()); }
  bool all_finite() const;
  void check_shapes(const ArchView& arch) const;
};

/// Per-sample forward state: pre-activations H_ell, activation values and
/// derivatives at them, and the network output with its derivative factor.
struct ForwardPass {
  std::vector<VecD> H;     // H[ell-1], size n_ell
  std::vector<VecD> actv;  // phi_ell(H_ell)
  std::vector<VecD> actd;  // phi_ell'(H_ell)
  double yhat = 0.0;
  double out_deriv = 0.0;  // phi_L'(H_L)

  void prepare(const ArchView& arch);
};

/// Per-sample backward state: dH[ell-1] holds the sensitivities of layer
/// ell (size n_ell), and d2 the loss derivative in the prediction.
struct BackwardPass {
  std::vector<VecD> dH;
  double d2 = 0.0;

  void prepare(const ArchView& arch);
};

/// Scratch owned by one thread of execution.
struct NetWorkspace {
  ForwardPass fwd;
  BackwardPass bwd;
  std::vector<VecD> stack;  // recursion temporaries for row reductions

  void prepare(const ArchView& arch);
};

/// Weight-shaped accumulator (gradients, drifts, update directions).
struct GradSet {
  std::vector<Matrix> mats;

  static GradSet zeros(const ArchView& arch);
  Matrix& layer(int ell) { return mats.at(static_cast<size_t>(ell) - 1); }
  const Matrix& layer(int ell) const { return mats.at(static_cast<size_t>(ell) - 1); }
  void set_zero();
  void add(const GradSet& o);
};

/// One forward sweep.  Mean-field scaling: layer ell >= 2 averages its
/// inputs over the n_{ell-1} units of the previous layer.
void forward_pass(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
                  std::span<const double> x, ForwardPass& out, NetWorkspace& ws);

/// Backward sweep for one sample; fills dH top-down.  Requires the forward
/// state of the same sample.
void backward_pass(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
                   double y, const LossSpec& loss, const ForwardPass& fwd, BackwardPass& out);

/// Adds this sample's weight sensitivities into `into`:
/// layer 1 rows get dH_1(j) * x, deeper entries dH_ell(k) * actv_{ell-1}(j).
void accumulate_weight_grad(const ArchView& arch, std::span<const double> x,
                            const ForwardPass& fwd, const BackwardPass& bwd, GradSet& into);

/// Average of the per-sample weight sensitivities over a panel, reduced in
/// the fixed block-tree order.  This is the expectation all training laws
/// consume; dividing it by the fan size products recovers the classical
/// loss gradient.
void average_weight_grad(const ArchView& arch, const WeightMatrices& w,
                         const ActivationStack& acts, const LossSpec& loss,
                         std::span<const Sample> panel, GradSet& out, const ExecContext& exec);

/// Panel mean of the pointwise loss, same reduction order.
double average_loss(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
                    const LossSpec& loss, std::span<const Sample> panel, const ExecContext& exec);

}  // namespace mfnet
