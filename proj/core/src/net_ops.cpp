#include "mfnet/net_ops.hpp"

#include <cmath>

#include "mfnet/reduce.hpp"

namespace mfnet {

void ArchView::validate() const {
  if (L < 2) throw ConfigError("architecture: depth must be >= 2");
  if (d < 1) throw ConfigError("architecture: input dim must be >= 1");
  if (static_cast<int>(widths.size()) != L) throw ShapeError("architecture: widths size != L");
  for (int ell = 1; ell <= L; ++ell)
    if (width(ell) < 1) throw ConfigError("architecture: widths must be >= 1");
  if (width(L) != 1) throw ConfigError("architecture: output layer width must be 1");
}

WeightMatrices WeightMatrices::zeros(const ArchView& arch) {
  WeightMatrices w;
  w.mats.reserve(static_cast<size_t>(arch.L));
  w.mats.emplace_back(arch.width(1), arch.d);
  for (int ell = 2; ell <= arch.L; ++ell)
    w.mats.emplace_back(arch.width(ell - 1), arch.width(ell));
  return w;
}

bool WeightMatrices::all_finite() const {
  for (const Matrix& m : mats)
    if (!m.all_finite()) return false;
  return true;
}

void WeightMatrices::check_shapes(const ArchView& arch) const {
  if (depth() != arch.L) throw ShapeError("weights: layer count != L");
  if (mats[0].rows != arch.width(1) || mats[0].cols != arch.d)
    throw ShapeError("weights: layer 1 shape mismatch");
  for (int ell = 2; ell <= arch.L; ++ell) {
    const Matrix& m = layer(ell);
    if (m.rows != arch.width(ell - 1) || m.cols != arch.width(ell))
      throw ShapeError("weights: layer " + std::to_string(ell) + " shape mismatch");
  }
}

void ForwardPass::prepare(const ArchView& arch) {
  H.resize(static_cast<size_t>(arch.L));
  actv.resize(static_cast<size_t>(arch.L));
  actd.resize(static_cast<size_t>(arch.L));
  for (int ell = 1; ell <= arch.L; ++ell) {
    size_t n = static_cast<size_t>(arch.width(ell));
    H[ell - 1].resize(n);
    actv[ell - 1].resize(n);
    actd[ell - 1].resize(n);
  }
}

void BackwardPass::prepare(const ArchView& arch) {
  dH.resize(static_cast<size_t>(arch.L));
  for (int ell = 1; ell <= arch.L; ++ell)
    dH[ell - 1].resize(static_cast<size_t>(arch.width(ell)));
}

void NetWorkspace::prepare(const ArchView& arch) {
  fwd.prepare(arch);
  bwd.prepare(arch);
}

GradSet GradSet::zeros(const ArchView& arch) {
  GradSet g;
  WeightMatrices w = WeightMatrices::zeros(arch);
  g.mats = std::move(w.mats);
  return g;
}

void GradSet::set_zero() {
  for (Matrix& m : mats) m.fill(0.0);
}

void GradSet::add(const GradSet& o) {
  for (size_t i = 0; i < mats.size(); ++i) {
    Matrix& x = mats[i];
    const Matrix& y = o.mats[i];
    for (size_t e = 0; e < x.a.size(); ++e) x.a[e] += y.a[e];
  }
}

namespace {

VecD& stack_slot(std::vector<VecD>& stack, int depth, int cols) {
  while (static_cast<int>(stack.size()) <= depth) stack.emplace_back();
  VecD& v = stack[static_cast<size_t>(depth)];
  v.resize(static_cast<size_t>(cols));
  return v;
}

/// acc[k] = sum over rows j in [lo, hi) of m(j,k) * s[j], reduced with the
/// same tree shape as pairwise_dot over the row index, applied to every
/// column at once.
void weighted_row_sum(const Matrix& m, const double* s, size_t lo, size_t hi, double* acc,
                      std::vector<VecD>& stack, int depth) {
  const int cols = m.cols;
  if (hi - lo <= kReduceLeaf) {
    const double* r = m.row(static_cast<int>(lo));
    double sj = s[lo];
    for (int k = 0; k < cols; ++k) acc[k] = r[k] * sj;
    for (size_t j = lo + 1; j < hi; ++j) {
      r = m.row(static_cast<int>(j));
      sj = s[j];
      for (int k = 0; k < cols; ++k) acc[k] += r[k] * sj;
    }
    return;
  }
  size_t mid = lo + (hi - lo) / 2;
  weighted_row_sum(m, s, lo, mid, acc, stack, depth + 1);
  VecD& tmp = stack_slot(stack, depth, cols);
  weighted_row_sum(m, s, mid, hi, tmp.data(), stack, depth + 1);
  for (int k = 0; k < cols; ++k) acc[k] += tmp[k];
}

}  // namespace

void forward_pass(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
                  std::span<const double> x, ForwardPass& out, NetWorkspace& ws) {
  if (static_cast<int>(x.size()) != arch.d) throw ShapeError("forward: input dim mismatch");

  const Matrix& w1 = w.layer(1);
  for (int j = 0; j < w1.rows; ++j) {
    double h = pairwise_dot(w1.row(j), x.data(), x.size());
    out.H[0][static_cast<size_t>(j)] = h;
    ActValue v = eval_activation(acts.layer(1), h);
    out.actv[0][static_cast<size_t>(j)] = v.value;
    out.actd[0][static_cast<size_t>(j)] = v.deriv;
  }

  for (int ell = 2; ell <= arch.L; ++ell) {
    const Matrix& m = w.layer(ell);
    const VecD& prev = out.actv[static_cast<size_t>(ell) - 2];
    VecD& h = out.H[static_cast<size_t>(ell) - 1];
    weighted_row_sum(m, prev.data(), 0, static_cast<size_t>(m.rows), h.data(), ws.stack, 0);
    const double fan = static_cast<double>(m.rows);
    const ActivationSpec& spec = acts.layer(ell);
    VecD& av = out.actv[static_cast<size_t>(ell) - 1];
    VecD& ad = out.actd[static_cast<size_t>(ell) - 1];
    for (int k = 0; k < m.cols; ++k) {
      double hk = h[static_cast<size_t>(k)] / fan;
      h[static_cast<size_t>(k)] = hk;
      ActValue v = eval_activation(spec, hk);
      av[static_cast<size_t>(k)] = v.value;
      ad[static_cast<size_t>(k)] = v.deriv;
    }
  }

  out.yhat = out.actv[static_cast<size_t>(arch.L) - 1][0];
  out.out_deriv = out.actd[static_cast<size_t>(arch.L) - 1][0];
}

void backward_pass(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
                   double y, const LossSpec& loss, const ForwardPass& fwd, BackwardPass& out) {
  (void)acts;
  out.d2 = eval_loss(loss, y, fwd.yhat).d2;
  out.dH[static_cast<size_t>(arch.L) - 1][0] = out.d2 * fwd.out_deriv;

  for (int ell = arch.L; ell >= 2; --ell) {
    const Matrix& m = w.layer(ell);
    const VecD& up = out.dH[static_cast<size_t>(ell) - 1];
    VecD& down = out.dH[static_cast<size_t>(ell) - 2];
    const VecD& ad = fwd.actd[static_cast<size_t>(ell) - 2];
    const double fan = static_cast<double>(m.cols);
    for (int j = 0; j < m.rows; ++j) {
      double dot = pairwise_dot(up.data(), m.row(j), static_cast<size_t>(m.cols));
      down[static_cast<size_t>(j)] = (dot / fan) * ad[static_cast<size_t>(j)];
    }
  }
}

void accumulate_weight_grad(const ArchView& arch, std::span<const double> x,
                            const ForwardPass& fwd, const BackwardPass& bwd, GradSet& into) {
  Matrix& g1 = into.layer(1);
  const VecD& d1 = bwd.dH[0];
  for (int j = 0; j < g1.rows; ++j) {
    double q = d1[static_cast<size_t>(j)];
    double* row = g1.row(j);
    for (int c = 0; c < g1.cols; ++c) row[c] += q * x[static_cast<size_t>(c)];
  }
  for (int ell = 2; ell <= arch.L; ++ell) {
    Matrix& g = into.layer(ell);
    const VecD& up = bwd.dH[static_cast<size_t>(ell) - 1];
    const VecD& prev = fwd.actv[static_cast<size_t>(ell) - 2];
    for (int j = 0; j < g.rows; ++j) {
      double c = prev[static_cast<size_t>(j)];
      double* row = g.row(j);
      for (int k = 0; k < g.cols; ++k) row[k] += up[static_cast<size_t>(k)] * c;
    }
  }
}

namespace {

struct GradAcc {
  GradSet g;
  NetWorkspace ws;
};

struct LossAcc {
  double sum = 0.0;
  NetWorkspace ws;
};

}  // namespace

void average_weight_grad(const ArchView& arch, const WeightMatrices& w,
                         const ActivationStack& acts, const LossSpec& loss,
                         std::span<const Sample> panel, GradSet& out, const ExecContext& exec) {
  if (panel.empty()) throw DomainError("average_weight_grad: empty panel");

  auto eval_leaf = [&](size_t lo, size_t hi, GradAcc& acc) {
    acc.g.set_zero();
    for (size_t s = lo; s < hi; ++s) {
      const Sample& smp = panel[s];
      forward_pass(arch, w, acts, smp.x, acc.ws.fwd, acc.ws);
      backward_pass(arch, w, acts, smp.y, loss, acc.ws.fwd, acc.ws.bwd);
      accumulate_weight_grad(arch, smp.x, acc.ws.fwd, acc.ws.bwd, acc.g);
    }
  };
  auto add = [](GradAcc& x, const GradAcc& y) { x.g.add(y.g); };
  auto make = [&]() {
    GradAcc a;
    a.g = GradSet::zeros(arch);
    a.ws.prepare(arch);
    return a;
  };

  GradAcc root = make();
  block_tree_reduce(panel.size(), root, eval_leaf, add, make, exec);

  const double n = static_cast<double>(panel.size());
  out.mats.resize(root.g.mats.size());
  for (size_t i = 0; i < root.g.mats.size(); ++i) {
    const Matrix& src = root.g.mats[i];
    Matrix& dst = out.mats[i];
    if (!dst.same_shape(src)) dst = Matrix(src.rows, src.cols);
    for (size_t e = 0; e < src.a.size(); ++e) dst.a[e] = src.a[e] / n;
  }
}

double average_loss(const ArchView& arch, const WeightMatrices& w, const ActivationStack& acts,
                    const LossSpec& loss, std::span<const Sample> panel,
                    const ExecContext& exec) {
  if (panel.empty()) throw DomainError("average_loss: empty panel");

  auto eval_leaf = [&](size_t lo, size_t hi, LossAcc& acc) {
    const Sample& first = panel[lo];
    forward_pass(arch, w, acts, first.x, acc.ws.fwd, acc.ws);
    acc.sum = eval_loss(loss, first.y, acc.ws.fwd.yhat).value;
    for (size_t s = lo + 1; s < hi; ++s) {
      const Sample& smp = panel[s];
      forward_pass(arch, w, acts, smp.x, acc.ws.fwd, acc.ws);
      acc.sum += eval_loss(loss, smp.y, acc.ws.fwd.yhat).value;
    }
  };
  auto add = [](LossAcc& x, const LossAcc& y) { x.sum += y.sum; };
  auto make = [&]() {
    LossAcc a;
    a.ws.prepare(arch);
    return a;
  };

  LossAcc root = make();
  block_tree_reduce(panel.size(), root, eval_leaf, add, make, exec);
  return root.sum / static_cast<double>(panel.size());
}

}  // namespace mfnet
