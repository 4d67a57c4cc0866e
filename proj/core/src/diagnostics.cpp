#include "mfnet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mfnet/container.hpp"
#include "mfnet/reduce.hpp"

namespace mfnet {

double population_loss(const FiniteWeights& net, std::span<const Sample> panel,
                       const LossSpec& loss, const ExecContext& exec) {
  return average_loss(net.arch.view(), net.w, net.acts, loss, panel, exec);
}

double population_loss(const ParticleSystem& ps, std::span<const Sample> panel,
                       const LossSpec& loss, const ExecContext& exec) {
  return average_loss(ps.arch(), ps.w, ps.acts, loss, panel, exec);
}

double esssup_output_drift(const ArchView& arch, const WeightMatrices& w,
                           const ActivationStack& acts, const LossSpec& loss,
                           std::span<const Sample> panel, const ExecContext& exec) {
  GradSet avg;
  average_weight_grad(arch, w, acts, loss, panel, avg, exec);
  const Matrix& top = avg.layer(arch.L);
  double m = 0.0;
  for (double v : top.a) m = std::max(m, std::fabs(v));
  return m;
}

VecD weighted_l1_distance(const ArchView& arch, const WeightMatrices& w,
                          const WeightMatrices& ref) {
  w.check_shapes(arch);
  ref.check_shapes(arch);
  const int L = arch.L;

  // up[ell](k): mean |ref| path product from unit k of layer ell to the
  // output, computed top-down.  up[L] = {1}; descending one layer averages
  // |ref_w| times the weight above over the fan.
  std::vector<VecD> up(static_cast<size_t>(L) + 1);
  up[static_cast<size_t>(L)].assign(1, 1.0);
  for (int ell = L; ell >= 2; --ell) {
    const Matrix& m = ref.layer(ell);  // rows: layer ell-1 units, cols: layer ell units
    const VecD& above = up[static_cast<size_t>(ell)];
    VecD& dst = up[static_cast<size_t>(ell) - 1];
    dst.resize(static_cast<size_t>(m.rows));
    VecD prods(static_cast<size_t>(m.cols));
    for (int j = 0; j < m.rows; ++j) {
      const double* row = m.row(j);
      for (int k = 0; k < m.cols; ++k)
        prods[static_cast<size_t>(k)] = std::fabs(row[k]) * above[static_cast<size_t>(k)];
      dst[static_cast<size_t>(j)] = pairwise_sum(prods) / static_cast<double>(m.cols);
    }
  }

  VecD out(static_cast<size_t>(L));
  {
    const Matrix& a = w.layer(1);
    const Matrix& b = ref.layer(1);
    const VecD& w1up = up[1];
    VecD terms(static_cast<size_t>(a.rows));
    for (int j = 0; j < a.rows; ++j) {
      double s = 0.0;
      for (int c = 0; c < a.cols; ++c) s += std::fabs(a.at(j, c) - b.at(j, c));
      terms[static_cast<size_t>(j)] = s * w1up[static_cast<size_t>(j)];
    }
    out[0] = pairwise_sum(terms) / static_cast<double>(a.rows);
  }
  for (int ell = 2; ell <= L; ++ell) {
    const Matrix& a = w.layer(ell);
    const Matrix& b = ref.layer(ell);
    const VecD& above = up[static_cast<size_t>(ell)];
    VecD terms(static_cast<size_t>(a.rows));
    for (int j = 0; j < a.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k)
        s += std::fabs(a.at(j, k) - b.at(j, k)) * above[static_cast<size_t>(k)];
      terms[static_cast<size_t>(j)] = s;
    }
    out[static_cast<size_t>(ell) - 1] =
        pairwise_sum(terms) / static_cast<double>(a.rows) / static_cast<double>(a.cols);
  }
  return out;
}

std::vector<MetricsRecord> convergence_metrics(const MfTrajectory& traj,
                                               std::span<const Sample> panel,
                                               const LossSpec& loss, const ExecContext& exec) {
  const int L = static_cast<int>(traj.counts.size());
  const ArchView arch{L, traj.d, traj.counts};
  const ActivationStack acts = traj.act_stack();
  const WeightMatrices& final_w = traj.checkpoints.back().w;

  std::vector<MetricsRecord> rows;
  rows.reserve(traj.checkpoints.size());
  for (const Checkpoint& ck : traj.checkpoints) {
    MetricsRecord r;
    r.t = ck.t;
    r.pop_loss = average_loss(arch, ck.w, acts, loss, panel, exec);
    r.esssup_dwL = esssup_output_drift(arch, ck.w, acts, loss, panel, exec);
    r.wl1 = weighted_l1_distance(arch, ck.w, final_w);
    rows.push_back(std::move(r));
  }
  return rows;
}

CouplingSeries coupling_distance(const TrainLog& finite_log, const MfTrajectory& traj,
                                 double eps) {
  if (!(eps > 0.0)) throw ConfigError("coupling_distance: eps must be positive");
  CouplingSeries out;
  const double tol = 1e-9 * std::max(1.0, traj.horizon());
  for (const WeightSnapshot& snap : finite_log.snapshots) {
    double t = static_cast<double>(snap.step) * eps;
    const Checkpoint* match = nullptr;
    for (const Checkpoint& ck : traj.checkpoints) {
      if (std::fabs(ck.t - t) <= tol) {
        match = &ck;
        break;
      }
    }
    if (t <= traj.horizon() + tol && match == nullptr)
      throw RangeError("coupling_distance: no checkpoint aligned with finite snapshot at t=" +
                       std::to_string(t));
    if (match == nullptr) continue;
    if (snap.w.depth() != match->w.depth())
      throw ShapeError("coupling_distance: layer count mismatch");
    double d = 0.0;
    for (int ell = 1; ell <= snap.w.depth(); ++ell)
      d = std::max(d, mean_abs_diff(snap.w.layer(ell), match->w.layer(ell)));
    out.t.push_back(t);
    out.dist.push_back(d);
    out.running_max.push_back(out.running_max.empty()
                                  ? d
                                  : std::max(out.running_max.back(), d));
  }
  if (out.t.empty()) throw RangeError("coupling_distance: no aligned snapshot times");
  return out;
}

GradCheckReport grad_check(const FiniteWeights& net, const Sample& sample, const LossSpec& loss,
                           double fd_h, double floor) {
  if (!(fd_h > 0.0) || !(floor > 0.0)) throw ConfigError("grad_check: bad parameters");
  net.validate();
  FinitePass pass = backward_finite(net, sample, loss);
  const ArchView arch = net.arch.view();

  // The backward pass reports per-unit update directions; the classical
  // loss gradient divides out the mean-field fan normalisations.
  FiniteWeights probe = net;
  GradCheckReport rep;
  for (int ell = 1; ell <= arch.L; ++ell) {
    double denom = ell == 1 ? static_cast<double>(arch.width(1))
                            : static_cast<double>(arch.width(ell)) *
                                  static_cast<double>(arch.width(ell - 1));
    const Matrix& dw = pass.dw.layer(ell);
    Matrix& w = probe.w.layer(ell);
    for (int r = 0; r < w.rows; ++r) {
      for (int c = 0; c < w.cols; ++c) {
        double analytic = dw.at(r, c) / denom;
        double keep = w.at(r, c);
        w.at(r, c) = keep + fd_h;
        double up = eval_loss(loss, sample.y, forward_finite(probe, sample.x)).value;
        w.at(r, c) = keep - fd_h;
        double dn = eval_loss(loss, sample.y, forward_finite(probe, sample.x)).value;
        w.at(r, c) = keep;
        double numeric = (up - dn) / (2.0 * fd_h);
        double rel = std::fabs(numeric - analytic) /
                     std::max({std::fabs(numeric), std::fabs(analytic), floor});
        if (rel > rep.max_rel_error) {
          rep.max_rel_error = rel;
          rep.worst_layer = ell;
          rep.worst_row = r;
          rep.worst_col = c;
        }
      }
    }
  }
  return rep;
}

VecD diversity_roundtrip(const MfTrajectory& traj, std::span<const Sample> panel,
                         const LossSpec& loss, const ScheduleSpec& schedules,
                         const std::vector<AuxPairState>& probes, const ExecContext& exec) {
  std::vector<AuxPairState> back =
      flow_pairs(traj, panel, loss, schedules, probes, FlowDirection::Reverse, exec);
  std::vector<AuxPairState> again =
      flow_pairs(traj, panel, loss, schedules, back, FlowDirection::Forward, exec);

  VecD errs(probes.size(), 0.0);
  for (size_t p = 0; p < probes.size(); ++p) {
    double e = 0.0;
    for (size_t c = 0; c < probes[p].left.size(); ++c)
      e = std::max(e, std::fabs(again[p].left[c] - probes[p].left[c]));
    for (size_t c = 0; c < probes[p].right.size(); ++c)
      e = std::max(e, std::fabs(again[p].right[c] - probes[p].right[c]));
    errs[p] = e;
  }
  return errs;
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& rows, int L) {
  std::ostringstream os;
  os << "t,pop_loss,esssup_dwL";
  for (int ell = 1; ell <= L; ++ell) os << ",wl1_layer_" << ell;
  os << ",coupling_dist\n";
  for (const MetricsRecord& r : rows) {
    os << format_double(r.t) << ',' << format_double(r.pop_loss) << ','
       << format_double(r.esssup_dwL);
    if (static_cast<int>(r.wl1.size()) != L)
      throw ShapeError("metrics_to_csv: wl1 width mismatch");
    for (double v : r.wl1) os << ',' << format_double(v);
    os << ',';
    if (r.coupling_dist) os << format_double(*r.coupling_dist);
    os << '\n';
  }
  return os.str();
}

}  // namespace mfnet
