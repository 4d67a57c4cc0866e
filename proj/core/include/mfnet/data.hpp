#pragma once

#include <string>
#include <vector>

#include "mfnet/common.hpp"
#include "mfnet/rng.hpp"

namespace mfnet {

struct Sample {
  std::vector<double> x;
  double y = 0.0;
};

enum class TeacherKind { TanhLinear, Linear };

/// Scalar target function of the input.  tanh_linear: tanh(<coeffs, x>).
struct Teacher {
  TeacherKind kind = TeacherKind::TanhLinear;
  std::vector<double> coeffs;

  double eval(const std::vector<double>& x) const;
};

enum class DataSource { FiniteDataset, SyntheticTeacher };

/// Input and label law.  Synthetic draws are uniform on the cube
/// [-half_width, half_width]^d with labels teacher(x) + noise; finite
/// datasets replay stored samples.  Inputs are bounded by construction and
/// validated against `input_bound`.
struct DataModel {
  DataSource source = DataSource::SyntheticTeacher;
  int input_dim = 0;
  double input_bound = 0.0;  // Euclidean bound every input satisfies

  // synthetic_teacher
  Teacher teacher;
  double half_width = 1.0;
  double noise_sigma = 0.0;

  // finite_dataset
  std::vector<Sample> samples;

  static DataModel synthetic(int dim, Teacher teacher, double half_width,
                             double noise_sigma = 0.0);
  static DataModel finite(std::vector<Sample> samples);
};

/// k-th sample of the stream attached to `rng`.  Pure in (rng key, k).
Sample draw_sample(const DataModel& data, const CounterRng& rng, uint64_t k);

/// Deterministic evaluation panel: the whole dataset for finite sources, a
/// Halton low-discrepancy design for synthetic ones (noise, if any, drawn
/// from `rng`).  Averages over this panel realise expectations over the
/// data law.
std::vector<Sample> make_panel(const DataModel& data, int n, const CounterRng& rng);

}  // namespace mfnet
