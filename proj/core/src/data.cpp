#include "mfnet/data.hpp"

#include <algorithm>
#include <cmath>

#include "mfnet/reduce.hpp"

namespace mfnet {

double Teacher::eval(const std::vector<double>& x) const {
  if (coeffs.size() != x.size()) throw ShapeError("Teacher: coefficient/input dim mismatch");
  double s = pairwise_dot(coeffs.data(), x.data(), x.size());
  switch (kind) {
    case TeacherKind::TanhLinear: return std::tanh(s);
    case TeacherKind::Linear: return s;
  }
  throw DomainError("Teacher: unknown kind");
}

DataModel DataModel::synthetic(int dim, Teacher teacher, double half_width, double noise_sigma) {
  if (dim < 1) throw ConfigError("DataModel: input_dim must be >= 1");
  if (!(half_width > 0.0)) throw ConfigError("DataModel: half_width must be positive");
  if (noise_sigma < 0.0) throw ConfigError("DataModel: noise_sigma must be >= 0");
  if (static_cast<int>(teacher.coeffs.size()) != dim)
    throw ShapeError("DataModel: teacher coefficient count must equal input_dim");
  DataModel d;
  d.source = DataSource::SyntheticTeacher;
  d.input_dim = dim;
  d.teacher = std::move(teacher);
  d.half_width = half_width;
  d.noise_sigma = noise_sigma;
  d.input_bound = half_width * std::sqrt(static_cast<double>(dim));
  return d;
}

DataModel DataModel::finite(std::vector<Sample> samples) {
  if (samples.empty()) throw ConfigError("DataModel: finite dataset must not be empty");
  DataModel d;
  d.source = DataSource::FiniteDataset;
  d.input_dim = static_cast<int>(samples.front().x.size());
  if (d.input_dim < 1) throw ConfigError("DataModel: samples must have >= 1 input coordinate");
  double b = 0.0;
  for (const Sample& s : samples) {
    if (static_cast<int>(s.x.size()) != d.input_dim)
      throw ShapeError("DataModel: inconsistent sample dimensions");
    double n2 = 0.0;
    for (double v : s.x) {
      if (!std::isfinite(v)) throw DomainError("DataModel: non-finite input coordinate");
      n2 += v * v;
    }
    if (!std::isfinite(s.y)) throw DomainError("DataModel: non-finite label");
    b = std::max(b, std::sqrt(n2));
  }
  d.input_bound = b;
  d.samples = std::move(samples);
  return d;
}

Sample draw_sample(const DataModel& data, const CounterRng& rng, uint64_t k) {
  if (data.source == DataSource::FiniteDataset) {
    // Uniform index into the dataset.
    size_t n = data.samples.size();
    size_t idx = static_cast<size_t>(rng.bits(k) % n);
    return data.samples[idx];
  }
  Sample s;
  s.x.resize(static_cast<size_t>(data.input_dim));
  CounterRng xs = rng.child(1);
  for (int j = 0; j < data.input_dim; ++j) {
    double u = xs.u01(k * static_cast<uint64_t>(data.input_dim) + static_cast<uint64_t>(j));
    s.x[static_cast<size_t>(j)] = data.half_width * (2.0 * u - 1.0);
  }
  s.y = data.teacher.eval(s.x);
  if (data.noise_sigma > 0.0) s.y += data.noise_sigma * rng.child(2).normal(k);
  return s;
}

std::vector<Sample> make_panel(const DataModel& data, int n, const CounterRng& rng) {
  if (data.source == DataSource::FiniteDataset) return data.samples;
  if (n < 1) throw ConfigError("make_panel: need at least one point");
  std::vector<Sample> panel(static_cast<size_t>(n));
  CounterRng noise = rng.child(3);
  for (int i = 0; i < n; ++i) {
    Sample& s = panel[static_cast<size_t>(i)];
    s.x.resize(static_cast<size_t>(data.input_dim));
    for (int j = 0; j < data.input_dim; ++j) {
      double u = radical_inverse(static_cast<uint64_t>(i) + 1, halton_base(j));
      s.x[static_cast<size_t>(j)] = data.half_width * (2.0 * u - 1.0);
    }
    s.y = data.teacher.eval(s.x);
    if (data.noise_sigma > 0.0) s.y += data.noise_sigma * noise.normal(static_cast<uint64_t>(i));
  }
  return panel;
}

}  // namespace mfnet
