#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mfnet/matrix.hpp"
#include "mfnet/mf_system.hpp"

namespace mfnet {

/// Plain-text container for numeric state: ordered meta lines plus named
/// row-major matrix records, every value printed with 17 significant
/// digits so doubles round-trip exactly.  Layout:
///
///   mfnl 1
///   meta <key> <value...>
///   record <name> <rows> <cols>
///   <rows lines of cols values>
///   end
struct TextContainer {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Matrix>> records;

  void set_meta(const std::string& key, const std::string& value);
  const std::string& get_meta(const std::string& key) const;
  bool has_meta(const std::string& key) const;

  void add_record(const std::string& name, Matrix m);
  const Matrix& record(const std::string& name) const;
  bool has_record(const std::string& name) const;

  void write(std::ostream& os) const;
  void write_file(const std::string& path) const;
  static TextContainer read(std::istream& is);
  static TextContainer read_file(const std::string& path);
};

std::string format_double(double v);

/// Snapshot helpers: one record per layer under `<prefix>layer_<ell>`.
void weights_to_records(TextContainer& c, const std::string& prefix, const WeightMatrices& w);
WeightMatrices weights_from_records(const TextContainer& c, const std::string& prefix, int L);

TextContainer trajectory_to_container(const MfTrajectory& traj);
MfTrajectory trajectory_from_container(const TextContainer& c);

}  // namespace mfnet
