#include "mfnet/container.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfnet/activation.hpp"

namespace mfnet {

namespace {

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  return true;
}

double parse_double(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + tok.size()) throw ConfigError("container: bad numeric token '" + tok + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void TextContainer::set_meta(const std::string& key, const std::string& value) {
  if (!valid_token(key)) throw ConfigError("container: invalid meta key");
  if (value.find('\n') != std::string::npos || value.find('\r') != std::string::npos)
    throw ConfigError("container: meta value must be a single line");
  for (auto& kv : meta) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

const std::string& TextContainer::get_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return kv.second;
  throw ConfigError("container: missing meta key '" + key + "'");
}

bool TextContainer::has_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return true;
  return false;
}

void TextContainer::add_record(const std::string& name, Matrix m) {
  if (!valid_token(name)) throw ConfigError("container: invalid record name");
  if (has_record(name)) throw ConfigError("container: duplicate record '" + name + "'");
  records.emplace_back(name, std::move(m));
}

const Matrix& TextContainer::record(const std::string& name) const {
  for (const auto& r : records)
    if (r.first == name) return r.second;
  throw ConfigError("container: missing record '" + name + "'");
}

bool TextContainer::has_record(const std::string& name) const {
  for (const auto& r : records)
    if (r.first == name) return true;
  return false;
}

void TextContainer::write(std::ostream& os) const {
  os << "mfnl 1\n";
  for (const auto& kv : meta) os << "meta " << kv.first << ' ' << kv.second << '\n';
  for (const auto& r : records) {
    const Matrix& m = r.second;
    os << "record " << r.first << ' ' << m.rows << ' ' << m.cols << '\n';
    for (int i = 0; i < m.rows; ++i) {
      const double* row = m.row(i);
      for (int j = 0; j < m.cols; ++j) {
        if (j) os << ' ';
        os << format_double(row[j]);
      }
      os << '\n';
    }
  }
  os << "end\n";
}

void TextContainer::write_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("container: cannot open '" + path + "' for writing");
  write(os);
  if (!os) throw ConfigError("container: write to '" + path + "' failed");
}

TextContainer TextContainer::read(std::istream& is) {
  TextContainer c;
  std::string line;
  if (!std::getline(is, line) || line != "mfnl 1")
    throw ConfigError("container: missing or unsupported header");

  bool ended = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      if (!valid_token(key)) throw ConfigError("container: malformed meta line");
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.meta.emplace_back(key, value);
    } else if (tag == "record") {
      std::string name;
      long rows = -1, cols = -1;
      ls >> name >> rows >> cols;
      if (!valid_token(name) || rows < 0 || cols < 0 || ls.fail())
        throw ConfigError("container: malformed record header");
      Matrix m(static_cast<int>(rows), static_cast<int>(cols));
      for (long i = 0; i < rows; ++i) {
        if (!std::getline(is, line))
          throw ConfigError("container: truncated record '" + name + "'");
        std::istringstream rs(line);
        std::string tok;
        for (long j = 0; j < cols; ++j) {
          if (!(rs >> tok))
            throw ConfigError("container: short row in record '" + name + "'");
          m.at(static_cast<int>(i), static_cast<int>(j)) = parse_double(tok);
        }
        if (rs >> tok) throw ConfigError("container: excess values in record '" + name + "'");
      }
      c.add_record(name, std::move(m));
    } else if (tag == "end") {
      ended = true;
      break;
    } else {
      throw ConfigError("container: unknown line tag '" + tag + "'");
    }
  }
  if (!ended) throw ConfigError("container: missing end marker");
  return c;
}

TextContainer TextContainer::read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("container: cannot open '" + path + "'");
  return read(is);
}

void weights_to_records(TextContainer& c, const std::string& prefix, const WeightMatrices& w) {
  for (int ell = 1; ell <= w.depth(); ++ell)
    c.add_record(prefix + "layer_" + std::to_string(ell), w.layer(ell));
}

WeightMatrices weights_from_records(const TextContainer& c, const std::string& prefix, int L) {
  WeightMatrices w;
  for (int ell = 1; ell <= L; ++ell)
    w.mats.push_back(c.record(prefix + "layer_" + std::to_string(ell)));
  return w;
}

namespace {

std::string ints_to_string(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> ints_from_string(const std::string& s) {
  std::istringstream is(s);
  std::vector<int> v;
  int x;
  while (is >> x) v.push_back(x);
  return v;
}

}  // namespace

TextContainer trajectory_to_container(const MfTrajectory& traj) {
  TextContainer c;
  c.set_meta("kind", "mf_trajectory");
  c.set_meta("counts", ints_to_string(traj.counts));
  c.set_meta("input_dim", std::to_string(traj.d));
  c.set_meta("hidden_act", act_kind_name(traj.hidden));
  c.set_meta("output_act", act_kind_name(traj.output));
  c.set_meta("scheme", traj.scheme == Scheme::Euler ? "euler" : "rk4");
  c.set_meta("step_size", format_double(traj.h));
  c.set_meta("steps", std::to_string(traj.steps));
  c.set_meta("checkpoint_every", std::to_string(traj.checkpoint_every));
  for (const Checkpoint& ck : traj.checkpoints)
    weights_to_records(c, "chk_" + std::to_string(ck.step) + "/", ck.w);
  return c;
}

MfTrajectory trajectory_from_container(const TextContainer& c) {
  if (c.get_meta("kind") != "mf_trajectory")
    throw ConfigError("container: not a trajectory container");
  MfTrajectory traj;
  traj.counts = ints_from_string(c.get_meta("counts"));
  traj.d = std::stoi(c.get_meta("input_dim"));
  traj.hidden = act_kind_from_name(c.get_meta("hidden_act"));
  traj.output = act_kind_from_name(c.get_meta("output_act"));
  const std::string& sch = c.get_meta("scheme");
  if (sch == "euler")
    traj.scheme = Scheme::Euler;
  else if (sch == "rk4")
    traj.scheme = Scheme::Rk4;
  else
    throw ConfigError("container: unknown scheme '" + sch + "'");
  traj.h = parse_double(c.get_meta("step_size"));
  traj.steps = std::stol(c.get_meta("steps"));
  traj.checkpoint_every = std::stol(c.get_meta("checkpoint_every"));

  const int L = static_cast<int>(traj.counts.size());
  std::vector<long> steps_seen;
  for (const auto& r : c.records) {
    const std::string& name = r.first;
    if (name.rfind("chk_", 0) != 0) continue;
    size_t slash = name.find('/');
    if (slash == std::string::npos) continue;
    long step = std::stol(name.substr(4, slash - 4));
    bool seen = false;
    for (long s : steps_seen) seen = seen || s == step;
    if (!seen) steps_seen.push_back(step);
  }
  std::sort(steps_seen.begin(), steps_seen.end());
  for (long step : steps_seen) {
    Checkpoint ck;
    ck.step = step;
    ck.t = static_cast<double>(step) * traj.h;
    ck.w = weights_from_records(c, "chk_" + std::to_string(step) + "/", L);
    traj.checkpoints.push_back(std::move(ck));
  }
  if (traj.checkpoints.empty()) throw ConfigError("container: trajectory has no checkpoints");
  return traj;
}

}  // namespace mfnet
