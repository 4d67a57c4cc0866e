#include "mfnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfnet/container.hpp"

namespace mfnet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Strict-schema parsing: every violation is collected so a bad config is
// reported in full, not one complaint at a time.

struct ParseCtx {
  std::vector<std::string> errs;

  void err(const std::string& path, const std::string& msg) {
    errs.push_back(path + ": " + msg);
  }
};

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed, ParseCtx& p) {
  for (const auto& kv : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || kv.key() == a;
    if (!ok) p.err(path.empty() ? kv.key() : path + "." + kv.key(), "unknown key");
  }
}

const json* get_object(const json& obj, const char* key, const std::string& path, bool required,
                       ParseCtx& p) {
  if (!obj.contains(key)) {
    if (required) p.err(path + "." + key, "missing required section");
    return nullptr;
  }
  const json& v = obj.at(key);
  if (!v.is_object()) {
    p.err(path + "." + key, "must be an object");
    return nullptr;
  }
  return &v;
}

template <class T>
std::optional<T> get_number(const json& obj, const char* key, const std::string& path,
                            bool required, ParseCtx& p) {
  if (!obj.contains(key)) {
    if (required) p.err(path + "." + key, "missing required value");
    return std::nullopt;
  }
  const json& v = obj.at(key);
  if (!v.is_number()) {
    p.err(path + "." + key, "must be a number");
    return std::nullopt;
  }
  return v.get<T>();
}

std::optional<std::string> get_string(const json& obj, const char* key, const std::string& path,
                                      bool required, ParseCtx& p) {
  if (!obj.contains(key)) {
    if (required) p.err(path + "." + key, "missing required value");
    return std::nullopt;
  }
  const json& v = obj.at(key);
  if (!v.is_string()) {
    p.err(path + "." + key, "must be a string");
    return std::nullopt;
  }
  return v.get<std::string>();
}

std::optional<bool> get_bool(const json& obj, const char* key, const std::string& path,
                             bool required, ParseCtx& p) {
  if (!obj.contains(key)) {
    if (required) p.err(path + "." + key, "missing required value");
    return std::nullopt;
  }
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    p.err(path + "." + key, "must be a boolean");
    return std::nullopt;
  }
  return v.get<bool>();
}

std::optional<std::vector<double>> get_double_array(const json& obj, const char* key,
                                                   const std::string& path, bool required,
                                                   ParseCtx& p) {
  if (!obj.contains(key)) {
    if (required) p.err(path + "." + key, "missing required array");
    return std::nullopt;
  }
  const json& v = obj.at(key);
  if (!v.is_array()) {
    p.err(path + "." + key, "must be an array of numbers");
    return std::nullopt;
  }
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) {
      p.err(path + "." + key, "must contain only numbers");
      return std::nullopt;
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::optional<std::vector<int>> get_int_array(const json& obj, const char* key,
                                              const std::string& path, bool required,
                                              ParseCtx& p) {
  auto d = get_double_array(obj, key, path, required, p);
  if (!d) return std::nullopt;
  std::vector<int> out;
  for (double v : *d) {
    if (v != static_cast<double>(static_cast<int>(v))) {
      p.err(path + "." + key, "must contain only integers");
      return std::nullopt;
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

ScheduleForm parse_schedule_form(const json& obj, const std::string& path, ParseCtx& p) {
  check_keys(obj, path, {"kind", "value", "rate", "knots_t", "knots_v"}, p);
  auto kind = get_string(obj, "kind", path, true, p);
  if (!kind) return ScheduleForm::constant(1.0);
  try {
    if (*kind == "constant") {
      auto v = get_number<double>(obj, "value", path, true, p);
      return ScheduleForm::constant(v.value_or(1.0));
    }
    if (*kind == "exp_decay") {
      auto v = get_number<double>(obj, "value", path, true, p);
      auto r = get_number<double>(obj, "rate", path, true, p);
      return ScheduleForm::exp_decay(v.value_or(1.0), r.value_or(0.0));
    }
    if (*kind == "piecewise_linear") {
      auto kt = get_double_array(obj, "knots_t", path, true, p);
      auto kv = get_double_array(obj, "knots_v", path, true, p);
      if (kt && kv) return ScheduleForm::piecewise_linear(*kt, *kv);
      return ScheduleForm::constant(1.0);
    }
  } catch (const ConfigError& e) {
    p.err(path, e.what());
    return ScheduleForm::constant(1.0);
  }
  p.err(path + ".kind", "unknown schedule kind '" + *kind + "'");
  return ScheduleForm::constant(1.0);
}

ModelConfig parse_model(const json& obj, ParseCtx& p) {
  ModelConfig m;
  check_keys(obj, "model",
             {"depth", "input_dim", "widths", "hidden_activation", "output_activation", "loss",
              "schedules"},
             p);
  m.L = get_number<int>(obj, "depth", "model", true, p).value_or(0);
  m.d = get_number<int>(obj, "input_dim", "model", true, p).value_or(0);
  if (m.L < 2) p.err("model.depth", "must be >= 2");
  if (m.d < 1) p.err("model.input_dim", "must be >= 1");
  auto widths = get_int_array(obj, "widths", "model", true, p);
  if (widths) {
    m.widths = *widths;
    if (m.L >= 2 && static_cast<int>(m.widths.size()) != m.L)
      p.err("model.widths", "must list one width per layer");
    for (int w : m.widths)
      if (w < 1) p.err("model.widths", "widths must be >= 1");
    if (!m.widths.empty() && m.widths.back() != 1)
      p.err("model.widths", "output layer width must be 1");
  }
  if (auto h = get_string(obj, "hidden_activation", "model", true, p)) {
    try {
      m.hidden = act_kind_from_name(*h);
    } catch (const ConfigError& e) {
      p.err("model.hidden_activation", e.what());
    }
  }
  if (auto o = get_string(obj, "output_activation", "model", true, p)) {
    try {
      m.output = act_kind_from_name(*o);
    } catch (const ConfigError& e) {
      p.err("model.output_activation", e.what());
    }
  }
  if (const json* lo = get_object(obj, "loss", "model", true, p)) {
    check_keys(*lo, "model.loss", {"kind", "delta"}, p);
    if (auto k = get_string(*lo, "kind", "model.loss", true, p)) {
      try {
        LossKind lk = loss_kind_from_name(*k);
        if (lk == LossKind::Huber) {
          double delta = get_number<double>(*lo, "delta", "model.loss", false, p).value_or(1.0);
          if (!(delta > 0.0))
            p.err("model.loss.delta", "must be positive");
          else
            m.loss = LossSpec::huber(delta);
        } else if (lk == LossKind::LogisticNll) {
          m.loss = LossSpec::logistic_nll();
        } else {
          m.loss = LossSpec::half_squared();
        }
      } catch (const ConfigError& e) {
        p.err("model.loss.kind", e.what());
      }
    }
  }
  if (m.L >= 2) {
    m.schedules = ScheduleSpec::uniform(m.L, ScheduleForm::constant(1.0));
    if (const json* so = get_object(obj, "schedules", "model", false, p)) {
      check_keys(*so, "model.schedules", {"default", "per_layer"}, p);
      if (so->contains("default")) {
        const json& def = so->at("default");
        if (!def.is_object()) {
          p.err("model.schedules.default", "must be an object");
        } else {
          m.schedules = ScheduleSpec::uniform(m.L, parse_schedule_form(def, "model.schedules.default", p));
        }
      }
      if (so->contains("per_layer")) {
        const json& pl = so->at("per_layer");
        if (!pl.is_array() || static_cast<int>(pl.size()) != m.L) {
          p.err("model.schedules.per_layer", "must be an array with one form per layer");
        } else {
          for (int ell = 1; ell <= m.L; ++ell) {
            const json& f = pl.at(static_cast<size_t>(ell) - 1);
            if (!f.is_object()) {
              p.err("model.schedules.per_layer", "entries must be objects");
            } else {
              m.schedules.layers[static_cast<size_t>(ell) - 1] = parse_schedule_form(
                  f, "model.schedules.per_layer[" + std::to_string(ell - 1) + "]", p);
            }
          }
        }
      }
    }
  }
  return m;
}

DataConfig parse_data(const json& obj, const ModelConfig& m, ParseCtx& p) {
  DataConfig d;
  check_keys(obj, "data",
             {"source", "teacher", "half_width", "noise_sigma", "panel_size", "samples"}, p);
  auto src = get_string(obj, "source", "data", true, p);
  d.panel_size = get_number<int>(obj, "panel_size", "data", false, p).value_or(256);
  if (d.panel_size < 1) p.err("data.panel_size", "must be >= 1");
  if (!src) return d;

  if (*src == "synthetic_teacher") {
    Teacher t;
    if (const json* to = get_object(obj, "teacher", "data", true, p)) {
      check_keys(*to, "data.teacher", {"kind", "coeffs"}, p);
      auto kind = get_string(*to, "kind", "data.teacher", true, p);
      if (kind) {
        if (*kind == "tanh_linear")
          t.kind = TeacherKind::TanhLinear;
        else if (*kind == "linear")
          t.kind = TeacherKind::Linear;
        else
          p.err("data.teacher.kind", "unknown teacher kind '" + *kind + "'");
      }
      auto coeffs = get_double_array(*to, "coeffs", "data.teacher", true, p);
      if (coeffs) t.coeffs = *coeffs;
    }
    double hw = get_number<double>(obj, "half_width", "data", false, p).value_or(1.0);
    double ns = get_number<double>(obj, "noise_sigma", "data", false, p).value_or(0.0);
    if (m.d >= 1 && static_cast<int>(t.coeffs.size()) != m.d)
      p.err("data.teacher.coeffs", "must have one coefficient per input dim");
    if (!(hw > 0.0)) p.err("data.half_width", "must be positive");
    if (ns < 0.0) p.err("data.noise_sigma", "must be >= 0");
    if (p.errs.empty()) d.model = DataModel::synthetic(m.d, std::move(t), hw, ns);
    return d;
  }
  if (*src == "finite_dataset") {
    if (!obj.contains("samples")) {
      p.err("data.samples", "finite_dataset requires samples");
      return d;
    }
    const json& rows = obj.at("samples");
    if (!rows.is_array() || rows.empty()) {
      p.err("data.samples", "must be a non-empty array");
      return d;
    }
    std::vector<Sample> samples;
    for (const json& r : rows) {
      if (!r.is_array() || static_cast<int>(r.size()) != m.d + 1) {
        p.err("data.samples", "each row must hold input_dim coordinates plus a label");
        return d;
      }
      Sample s;
      for (int c = 0; c < m.d; ++c) {
        if (!r.at(static_cast<size_t>(c)).is_number()) {
          p.err("data.samples", "entries must be numbers");
          return d;
        }
        s.x.push_back(r.at(static_cast<size_t>(c)).get<double>());
      }
      s.y = r.back().get<double>();
      samples.push_back(std::move(s));
    }
    try {
      d.model = DataModel::finite(std::move(samples));
    } catch (const std::exception& e) {
      p.err("data.samples", e.what());
    }
    return d;
  }
  p.err("data.source", "unknown source '" + *src + "'");
  return d;
}

InitConfig parse_init(const json& obj, const ModelConfig& m, ParseCtx& p) {
  InitConfig ic;
  check_keys(obj, "init",
             {"scheme", "latent_dims", "latent_law", "series_terms", "gamma", "codes_seed"}, p);
  if (auto s = get_string(obj, "scheme", "init", true, p)) {
    if (*s == "bidiverse")
      ic.scheme = EmbedScheme::Bidiverse;
    else if (*s == "pseudo_iid")
      ic.scheme = EmbedScheme::PseudoIid;
    else
      p.err("init.scheme", "unknown scheme '" + *s + "'");
  }
  ic.latent.L = m.L;
  auto dims = get_int_array(obj, "latent_dims", "init", true, p);
  if (dims) {
    ic.latent.dims = *dims;
    if (m.L >= 2 && static_cast<int>(dims->size()) != m.L)
      p.err("init.latent_dims", "must list one dimension per layer");
    else if (!dims->empty()) {
      if (dims->back() != 0) p.err("init.latent_dims", "output layer dimension must be 0");
      for (size_t i = 0; i + 1 < dims->size(); ++i)
        if ((*dims)[i] < 1) p.err("init.latent_dims", "hidden dimensions must be >= 1");
      if (ic.scheme == EmbedScheme::Bidiverse && !dims->empty() && (*dims)[0] < m.d)
        p.err("init.latent_dims", "bidiverse scheme needs layer-1 dimension >= input_dim");
    }
  }
  if (auto law = get_string(obj, "latent_law", "init", false, p)) {
    if (*law == "gaussian")
      ic.latent.law = LatentLaw::Gaussian;
    else if (*law == "uniform_cube")
      ic.latent.law = LatentLaw::UniformCube;
    else
      p.err("init.latent_law", "unknown law '" + *law + "'");
  }
  ic.opts.series_terms = get_number<int>(obj, "series_terms", "init", false, p).value_or(32);
  if (ic.opts.series_terms < 1) p.err("init.series_terms", "must be >= 1");
  if (obj.contains("gamma")) {
    auto g = get_double_array(obj, "gamma", "init", false, p);
    if (g) {
      ic.opts.gamma = *g;
      if (m.L >= 2 && static_cast<int>(g->size()) != m.L)
        p.err("init.gamma", "must have one entry per layer");
    }
  }
  if (obj.contains("codes_seed")) {
    auto cs = get_number<uint64_t>(obj, "codes_seed", "init", false, p);
    if (cs) {
      ic.codes_seed = *cs;
      ic.codes_seed_set = true;
    }
  }
  return ic;
}

TrainFiniteConfig parse_train_finite(const json& obj, const std::string& path, ParseCtx& p) {
  TrainFiniteConfig t;
  check_keys(obj, path, {"eps", "steps", "log_every", "mode"}, p);
  t.eps = get_number<double>(obj, "eps", path, true, p).value_or(0.0);
  t.steps = get_number<long>(obj, "steps", path, true, p).value_or(-1);
  t.log_every = get_number<long>(obj, "log_every", path, false, p).value_or(1);
  if (!(t.eps > 0.0)) p.err(path + ".eps", "must be positive");
  if (t.steps < 0) p.err(path + ".steps", "must be >= 0");
  if (t.log_every < 1) p.err(path + ".log_every", "must be >= 1");
  if (auto mode = get_string(obj, "mode", path, false, p)) {
    if (*mode == "sgd")
      t.mode = TrainMode::Sgd;
    else if (*mode == "full_batch")
      t.mode = TrainMode::FullBatch;
    else
      p.err(path + ".mode", "unknown mode '" + *mode + "'");
  }
  return t;
}

TrainMfConfig parse_train_mf(const json& obj, const std::string& path, ParseCtx& p) {
  TrainMfConfig t;
  check_keys(obj, path, {"scheme", "step_size", "steps", "checkpoint_every"}, p);
  if (auto s = get_string(obj, "scheme", path, false, p)) {
    if (*s == "euler")
      t.scheme = Scheme::Euler;
    else if (*s == "rk4")
      t.scheme = Scheme::Rk4;
    else
      p.err(path + ".scheme", "unknown scheme '" + *s + "'");
  }
  t.step_size = get_number<double>(obj, "step_size", path, true, p).value_or(0.0);
  t.steps = get_number<long>(obj, "steps", path, true, p).value_or(-1);
  t.checkpoint_every = get_number<long>(obj, "checkpoint_every", path, false, p).value_or(1);
  if (!(t.step_size > 0.0)) p.err(path + ".step_size", "must be positive");
  if (t.steps < 0) p.err(path + ".steps", "must be >= 0");
  if (t.checkpoint_every < 1) p.err(path + ".checkpoint_every", "must be >= 1");
  return t;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const ConfigOverrides& overrides) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.out_dir) j["out_dir"] = *overrides.out_dir;
  if (overrides.threads) j["threads"] = *overrides.threads;
  if (overrides.deterministic) j["deterministic"] = *overrides.deterministic;

  ParseCtx p;
  check_keys(j, "",
             {"kind", "seed", "out_dir", "threads", "deterministic", "model", "data", "init",
              "train_finite", "train_mf", "couple", "diversity", "grad_check"},
             p);

  ExperimentConfig cfg;
  auto kind = get_string(j, "kind", "config", true, p);
  const char* section = nullptr;
  if (kind) {
    if (*kind == "train_finite") {
      cfg.kind = RunKind::TrainFinite;
      section = "train_finite";
    } else if (*kind == "train_mf") {
      cfg.kind = RunKind::TrainMf;
      section = "train_mf";
    } else if (*kind == "couple") {
      cfg.kind = RunKind::Couple;
      section = "couple";
    } else if (*kind == "diversity") {
      cfg.kind = RunKind::Diversity;
      section = "diversity";
    } else if (*kind == "grad_check") {
      cfg.kind = RunKind::GradCheck;
      section = "grad_check";
    } else {
      p.err("config.kind", "unknown kind '" + *kind + "'");
    }
  }
  cfg.seed = get_number<uint64_t>(j, "seed", "config", false, p).value_or(0);
  cfg.out_dir = get_string(j, "out_dir", "config", true, p).value_or("");
  if (cfg.out_dir.empty() && j.contains("out_dir")) p.err("config.out_dir", "must be non-empty");
  cfg.threads = get_number<int>(j, "threads", "config", false, p).value_or(1);
  if (cfg.threads < 1) p.err("config.threads", "must be >= 1");
  cfg.deterministic = get_bool(j, "deterministic", "config", false, p).value_or(true);

  if (const json* mo = get_object(j, "model", "config", true, p)) cfg.model = parse_model(*mo, p);
  if (const json* dobj = get_object(j, "data", "config", true, p))
    cfg.data = parse_data(*dobj, cfg.model, p);
  if (const json* io = get_object(j, "init", "config", true, p))
    cfg.init = parse_init(*io, cfg.model, p);

  for (const char* s : {"train_finite", "train_mf", "couple", "diversity", "grad_check"}) {
    if (j.contains(s) && (section == nullptr || std::string(s) != section))
      p.err(std::string("config.") + s, "section does not match kind");
  }

  if (section != nullptr) {
    const json* so = get_object(j, section, "config", true, p);
    if (so) {
      const std::string path = std::string("config.") + section;
      switch (cfg.kind) {
        case RunKind::TrainFinite:
          cfg.train_finite = parse_train_finite(*so, path, p);
          break;
        case RunKind::TrainMf:
          cfg.train_mf = parse_train_mf(*so, path, p);
          break;
        case RunKind::Couple: {
          check_keys(*so, path, {"finite", "mf"}, p);
          if (const json* fo = get_object(*so, "finite", path, true, p))
            cfg.couple_finite = parse_train_finite(*fo, path + ".finite", p);
          if (const json* mo2 = get_object(*so, "mf", path, true, p))
            cfg.couple_mf = parse_train_mf(*mo2, path + ".mf", p);
          if (cfg.couple_finite && cfg.couple_mf) {
            double tf = static_cast<double>(cfg.couple_finite->steps) * cfg.couple_finite->eps;
            double tm = static_cast<double>(cfg.couple_mf->steps) * cfg.couple_mf->step_size;
            if (std::fabs(tf - tm) > 1e-9 * std::max(1.0, std::max(tf, tm)))
              p.err(path, "finite and mean-field horizons differ");
          }
          break;
        }
        case RunKind::Diversity: {
          check_keys(*so, path,
                     {"mf", "layers", "probes_per_layer", "probe_scale", "probe_seed"}, p);
          DiversityConfig dc;
          if (const json* mo3 = get_object(*so, "mf", path, true, p))
            dc.mf = parse_train_mf(*mo3, path + ".mf", p);
          auto layers = get_int_array(*so, "layers", path, true, p);
          if (layers) {
            dc.layers = *layers;
            if (dc.layers.empty()) p.err(path + ".layers", "must be non-empty");
            for (int ell : dc.layers)
              if (ell < 1 || ell > cfg.model.L - 1)
                p.err(path + ".layers", "entries must lie in 1..depth-1");
          }
          dc.probes_per_layer =
              get_number<int>(*so, "probes_per_layer", path, false, p).value_or(8);
          if (dc.probes_per_layer < 1) p.err(path + ".probes_per_layer", "must be >= 1");
          dc.probe_scale = get_number<double>(*so, "probe_scale", path, false, p).value_or(1.0);
          if (!(dc.probe_scale > 0.0)) p.err(path + ".probe_scale", "must be positive");
          dc.probe_seed = get_number<uint64_t>(*so, "probe_seed", path, false, p)
                              .value_or(cfg.seed ^ 0xD1CEull);
          cfg.diversity = std::move(dc);
          break;
        }
        case RunKind::GradCheck: {
          check_keys(*so, path, {"instances", "fd_h", "max_depth", "max_width", "instance_seed"},
                     p);
          GradCheckConfig gc;
          gc.instances = get_number<int>(*so, "instances", path, false, p).value_or(10);
          gc.fd_h = get_number<double>(*so, "fd_h", path, false, p).value_or(1e-6);
          gc.max_depth = get_number<int>(*so, "max_depth", path, false, p).value_or(4);
          gc.max_width = get_number<int>(*so, "max_width", path, false, p).value_or(6);
          gc.instance_seed = get_number<uint64_t>(*so, "instance_seed", path, false, p)
                                 .value_or(cfg.seed ^ 0x9CADull);
          if (gc.instances < 1) p.err(path + ".instances", "must be >= 1");
          if (!(gc.fd_h > 0.0)) p.err(path + ".fd_h", "must be positive");
          if (gc.max_depth < 2) p.err(path + ".max_depth", "must be >= 2");
          if (gc.max_width < 1) p.err(path + ".max_width", "must be >= 1");
          cfg.grad_check = std::move(gc);
          break;
        }
      }
    }
  }

  // The convergence diagnostics attached to mean-field runs presume a unit
  // output-layer schedule.
  if (cfg.kind == RunKind::TrainMf && cfg.model.L >= 2 && p.errs.empty()) {
    if (!cfg.model.schedules.layer_is_unit(cfg.model.L))
      p.err("model.schedules", "output-layer schedule must be constant 1 for train_mf runs");
  }

  if (!p.errs.empty()) {
    std::string msg = "configuration invalid:";
    for (const std::string& e : p.errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }

  cfg.echo = j.dump(2);
  return cfg;
}

// ---------------------------------------------------------------------------
// Run orchestration.

namespace {

std::string iso_utc(std::chrono::system_clock::time_point tp) {
  std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << content;
  if (!os) throw ConfigError("write to '" + path + "' failed");
}

struct Built {
  ActivationStack acts;
  std::vector<Sample> panel;
  NeuronalEmbedding emb;
  LatentCodes codes;
  CoupledPair pair;
};

Built build_instance(const ExperimentConfig& cfg) {
  Built b;
  b.acts = ActivationStack::make(cfg.model.L, cfg.model.hidden, cfg.model.output);
  CounterRng root = CounterRng::from_seed(cfg.seed);
  b.panel = make_panel(cfg.data.model, cfg.data.panel_size, root.child(0xDA7Aull));
  b.emb = build_embedding(cfg.init.scheme, cfg.model.L, cfg.model.d, cfg.init.latent, cfg.seed,
                          cfg.init.opts);
  uint64_t codes_seed =
      cfg.init.codes_seed_set ? cfg.init.codes_seed : cfg.seed ^ 0xC0DE5EEDull;
  b.codes = sample_codes(b.emb, cfg.model.widths, codes_seed);
  b.pair = instantiate_coupled(b.emb, b.codes, b.acts);
  return b;
}

std::vector<MetricsRecord> finite_log_metrics(const TrainLog& log, const NetworkArch& arch,
                                              const ActivationStack& acts,
                                              std::span<const Sample> panel,
                                              const LossSpec& loss, double eps,
                                              const ExecContext& exec) {
  std::vector<MetricsRecord> rows;
  const WeightMatrices& final_w = log.snapshots.back().w;
  for (const WeightSnapshot& s : log.snapshots) {
    MetricsRecord r;
    r.t = static_cast<double>(s.step) * eps;
    r.pop_loss = average_loss(arch.view(), s.w, acts, loss, panel, exec);
    r.esssup_dwL = esssup_output_drift(arch.view(), s.w, acts, loss, panel, exec);
    r.wl1 = weighted_l1_distance(arch.view(), s.w, final_w);
    rows.push_back(std::move(r));
  }
  return rows;
}

TextContainer finite_log_to_container(const TrainLog& log, const ExperimentConfig& cfg) {
  TextContainer c;
  c.set_meta("kind", "finite_train");
  std::string widths;
  for (size_t i = 0; i < cfg.model.widths.size(); ++i) {
    if (i) widths += ' ';
    widths += std::to_string(cfg.model.widths[i]);
  }
  c.set_meta("counts", widths);
  c.set_meta("input_dim", std::to_string(cfg.model.d));
  c.set_meta("hidden_act", act_kind_name(cfg.model.hidden));
  c.set_meta("output_act", act_kind_name(cfg.model.output));
  for (const WeightSnapshot& s : log.snapshots)
    weights_to_records(c, "step_" + std::to_string(s.step) + "/", s.w);
  return c;
}

std::string container_to_string(const TextContainer& c) {
  std::ostringstream os;
  c.write(os);
  return os.str();
}

}  // namespace

std::string hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open '" + path + "' for hashing");
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

RunOutput run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::system_clock::now();
  const std::string started = iso_utc(t0);
  fs::create_directories(cfg.out_dir);
  const ExecContext exec = cfg.exec();

  RunOutput out;
  out.out_dir = cfg.out_dir;
  std::string status = "ok";
  std::optional<OverflowError> overflow;

  auto emit = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(cfg.out_dir) / name).string();
    write_text_file(path, content);
    out.files.emplace_back(name, hash_file(path));
  };

  try {
    switch (cfg.kind) {
      case RunKind::TrainFinite: {
        Built b = build_instance(cfg);
        const TrainFiniteConfig& tc = *cfg.train_finite;
        CounterRng srng = CounterRng::from_seed(cfg.seed).child(0x5D6Dull);
        FiniteWeights net = b.pair.finite;
        TrainLog log = train_finite(net, cfg.data.model, cfg.model.loss, cfg.model.schedules,
                                    tc.eps, tc.steps, tc.log_every, srng, tc.mode, b.panel, exec);
        emit("finite_snapshots.mfnl", container_to_string(finite_log_to_container(log, cfg)));
        auto rows = finite_log_metrics(log, net.arch, net.acts, b.panel, cfg.model.loss, tc.eps,
                                       exec);
        emit("metrics.csv", metrics_to_csv(rows, cfg.model.L));
        out.summary = "final_loss=" + format_double(log.final_loss);
        break;
      }
      case RunKind::TrainMf: {
        Built b = build_instance(cfg);
        const TrainMfConfig& tc = *cfg.train_mf;
        ParticleSystem ps = b.pair.particles;
        MfTrajectory traj = integrate_mf(ps, b.panel, cfg.model.loss, cfg.model.schedules,
                                         tc.scheme, tc.step_size, tc.steps, tc.checkpoint_every,
                                         exec);
        emit("trajectory.mfnl", container_to_string(trajectory_to_container(traj)));
        auto rows = convergence_metrics(traj, b.panel, cfg.model.loss, exec);
        emit("metrics.csv", metrics_to_csv(rows, cfg.model.L));
        out.summary = "final_loss=" + format_double(rows.back().pop_loss) +
                      " esssup_dwL=" + format_double(rows.back().esssup_dwL);
        break;
      }
      case RunKind::Couple: {
        Built b = build_instance(cfg);
        const TrainFiniteConfig& fc = *cfg.couple_finite;
        const TrainMfConfig& mc = *cfg.couple_mf;
        CounterRng srng = CounterRng::from_seed(cfg.seed).child(0x5D6Dull);
        FiniteWeights net = b.pair.finite;
        TrainLog log = train_finite(net, cfg.data.model, cfg.model.loss, cfg.model.schedules,
                                    fc.eps, fc.steps, fc.log_every, srng, fc.mode, b.panel, exec);
        ParticleSystem ps = b.pair.particles;
        MfTrajectory traj = integrate_mf(ps, b.panel, cfg.model.loss, cfg.model.schedules,
                                         mc.scheme, mc.step_size, mc.steps, mc.checkpoint_every,
                                         exec);
        emit("finite_snapshots.mfnl", container_to_string(finite_log_to_container(log, cfg)));
        emit("trajectory.mfnl", container_to_string(trajectory_to_container(traj)));
        CouplingSeries cs = coupling_distance(log, traj, fc.eps);
        auto rows = convergence_metrics(traj, b.panel, cfg.model.loss, exec);
        for (MetricsRecord& r : rows) {
          for (size_t i = 0; i < cs.t.size(); ++i)
            if (std::fabs(cs.t[i] - r.t) <= 1e-9 * std::max(1.0, traj.horizon()))
              r.coupling_dist = cs.dist[i];
        }
        emit("metrics.csv", metrics_to_csv(rows, cfg.model.L));
        out.summary = "max_coupling_dist=" + format_double(cs.running_max.back());
        break;
      }
      case RunKind::Diversity: {
        Built b = build_instance(cfg);
        const DiversityConfig& dc = *cfg.diversity;
        ParticleSystem ps = b.pair.particles;
        MfTrajectory traj =
            integrate_mf(ps, b.panel, cfg.model.loss, cfg.model.schedules, dc.mf.scheme,
                         dc.mf.step_size, dc.mf.steps, dc.mf.checkpoint_every, exec);
        emit("trajectory.mfnl", container_to_string(trajectory_to_container(traj)));

        std::vector<AuxPairState> probes;
        CounterRng prng = CounterRng::from_seed(dc.probe_seed);
        for (int ell : dc.layers) {
          CounterRng lr = prng.child(static_cast<uint64_t>(ell));
          for (int q = 0; q < dc.probes_per_layer; ++q) {
            CounterRng qr = lr.child(static_cast<uint64_t>(q));
            AuxPairState probe;
            probe.layer = ell;
            size_t nl = ell == 1 ? static_cast<size_t>(cfg.model.d)
                                 : static_cast<size_t>(cfg.model.widths[ell - 2]);
            size_t nr = static_cast<size_t>(cfg.model.widths[ell]);
            probe.left.resize(nl);
            probe.right.resize(nr);
            for (size_t i = 0; i < nl; ++i)
              probe.left[i] = dc.probe_scale * qr.normal(static_cast<uint64_t>(i));
            for (size_t i = 0; i < nr; ++i)
              probe.right[i] = dc.probe_scale * qr.normal(0x10000ull + i);
            probes.push_back(std::move(probe));
          }
        }
        VecD errs = diversity_roundtrip(traj, b.panel, cfg.model.loss, cfg.model.schedules,
                                        probes, exec);
        std::ostringstream csv;
        csv << "layer,probe,roundtrip_err\n";
        double worst = 0.0;
        for (size_t i = 0; i < probes.size(); ++i) {
          csv << probes[i].layer << ',' << (i % static_cast<size_t>(dc.probes_per_layer)) << ','
              << format_double(errs[i]) << '\n';
          worst = std::max(worst, errs[i]);
        }
        emit("roundtrip.csv", csv.str());
        out.summary = "max_roundtrip_err=" + format_double(worst);
        break;
      }
      case RunKind::GradCheck: {
        const GradCheckConfig& gc = *cfg.grad_check;
        std::ostringstream csv;
        csv << "instance,depth,input_dim,max_rel_error,layer,row,col\n";
        double worst = 0.0;
        CounterRng root = CounterRng::from_seed(gc.instance_seed);
        for (int i = 0; i < gc.instances; ++i) {
          CounterRng ir = root.child(static_cast<uint64_t>(i));
          int L = 2 + static_cast<int>(ir.bits(0) % static_cast<uint64_t>(gc.max_depth - 1));
          int d = 1 + static_cast<int>(ir.bits(1) % 4);
          NetworkArch arch;
          arch.L = L;
          arch.d = d;
          arch.widths.resize(static_cast<size_t>(L));
          for (int ell = 1; ell < L; ++ell)
            arch.widths[static_cast<size_t>(ell) - 1] =
                1 + static_cast<int>(ir.bits(10 + static_cast<uint64_t>(ell)) %
                                     static_cast<uint64_t>(gc.max_width));
          arch.widths[static_cast<size_t>(L) - 1] = 1;
          ActKind hidden = ir.bits(2) % 2 == 0 ? ActKind::Tanh : ActKind::Logistic;
          FiniteWeights net =
              FiniteWeights::zeros(arch, ActivationStack::make(L, hidden, ActKind::Identity));
          CounterRng wr = ir.child(3);
          uint64_t ctr = 0;
          for (Matrix& m : net.w.mats)
            for (double& v : m.a) v = 0.8 * wr.normal(ctr++);
          LossSpec loss = ir.bits(4) % 2 == 0 ? LossSpec::huber(1.0) : LossSpec::half_squared();
          Sample s;
          CounterRng xr = ir.child(5);
          s.x.resize(static_cast<size_t>(d));
          for (int c = 0; c < d; ++c) s.x[static_cast<size_t>(c)] = xr.normal(static_cast<uint64_t>(c));
          s.y = xr.normal(1000);
          GradCheckReport rep = grad_check(net, s, loss, gc.fd_h);
          csv << i << ',' << L << ',' << d << ',' << format_double(rep.max_rel_error) << ','
              << rep.worst_layer << ',' << rep.worst_row << ',' << rep.worst_col << '\n';
          worst = std::max(worst, rep.max_rel_error);
        }
        emit("gradcheck.csv", csv.str());
        out.summary = "max_rel_error=" + format_double(worst);
        break;
      }
    }
  } catch (const OverflowError& e) {
    status = "overflow";
    overflow = e;
  }

  const auto t1 = std::chrono::system_clock::now();
  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = json::parse(cfg.echo);
  manifest["started_utc"] = started;
  manifest["finished_utc"] = iso_utc(t1);
  manifest["duration_seconds"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0;
  manifest["status"] = status;
  if (overflow) manifest["error"] = overflow->what();
  manifest["summary"] = out.summary;
  json outputs = json::object();
  for (const auto& f : out.files) {
    json e;
    e["fnv1a64"] = f.second;
    e["bytes"] = static_cast<long>(fs::file_size(fs::path(cfg.out_dir) / f.first));
    outputs[f.first] = e;
  }
  manifest["outputs"] = outputs;

  out.manifest_path = (fs::path(cfg.out_dir) / "manifest.json").string();
  write_text_file(out.manifest_path, manifest.dump(2) + "\n");

  if (overflow) throw *overflow;
  return out;
}

RunOutput replay_run(const std::string& manifest_path, const std::string& out_dir,
                     std::vector<ReplayMismatch>* mismatches) {
  std::ifstream is(manifest_path, std::ios::binary);
  if (!is) throw ConfigError("replay: cannot open manifest '" + manifest_path + "'");
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("replay: invalid manifest JSON: ") + e.what());
  }
  if (!manifest.contains("config")) throw ConfigError("replay: manifest has no config echo");

  ConfigOverrides ov;
  ov.out_dir = out_dir;
  ExperimentConfig cfg = parse_experiment_config(manifest["config"].dump(), ov);
  RunOutput out = run_experiment(cfg);

  if (mismatches != nullptr && manifest.contains("outputs")) {
    for (const auto& kv : manifest["outputs"].items()) {
      std::string want = kv.value().value("fnv1a64", "");
      std::string got;
      for (const auto& f : out.files)
        if (f.first == kv.key()) got = f.second;
      if (want != got) mismatches->push_back({kv.key(), want, got});
    }
  }
  return out;
}

}  // namespace mfnet
