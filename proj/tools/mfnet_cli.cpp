// Command-line front end: runs experiment configs and replays manifests.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical overflow
// during integration/training, 1 anything else (including replay
// mismatches).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mfnet/experiment.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  int threads = 0;
  bool deterministic = true;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* det_opt = nullptr;
};

void attach_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", o.out_dir, "output directory (overrides config)");
  o.seed_opt = cmd->add_option("--seed", o.seed, "seed override");
  o.threads_opt = cmd->add_option("--threads", o.threads, "reduction fan-out override");
  o.det_opt = cmd->add_flag("--deterministic,!--no-deterministic", o.deterministic,
                            "force the fixed-shape reduction path");
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw mfnet::ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

const char* kind_name(mfnet::RunKind k) {
  switch (k) {
    case mfnet::RunKind::TrainFinite: return "train_finite";
    case mfnet::RunKind::TrainMf: return "train_mf";
    case mfnet::RunKind::Couple: return "couple";
    case mfnet::RunKind::Diversity: return "diversity";
    case mfnet::RunKind::GradCheck: return "grad_check";
  }
  return "?";
}

int run_kind(const CommonOpts& o, mfnet::RunKind expected) {
  mfnet::ConfigOverrides ov;
  if (!o.out_dir.empty()) ov.out_dir = o.out_dir;
  if (o.seed_opt->count() > 0) ov.seed = o.seed;
  if (o.threads_opt->count() > 0) ov.threads = o.threads;
  if (o.det_opt->count() > 0) ov.deterministic = o.deterministic;

  mfnet::ExperimentConfig cfg = mfnet::parse_experiment_config(read_file(o.config_path), ov);
  if (cfg.kind != expected)
    throw mfnet::ConfigError(std::string("config kind '") + kind_name(cfg.kind) +
                             "' does not match subcommand '" + kind_name(expected) + "'");
  mfnet::RunOutput out = mfnet::run_experiment(cfg);
  std::cout << "wrote " << out.manifest_path << "\n";
  if (!out.summary.empty()) std::cout << out.summary << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field network laboratory"};
  app.require_subcommand(1);

  CommonOpts tf, tm, cp, dv, gc;
  CLI::App* c_tf = app.add_subcommand("train-finite", "train a finite network");
  attach_common(c_tf, tf);
  CLI::App* c_tm = app.add_subcommand("train-mf", "integrate the particle dynamics");
  attach_common(c_tm, tm);
  CLI::App* c_cp = app.add_subcommand("couple", "run both systems from shared codes");
  attach_common(c_cp, cp);
  CLI::App* c_dv = app.add_subcommand("diversity", "pair-flow round-trip study");
  attach_common(c_dv, dv);
  CLI::App* c_gc = app.add_subcommand("grad-check", "finite-difference gradient audit");
  attach_common(c_gc, gc);

  std::string manifest_path, replay_dir;
  CLI::App* c_rp = app.add_subcommand("replay", "re-run a manifest and compare hashes");
  c_rp->add_option("--manifest", manifest_path, "manifest.json from a previous run")
      ->required()
      ->check(CLI::ExistingFile);
  c_rp->add_option("--out-dir", replay_dir, "directory for the replayed outputs")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_tf->parsed()) return run_kind(tf, mfnet::RunKind::TrainFinite);
    if (c_tm->parsed()) return run_kind(tm, mfnet::RunKind::TrainMf);
    if (c_cp->parsed()) return run_kind(cp, mfnet::RunKind::Couple);
    if (c_dv->parsed()) return run_kind(dv, mfnet::RunKind::Diversity);
    if (c_gc->parsed()) return run_kind(gc, mfnet::RunKind::GradCheck);
    if (c_rp->parsed()) {
      std::vector<mfnet::ReplayMismatch> bad;
      mfnet::RunOutput out = mfnet::replay_run(manifest_path, replay_dir, &bad);
      if (bad.empty()) {
        std::cout << "replay matched: " << out.files.size() << " files identical\n";
        return 0;
      }
      std::cerr << "replay mismatch in " << bad.size() << " file(s):\n";
      for (const auto& m : bad)
        std::cerr << "  " << m.file << ": recorded " << m.want_hash << ", got " << m.got_hash
                  << "\n";
      return 1;
    }
  } catch (const mfnet::OverflowError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const mfnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
