// SPDX-License-Identifier: Apache-2.0
//
// uqtrace command-line front end. A thin shell over the C API: each
// subcommand assembles a JSON configuration (defaults < config file <
// flags) and hands it to uqt_run.
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "uqtrace.h"

namespace {

using nlohmann::json;

struct CommonOpts {
  std::string config_file;
  json overrides = json::object();
};

void add_config_flag(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file,
                  "JSON configuration file; flags override its fields");
}

json load_config(const CommonOpts& opts) {
  json cfg = json::object();
  if (!opts.config_file.empty()) {
    std::ifstream in(opts.config_file);
    if (!in) throw CLI::ValidationError("--config",
                                        "cannot open " + opts.config_file);
    try {
      in >> cfg;
    } catch (const json::exception& e) {
      throw CLI::ValidationError("--config", e.what());
    }
  }
  for (auto& [key, value] : opts.overrides.items()) cfg[key] = value;
  return cfg;
}

// Registers a flag whose value, when set, lands in the override map.
template <typename T>
void opt(CLI::App* cmd, CommonOpts& opts, const std::string& flag,
         const std::string& key, const std::string& help) {
  cmd->add_option_function<T>(
      flag, [&opts, key](const T& v) { opts.overrides[key] = v; }, help);
}

void opt_list(CLI::App* cmd, CommonOpts& opts, const std::string& flag,
              const std::string& key, const std::string& help) {
  opt<std::vector<double>>(cmd, opts, flag, key, help);
}

int dispatch(const std::string& command, const CommonOpts& opts) {
  json cfg;
  try {
    cfg = load_config(opts);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  const uqt_status status = uqt_run(command.c_str(), cfg.dump().c_str());
  if (status != UQT_OK)
    std::fprintf(stderr, "error: %s\n", uqt_last_error());
  switch (status) {
    case UQT_OK: return 0;
    case UQT_ERR_VALIDATION: return 2;
    case UQT_ERR_INSUFFICIENT: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty time-series analysis of language-model "
               "generation traces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(uqt_version()));

  std::string command;
  CommonOpts opts;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  add_config_flag(synth, opts);
  opt<std::string>(synth, opts, "--out", "out", "Output JSONL path");
  opt<std::string>(synth, opts, "--spec-file", "spec_file",
                   "Cohort spec JSON file");
  opt<unsigned>(synth, opts, "--seed", "seed", "RNG seed");
  synth->callback([&] { command = "synth"; });

  auto* ingest = app.add_subcommand("ingest",
                                    "Parse, split and filter a trace log");
  add_config_flag(ingest, opts);
  opt<std::string>(ingest, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(ingest, opts, "--out-dir", "out_dir", "Output directory");
  opt<std::string>(ingest, opts, "--split", "split",
                   "Split strategy: plain|reasoning|precomputed");
  opt<std::string>(ingest, opts, "--answer-kind", "answer_kind",
                   "Answer kind: numeric|boolean");
  opt<std::string>(ingest, opts, "--auditor-url", "auditor_url",
                   "Equivalence auditor endpoint (token from "
                   "UQTRACE_AUDITOR_TOKEN)");
  ingest->callback([&] { command = "ingest"; });

  auto* split = app.add_subcommand("split", "Split raw texts into "
                                            "trace and answer sections");
  add_config_flag(split, opts);
  opt<std::string>(split, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(split, opts, "--out-dir", "out_dir", "Output directory");
  opt<std::string>(split, opts, "--split", "split",
                   "Split strategy: plain|reasoning");
  split->callback([&] { command = "split"; });

  auto* feat = app.add_subcommand("features", "Export the feature matrix");
  add_config_flag(feat, opts);
  opt<std::string>(feat, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(feat, opts, "--out", "out", "Output CSV path");
  opt<std::string>(feat, opts, "--selector", "selector",
                   "Feature selector id (full, tr, ans, dist_tr, ...)");
  opt<double>(feat, opts, "--log-base", "log_base", "Entropy log base");
  opt<unsigned>(feat, opts, "--prefix-limit", "prefix_limit",
                "Token prefix limit");
  opt<double>(feat, opts, "--prefix-fraction", "prefix_fraction",
              "Fractional prefix limit");
  feat->callback([&] { command = "features"; });

  auto* train = app.add_subcommand("train", "Fit a correctness classifier");
  add_config_flag(train, opts);
  opt<std::string>(train, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(train, opts, "--out", "out", "Model JSON path");
  opt<std::string>(train, opts, "--classifier", "classifier",
                   "logreg|gboost");
  opt<std::string>(train, opts, "--selector", "selector",
                   "Feature selector id");
  opt<double>(train, opts, "--log-base", "log_base", "Entropy log base");
  train->callback([&] { command = "train"; });

  auto* eval = app.add_subcommand("evaluate",
                                  "Cross-validated evaluation bundle");
  add_config_flag(eval, opts);
  opt<std::string>(eval, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(eval, opts, "--out-dir", "out_dir", "Output directory");
  opt<int>(eval, opts, "--folds", "folds", "CV fold count");
  opt<unsigned>(eval, opts, "--seed", "seed", "CV shuffle seed");
  opt<double>(eval, opts, "--log-base", "log_base", "Entropy log base");
  opt<std::string>(eval, opts, "--mode", "mode",
                   "Prefix limit mode: tokens|fraction");
  opt_list(eval, opts, "--limits", "limits", "Prefix limits for the sweep");
  eval->callback([&] { command = "evaluate"; });

  auto* early = app.add_subcommand("early-detect",
                                   "Prefix-limited detection sweep");
  add_config_flag(early, opts);
  opt<std::string>(early, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(early, opts, "--out-dir", "out_dir", "Output directory");
  opt<std::string>(early, opts, "--classifier", "classifier",
                   "logreg|gboost");
  opt<std::string>(early, opts, "--selector", "selector",
                   "Feature selector id");
  opt<std::string>(early, opts, "--mode", "mode", "tokens|fraction");
  opt_list(early, opts, "--limits", "limits", "Prefix limits");
  opt<int>(early, opts, "--folds", "folds", "CV fold count");
  opt<unsigned>(early, opts, "--seed", "seed", "CV shuffle seed");
  opt<double>(early, opts, "--log-base", "log_base", "Entropy log base");
  early->callback([&] { command = "early-detect"; });

  auto* report = app.add_subcommand("report",
                                    "Trace plots and peak detection");
  add_config_flag(report, opts);
  opt<std::string>(report, opts, "--input", "input", "Input JSONL path");
  opt<std::string>(report, opts, "--out-dir", "out_dir", "Output directory");
  opt<std::string>(report, opts, "--id", "id",
                   "Record id for a per-trace smoothed plot");
  opt<unsigned>(report, opts, "--peak-window", "peak_window",
                "Peak detection window (tokens)");
  opt<double>(report, opts, "--peak-factor", "peak_factor",
              "Peak threshold factor over the window mean");
  opt<unsigned>(report, opts, "--smooth-window", "smooth_window",
                "Moving-average window (odd)");
  opt<double>(report, opts, "--log-base", "log_base", "Entropy log base");
  report->callback([&] { command = "report"; });

  CLI11_PARSE(app, argc, argv);
  return dispatch(command, opts);
}
