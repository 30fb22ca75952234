// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "uqtrace/eval.hpp"
#include "uqtrace/features.hpp"
#include "uqtrace/ingest.hpp"
#include "uqtrace/learn.hpp"
#include "uqtrace/svg.hpp"
#include "uqtrace/synth.hpp"
#include "uqtrace/uq_core.hpp"

namespace uqtrace::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string require_path(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg[key].is_string())
    throw ConfigError(std::string("config needs string field '") + key + "'");
  return cfg[key].get<std::string>();
}

double config_log_base(const json& cfg) {
  return cfg.value("log_base", kNaturalBase);
}

ingest::SplitStrategy config_split(const json& cfg) {
  const std::string s = cfg.value("split", "plain");
  if (s == "plain") return ingest::SplitStrategy::Plain;
  if (s == "reasoning") return ingest::SplitStrategy::Reasoning;
  if (s == "precomputed") return ingest::SplitStrategy::Precomputed;
  throw ConfigError("unknown split strategy: " + s);
}

ingest::AnswerKind config_answer_kind(const json& cfg) {
  const std::string s = cfg.value("answer_kind", "numeric");
  if (s == "numeric") return ingest::AnswerKind::Numeric;
  if (s == "boolean") return ingest::AnswerKind::Boolean;
  throw ConfigError("unknown answer kind: " + s);
}

eval::LimitMode config_mode(const json& cfg) {
  const std::string s = cfg.value("mode", "tokens");
  if (s == "tokens") return eval::LimitMode::Tokens;
  if (s == "fraction") return eval::LimitMode::Fraction;
  throw ConfigError("unknown limit mode: " + s);
}

features::FeatureSelector selector_by_id(const std::string& id) {
  if (id == "full") return features::FeatureSelector::full();
  for (uq::Channel c : uq::kAllChannels)
    if (id == uq::channel_id(c)) return features::FeatureSelector::channel(c);
  for (uq::UType t : uq::kAllTypes)
    for (uq::Channel c : uq::kAllChannels)
      if (id == std::string(uq::utype_id(t)) + "_" + uq::channel_id(c))
        return features::FeatureSelector::single(t, c);
  throw ConfigError("unknown feature selector: " + id);
}

eval::ClassifierSpec classifier_by_id(const std::string& id) {
  if (id == "logreg") return eval::ClassifierSpec::LogReg;
  if (id == "gboost") return eval::ClassifierSpec::GBoost;
  throw ConfigError("unknown classifier: " + id);
}

std::vector<double> config_limits(const json& cfg, eval::LimitMode mode) {
  if (cfg.contains("limits"))
    return cfg["limits"].get<std::vector<double>>();
  if (mode == eval::LimitMode::Fraction)
    return {0.25, 0.5, 0.75, 1.0};
  return {8, 16, 32, 64, 128, 256};
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path.string());
  return out;
}

std::string cell(const eval::CVResult& r) {
  return fmt_fixed(r.mean, 3) + " ± " + fmt_fixed(r.stddev, 3);
}

// Cohort = all records of one (model, dataset) pair, labeled rows only.
std::map<std::pair<std::string, std::string>, std::vector<ingest::TraceRecord>>
group_cohorts(const std::vector<ingest::TraceRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<ingest::TraceRecord>>
      cohorts;
  for (const auto& r : records) {
    if (!r.is_correct) continue;
    cohorts[{r.model_name, r.dataset}].push_back(r);
  }
  if (cohorts.empty())
    throw InsufficientDataError("no labeled records in input");
  return cohorts;
}

// One CV run behind a selector; nullopt when the cohort cannot support
// it (missing channel, class thinner than k, ...).
std::optional<eval::CVResult> try_cv(
    const std::vector<ingest::TraceRecord>& records,
    const features::FeatureSelector& selector, eval::ClassifierSpec classifier,
    double log_base, int folds, unsigned seed) {
  try {
    const auto m = features::build_matrix(records, selector, log_base);
    const auto fold_assign = learn::stratified_kfold(m.labels, folds, seed);
    auto result = eval::cv_auroc(m.rows, m.labels, classifier, fold_assign);
    result.selector = selector.id;
    return result;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int cmd_synth(const json& cfg) {
  const std::string out = require_path(cfg, "out");
  synth::CohortSpec spec;
  if (cfg.contains("spec_file")) {
    std::ifstream in(cfg["spec_file"].get<std::string>());
    if (!in) throw ConfigError("cannot open spec file");
    std::stringstream buf;
    buf << in.rdbuf();
    spec = synth::cohort_spec_from_json(buf.str());
  } else if (cfg.contains("spec")) {
    spec = synth::cohort_spec_from_json(cfg["spec"].dump());
  }
  if (cfg.contains("seed")) spec.seed = cfg["seed"].get<unsigned>();
  const auto records = synth::generate_cohort(spec);
  ingest::write_jsonl(out, records);
  return kOk;
}

int cmd_ingest(const json& cfg, std::string& error) {
  const std::string input = require_path(cfg, "input");
  const fs::path out_dir = require_path(cfg, "out_dir");
  fs::create_directories(out_dir);

  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open input file: " + input);

  std::vector<ingest::TraceRecord> records;
  std::vector<std::string> parse_errors;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      records.push_back(ingest::parse_record(line, line_number));
    } catch (const ingest::ParseError& e) {
      parse_errors.push_back(e.what());
    }
  }

  ingest::IngestOptions options;
  options.split = config_split(cfg);
  options.kind = config_answer_kind(cfg);
  std::unique_ptr<ingest::HttpAuditor> auditor;
  if (cfg.contains("auditor_url")) {
    const char* token = std::getenv("UQTRACE_AUDITOR_TOKEN");
    auditor = std::make_unique<ingest::HttpAuditor>(
        cfg["auditor_url"].get<std::string>(), token ? token : "");
    options.auditor = auditor.get();
  }

  auto [kept, outcomes] = ingest::retention_filter(records, options);
  ingest::write_jsonl((out_dir / "records.jsonl").string(), kept);

  auto csv = open_out(out_dir / "retention.csv");
  csv << "id,kept,reason,label_flipped\n";
  for (size_t i = 0; i < records.size(); ++i) {
    csv << records[i].id << "," << (outcomes[i].kept ? 1 : 0) << ","
        << ingest::retention_reason_id(outcomes[i].reason) << ","
        << (outcomes[i].label_flipped ? 1 : 0) << "\n";
  }

  json summary;
  summary["input_lines"] = line_number;
  summary["parsed"] = records.size();
  summary["kept"] = kept.size();
  summary["parse_errors"] = parse_errors;
  open_out(out_dir / "ingest_summary.json") << summary.dump(2) << "\n";

  if (kept.empty()) {
    error = "no records kept";
    return kInsufficientData;
  }
  return kOk;
}

int cmd_split(const json& cfg) {
  const auto records = ingest::read_jsonl(require_path(cfg, "input"));
  const fs::path out_dir = require_path(cfg, "out_dir");
  fs::create_directories(out_dir);
  const ingest::SplitStrategy strategy = config_split(cfg);

  std::vector<ingest::TraceRecord> out_records = records;
  auto csv = open_out(out_dir / "split.csv");
  csv << "id,status,split_pos\n";
  for (auto& r : out_records) {
    ingest::SplitResult split;
    if (r.split_pos) {
      split.status = ingest::SplitStatus::Ok;
      split.pos = *r.split_pos;
    } else if (strategy == ingest::SplitStrategy::Reasoning) {
      split = ingest::split_reasoning_output(r.raw_text);
    } else {
      split = ingest::split_plain_output(r.raw_text);
    }
    const char* status = "ok";
    switch (split.status) {
      case ingest::SplitStatus::Ok:
        r.split_pos = split.pos;
        r.answer_text = r.raw_text.substr(split.pos);
        break;
      case ingest::SplitStatus::MissingThinkClose: status = "missing_think_close"; break;
      case ingest::SplitStatus::NoDeclaration: status = "no_declaration"; break;
      case ingest::SplitStatus::NoSplit: status = "no_split"; break;
    }
    csv << r.id << "," << status << ",";
    if (r.split_pos) csv << *r.split_pos;
    csv << "\n";
  }
  ingest::write_jsonl((out_dir / "records.jsonl").string(), out_records);
  return kOk;
}

std::vector<ingest::TraceRecord> labeled_only(
    std::vector<ingest::TraceRecord> records) {
  std::erase_if(records, [](const auto& r) { return !r.is_correct; });
  if (records.empty())
    throw InsufficientDataError("no labeled records in input");
  return records;
}

int cmd_features(const json& cfg) {
  const auto records = labeled_only(ingest::read_jsonl(require_path(cfg, "input")));
  const auto selector = selector_by_id(cfg.value("selector", "full"));
  std::optional<size_t> limit;
  std::optional<double> fraction;
  if (cfg.contains("prefix_limit")) limit = cfg["prefix_limit"].get<size_t>();
  if (cfg.contains("prefix_fraction"))
    fraction = cfg["prefix_fraction"].get<double>();
  const auto matrix = features::build_matrix(records, selector,
                                             config_log_base(cfg), limit,
                                             fraction);
  features::write_matrix_csv(require_path(cfg, "out"), matrix);
  return kOk;
}

int cmd_train(const json& cfg) {
  const auto records = labeled_only(ingest::read_jsonl(require_path(cfg, "input")));
  const auto selector = selector_by_id(cfg.value("selector", "full"));
  const auto classifier = classifier_by_id(cfg.value("classifier", "logreg"));
  const auto matrix =
      features::build_matrix(records, selector, config_log_base(cfg));

  const auto scaler = learn::fit_scaler(matrix.rows);
  const auto scaled = learn::apply_scaler(scaler, matrix.rows);

  json doc;
  doc["format_version"] = 1;
  doc["selector"] = selector.id;
  doc["feature_names"] = matrix.names;
  doc["scaler"] = {{"means", scaler.means}, {"stds", scaler.stds}};
  if (classifier == eval::ClassifierSpec::LogReg) {
    const auto model = learn::fit_logreg(scaled, matrix.labels);
    doc["model"] = json::parse(learn::dump_logreg(model));
  } else {
    const auto model = learn::fit_gboost(scaled, matrix.labels);
    doc["model"] = json::parse(learn::dump_gboost(model));
  }
  open_out(require_path(cfg, "out")) << doc.dump(2) << "\n";
  return kOk;
}

void write_early_detection_svg(
    const fs::path& path,
    const std::vector<std::pair<std::string, eval::EarlyDetectionCurve>>&
        curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  std::vector<svg::LineSeries> series;
  size_t color = 0;
  for (const auto& [name, curve] : curves) {
    svg::LineSeries s;
    s.name = name;
    s.color = kColors[color++ % 6];
    for (const auto& p : curve.points) {
      if (!p.computed) continue;
      s.x.push_back(p.limit);
      s.y.push_back(p.result.mean);
    }
    series.push_back(std::move(s));
  }
  svg::write_file(path.string(),
                  svg::line_chart("Early correctness detection", series,
                                  "prefix limit", "AUROC"));
}

int cmd_early_detect(const json& cfg, std::string& error) {
  const auto records = ingest::read_jsonl(require_path(cfg, "input"));
  const fs::path out_dir = require_path(cfg, "out_dir");
  fs::create_directories(out_dir);
  const auto mode = config_mode(cfg);
  const auto limits = config_limits(cfg, mode);
  const auto selector = selector_by_id(cfg.value("selector", "full"));
  const auto classifier = classifier_by_id(cfg.value("classifier", "logreg"));
  const int folds = cfg.value("folds", 5);
  const unsigned seed = cfg.value("seed", 42u);
  const double log_base = config_log_base(cfg);

  const auto cohorts = group_cohorts(records);
  auto csv = open_out(out_dir / "early_detection.csv");
  csv << "model,dataset,mode,limit,classifier,n_usable,computed,mean,std\n";
  std::vector<std::pair<std::string, eval::EarlyDetectionCurve>> curves;
  size_t computed_points = 0;
  for (const auto& [key, cohort] : cohorts) {
    const auto curve = eval::early_detection_sweep(
        cohort, limits, mode, classifier, selector, log_base, folds, seed);
    for (const auto& p : curve.points) {
      csv << key.first << "," << key.second << ","
          << eval::limit_mode_id(mode) << "," << fmt_double(p.limit) << ","
          << eval::classifier_id(classifier) << "," << p.n_usable << ","
          << (p.computed ? 1 : 0) << ",";
      if (p.computed) {
        csv << fmt_double(p.result.mean) << "," << fmt_double(p.result.stddev);
        ++computed_points;
      } else {
        csv << ",";
      }
      csv << "\n";
    }
    curves.emplace_back(key.first + "/" + key.second, curve);
  }
  write_early_detection_svg(out_dir / "early_detection.svg", curves);
  if (computed_points == 0) {
    error = "no sweep point had enough usable traces (selector '" +
            selector.id + "')";
    return kInsufficientData;
  }
  return kOk;
}

int cmd_evaluate(const json& cfg, std::string& error) {
  const auto records = ingest::read_jsonl(require_path(cfg, "input"));
  const fs::path out_dir = require_path(cfg, "out_dir");
  fs::create_directories(out_dir);
  const int folds = cfg.value("folds", 5);
  const unsigned seed = cfg.value("seed", 42u);
  const double log_base = config_log_base(cfg);
  const auto mode = config_mode(cfg);
  const auto limits = config_limits(cfg, mode);

  const auto cohorts = group_cohorts(records);
  size_t computed_cells = 0;

  // Table 1 shape: full selector, both classifiers, Self-Certainty.
  {
    auto csv = open_out(out_dir / "table_full.csv");
    csv << "model,dataset,logreg,gboost,self_certainty\n";
    const auto full = features::FeatureSelector::full();
    for (const auto& [key, cohort] : cohorts) {
      csv << key.first << "," << key.second;
      for (auto classifier :
           {eval::ClassifierSpec::LogReg, eval::ClassifierSpec::GBoost}) {
        const auto r = try_cv(cohort, full, classifier, log_base, folds, seed);
        csv << "," << (r ? cell(*r) : "absent");
        computed_cells += r.has_value();
      }
      std::string sc = "absent";
      try {
        const auto m = features::build_matrix(cohort, full, log_base);
        std::vector<ingest::TraceRecord> usable;
        for (size_t i : m.record_index) usable.push_back(cohort[i]);
        const auto fold_assign = learn::stratified_kfold(m.labels, folds, seed);
        sc = cell(eval::self_certainty_auroc(usable, fold_assign));
        ++computed_cells;
      } catch (const std::exception&) {
      }
      csv << "," << sc << "\n";
    }
  }

  // Per-channel and per-type tables.
  {
    auto csv = open_out(out_dir / "table_channel.csv");
    csv << "model,dataset,channel,logreg,gboost\n";
    for (const auto& [key, cohort] : cohorts) {
      for (uq::Channel c : uq::kAllChannels) {
        const auto selector = features::FeatureSelector::channel(c);
        csv << key.first << "," << key.second << "," << uq::channel_id(c);
        for (auto classifier :
             {eval::ClassifierSpec::LogReg, eval::ClassifierSpec::GBoost}) {
          const auto r =
              try_cv(cohort, selector, classifier, log_base, folds, seed);
          csv << "," << (r ? cell(*r) : "absent");
          computed_cells += r.has_value();
        }
        csv << "\n";
      }
    }
  }
  {
    auto csv = open_out(out_dir / "table_type.csv");
    csv << "model,dataset,channel,utype,logreg\n";
    for (const auto& [key, cohort] : cohorts) {
      for (uq::Channel c : uq::kAllChannels) {
        for (uq::UType t : uq::kAllTypes) {
          const auto selector = features::FeatureSelector::single(t, c);
          const auto r = try_cv(cohort, selector, eval::ClassifierSpec::LogReg,
                                log_base, folds, seed);
          csv << key.first << "," << key.second << "," << uq::channel_id(c)
              << "," << uq::utype_id(t) << "," << (r ? cell(*r) : "absent")
              << "\n";
          computed_cells += r.has_value();
        }
      }
    }
  }

  // Early detection + importance over prefix.
  {
    auto csv = open_out(out_dir / "early_detection.csv");
    csv << "model,dataset,mode,limit,classifier,n_usable,computed,mean,std\n";
    std::vector<std::pair<std::string, eval::EarlyDetectionCurve>> curves;
    const auto full = features::FeatureSelector::full();
    for (const auto& [key, cohort] : cohorts) {
      for (auto classifier :
           {eval::ClassifierSpec::LogReg, eval::ClassifierSpec::GBoost}) {
        const auto curve = eval::early_detection_sweep(
            cohort, limits, mode, classifier, full, log_base, folds, seed);
        for (const auto& p : curve.points) {
          csv << key.first << "," << key.second << ","
              << eval::limit_mode_id(mode) << "," << fmt_double(p.limit) << ","
              << eval::classifier_id(classifier) << "," << p.n_usable << ","
              << (p.computed ? 1 : 0) << ",";
          if (p.computed)
            csv << fmt_double(p.result.mean) << ","
                << fmt_double(p.result.stddev);
          else
            csv << ",";
          csv << "\n";
        }
        if (classifier == eval::ClassifierSpec::LogReg)
          curves.emplace_back(key.first + "/" + key.second, curve);
      }
    }
    write_early_detection_svg(out_dir / "early_detection.svg", curves);
  }
  {
    auto csv = open_out(out_dir / "importance.csv");
    csv << "model,dataset,mode,limit,computed,n_usable,static_share,dynamic_share\n";
    std::vector<svg::LineSeries> series;
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd"};
    size_t color = 0;
    const auto full = features::FeatureSelector::full();
    for (const auto& [key, cohort] : cohorts) {
      const auto points = eval::importance_over_prefix(cohort, limits, mode,
                                                       full, log_base);
      svg::LineSeries stat, dyn;
      stat.name = key.first + "/" + key.second + " static";
      stat.color = kColors[color % 4];
      dyn.name = key.first + "/" + key.second + " dynamic";
      dyn.color = kColors[(color + 1) % 4];
      color += 2;
      for (const auto& p : points) {
        csv << key.first << "," << key.second << ","
            << eval::limit_mode_id(mode) << "," << fmt_double(p.limit) << ","
            << (p.computed ? 1 : 0) << "," << p.n_usable << ",";
        if (p.computed) {
          csv << fmt_double(p.static_share) << ","
              << fmt_double(p.dynamic_share);
          stat.x.push_back(p.limit);
          stat.y.push_back(p.static_share);
          dyn.x.push_back(p.limit);
          dyn.y.push_back(p.dynamic_share);
        } else {
          csv << ",";
        }
        csv << "\n";
      }
      series.push_back(std::move(stat));
      series.push_back(std::move(dyn));
    }
    svg::write_file((out_dir / "importance.svg").string(),
                    svg::line_chart("Coefficient share over prefix", series,
                                    "prefix limit", "share"));
  }

  // Z-score heatmap.
  {
    auto csv = open_out(out_dir / "heatmap.csv");
    csv << "model,dataset,feature,group,value,degenerate\n";
    std::vector<std::string> row_labels;
    std::vector<std::vector<double>> cells_matrix;
    std::vector<std::string> col_labels;
    const auto full = features::FeatureSelector::full();
    for (const auto& [key, cohort] : cohorts) {
      try {
        const auto cells = eval::zscore_heatmap(cohort, full, log_base);
        std::vector<double> incorrect_row, correct_row;
        std::vector<std::string> names;
        for (const auto& c : cells) {
          csv << key.first << "," << key.second << "," << c.feature << ","
              << (c.correct_group ? "correct" : "incorrect") << ","
              << fmt_double(c.value) << "," << (c.degenerate ? 1 : 0) << "\n";
          if (c.correct_group) {
            correct_row.push_back(c.value);
          } else {
            incorrect_row.push_back(c.value);
            names.push_back(c.feature);
          }
        }
        if (col_labels.empty()) col_labels = names;
        row_labels.push_back(key.first + "/" + key.second + " incorrect");
        cells_matrix.push_back(std::move(incorrect_row));
        row_labels.push_back(key.first + "/" + key.second + " correct");
        cells_matrix.push_back(std::move(correct_row));
      } catch (const std::exception&) {
      }
    }
    if (!cells_matrix.empty())
      svg::write_file((out_dir / "heatmap.svg").string(),
                      svg::heatmap("Z-scored feature means", row_labels,
                                   col_labels, cells_matrix));
  }

  // Averaged distributional trace (normalized length 100, linear
  // resampling) plus the correct/incorrect gap.
  {
    auto csv = open_out(out_dir / "avg_trace.csv");
    csv << "model,dataset,group,position,value\n";
    std::vector<svg::LineSeries> series;
    static const char* kColors[] = {"#1f77b4", "#d62728"};
    for (const auto& [key, cohort] : cohorts) {
      const auto avg = eval::averaged_traces(
          cohort, uq::UType::Distributional, uq::Channel::Trace, 100, log_base);
      svg::LineSeries corr, incorr;
      corr.name = key.first + "/" + key.second + " correct";
      corr.color = kColors[0];
      incorr.name = key.first + "/" + key.second + " incorrect";
      incorr.color = kColors[1];
      for (size_t i = 0; i < 100; ++i) {
        csv << key.first << "," << key.second << ",correct," << i << ","
            << fmt_double(avg.correct_mean[i]) << "\n";
        corr.x.push_back(static_cast<double>(i));
        corr.y.push_back(avg.correct_mean[i]);
      }
      for (size_t i = 0; i < 100; ++i) {
        csv << key.first << "," << key.second << ",incorrect," << i << ","
            << fmt_double(avg.incorrect_mean[i]) << "\n";
        incorr.x.push_back(static_cast<double>(i));
        incorr.y.push_back(avg.incorrect_mean[i]);
      }
      series.push_back(std::move(corr));
      series.push_back(std::move(incorr));
    }
    svg::write_file((out_dir / "avg_trace.svg").string(),
                    svg::line_chart("Average distributional trace", series,
                                    "normalized position", "entropy"));
  }

  // Manifest: the full recipe of the run, no wall clock.
  {
    json manifest;
    manifest["command"] = "evaluate";
    manifest["library_version"] = "1.0.0";
    // Output location is kept out of the manifest so runs into two
    // directories stay byte-identical.
    json cfg_echo = cfg;
    cfg_echo.erase("out_dir");
    manifest["config"] = cfg_echo;
    manifest["seed"] = seed;
    manifest["folds"] = folds;
    manifest["mode"] = eval::limit_mode_id(mode);
    manifest["limits"] = limits;
    manifest["selectors"] = {"full", "tr", "ans", "per-type"};
    manifest["avg_trace_normalization"] = "linear_resample_100";
    manifest["cohorts"] = json::array();
    for (const auto& [key, cohort] : cohorts)
      manifest["cohorts"].push_back(
          {{"model", key.first}, {"dataset", key.second},
           {"n", cohort.size()}});
    open_out(out_dir / "manifest.json") << manifest.dump(2) << "\n";
  }

  if (computed_cells == 0) {
    error = "no cohort had enough usable data for any selector";
    return kInsufficientData;
  }
  return kOk;
}

int cmd_report(const json& cfg) {
  const auto records = ingest::read_jsonl(require_path(cfg, "input"));
  const fs::path out_dir = require_path(cfg, "out_dir");
  fs::create_directories(out_dir);
  const double log_base = config_log_base(cfg);
  const size_t peak_window = cfg.value("peak_window", 200u);
  const double peak_factor = cfg.value("peak_factor", 2.4);
  const size_t smooth_window = cfg.value("smooth_window", 21u);

  auto csv = open_out(out_dir / "peaks.csv");
  csv << "id,position\n";
  for (const auto& r : records) {
    for (const auto& series : uq::build_series(r, log_base)) {
      if (series.utype != uq::UType::Distributional ||
          series.channel != uq::Channel::Trace)
        continue;
      for (size_t t : eval::detect_peaks(series.values, peak_window,
                                         peak_factor))
        csv << r.id << "," << t << "\n";
    }
  }

  if (cfg.contains("id")) {
    const std::string id = cfg["id"].get<std::string>();
    const auto it = std::find_if(records.begin(), records.end(),
                                 [&](const auto& r) { return r.id == id; });
    if (it == records.end()) throw ConfigError("record id not found: " + id);
    auto trace_csv = open_out(out_dir / "smoothed_trace.csv");
    trace_csv << "utype,channel,position,raw,smoothed\n";
    std::vector<svg::LineSeries> series_list;
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    size_t color = 0;
    for (const auto& series : uq::build_series(*it, log_base)) {
      const auto smoothed = eval::smooth_series(series.values, smooth_window);
      svg::LineSeries line;
      line.name = std::string(uq::utype_id(series.utype)) + "_" +
                  uq::channel_id(series.channel);
      line.color = kColors[color++ % 6];
      for (size_t i = 0; i < smoothed.size(); ++i) {
        trace_csv << uq::utype_id(series.utype) << ","
                  << uq::channel_id(series.channel) << "," << i << ","
                  << fmt_double(series.values[i]) << ","
                  << fmt_double(smoothed[i]) << "\n";
        line.x.push_back(static_cast<double>(i));
        line.y.push_back(smoothed[i]);
      }
      series_list.push_back(std::move(line));
    }
    svg::write_file((out_dir / "smoothed_trace.svg").string(),
                    svg::line_chart("Smoothed uncertainty trace: " + id,
                                    series_list, "token", "uncertainty"));
  }

  // Group-averaged uncertainty traces on a common 100-point axis.
  const auto cohorts = group_cohorts(records);
  std::vector<svg::LineSeries> series;
  for (const auto& [key, cohort] : cohorts) {
    const auto avg = eval::averaged_traces(
        cohort, uq::UType::Distributional, uq::Channel::Trace, 100, log_base);
    svg::LineSeries gap;
    gap.name = key.first + "/" + key.second + " gap";
    gap.color = "#2ca02c";
    for (size_t i = 0; i < 100; ++i) {
      gap.x.push_back(static_cast<double>(i));
      gap.y.push_back(avg.incorrect_mean[i] - avg.correct_mean[i]);
    }
    series.push_back(std::move(gap));
  }
  svg::write_file((out_dir / "uncertainty_gap.svg").string(),
                  svg::line_chart("Incorrect - correct uncertainty gap",
                                  series, "normalized position", "gap"));
  return kOk;
}

}  // namespace

int run(const std::string& command, const std::string& config_json,
        std::string& error) {
  error.clear();
  json cfg;
  try {
    cfg = config_json.empty() ? json::object() : json::parse(config_json);
  } catch (const json::exception& e) {
    error = std::string("bad config JSON: ") + e.what();
    return kValidationFailure;
  }
  try {
    if (command == "synth") return cmd_synth(cfg);
    if (command == "ingest") return cmd_ingest(cfg, error);
    if (command == "split") return cmd_split(cfg);
    if (command == "features") return cmd_features(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg, error);
    if (command == "early-detect") return cmd_early_detect(cfg, error);
    if (command == "report") return cmd_report(cfg);
    error = "unknown command: " + command;
    return kValidationFailure;
  } catch (const InsufficientDataError& e) {
    error = e.what();
    return kInsufficientData;
  } catch (const ValidationError& e) {
    error = e.what();
    return kValidationFailure;
  } catch (const ingest::ParseError& e) {
    error = e.what();
    return kValidationFailure;
  } catch (const ConfigError& e) {
    error = e.what();
    return kValidationFailure;
  } catch (const std::exception& e) {
    error = e.what();
    return kFailure;
  }
}

}  // namespace uqtrace::pipeline
