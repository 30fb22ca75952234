// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include "json.hpp"

namespace uqtrace::ingest {

using nlohmann::json;

bool TraceRecord::has_trace_gradients() const {
  return !steps.empty() &&
         std::all_of(steps.begin(), steps.end(),
                     [](const uq::TokenStep& s) { return s.grad_sq_trace.has_value(); });
}

bool TraceRecord::has_answer_gradients() const {
  return has_answer_channel() &&
         std::all_of(steps.begin(), steps.end(),
                     [](const uq::TokenStep& s) { return s.grad_sq_answer.has_value(); });
}

namespace {

double require_number(const json& j, const char* key, size_t line) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(line, std::string("missing or non-numeric field '") + key + "'");
  return j[key].get<double>();
}

std::string require_string(const json& j, const char* key, size_t line) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(line, std::string("missing or non-string field '") + key + "'");
  return j[key].get<std::string>();
}

double check_prob(double v, const char* key, size_t line) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ParseError(line, std::string(key) + " outside [0, 1]: " + fmt_double(v));
  return v;
}

double check_nonneg(double v, const char* key, size_t line) {
  if (!(v >= 0.0))
    throw ParseError(line, std::string(key) + " is negative: " + fmt_double(v));
  return v;
}

}  // namespace

TraceRecord parse_record(const std::string& line, size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(line_number, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_number, "not a JSON object");

  TraceRecord r;
  r.id = require_string(j, "id", line_number);
  r.model_name = require_string(j, "model", line_number);
  r.dataset = require_string(j, "dataset", line_number);
  r.raw_text = require_string(j, "raw_text", line_number);
  r.reference_answer = require_string(j, "reference_answer", line_number);

  if (!j.contains("steps") || !j["steps"].is_array())
    throw ParseError(line_number, "missing or non-array field 'steps'");

  size_t answer_steps = 0;
  for (const auto& sj : j["steps"]) {
    if (!sj.is_object())
      throw ParseError(line_number, "step is not a JSON object");
    uq::TokenStep s;
    s.p_target_trace = check_prob(require_number(sj, "p_tr", line_number),
                                  "p_tr", line_number);
    s.entropy_trace = check_nonneg(require_number(sj, "h_tr", line_number),
                                   "h_tr", line_number);
    if (sj.contains("g_tr"))
      s.grad_sq_trace = check_nonneg(require_number(sj, "g_tr", line_number),
                                     "g_tr", line_number);
    const bool has_p = sj.contains("p_ans");
    const bool has_h = sj.contains("h_ans");
    if (has_p != has_h)
      throw ParseError(line_number, "p_ans/h_ans must appear together");
    if (has_p) {
      s.p_target_answer = check_prob(require_number(sj, "p_ans", line_number),
                                     "p_ans", line_number);
      s.entropy_answer = check_nonneg(require_number(sj, "h_ans", line_number),
                                      "h_ans", line_number);
      if (sj.contains("g_ans"))
        s.grad_sq_answer = check_nonneg(
            require_number(sj, "g_ans", line_number), "g_ans", line_number);
      ++answer_steps;
    }
    r.steps.push_back(std::move(s));
  }
  if (answer_steps != 0 && answer_steps != r.steps.size())
    throw ParseError(line_number,
                     "answer-channel fields must be present on all steps or none");

  if (j.contains("split_pos")) {
    if (!j["split_pos"].is_number_unsigned())
      throw ParseError(line_number, "split_pos must be a nonnegative integer");
    size_t pos = j["split_pos"].get<size_t>();
    if (pos > r.raw_text.size())
      throw ParseError(line_number, "split_pos beyond raw_text");
    r.split_pos = pos;
    r.answer_text = r.raw_text.substr(pos);
  }
  if (j.contains("is_correct")) {
    if (!j["is_correct"].is_boolean())
      throw ParseError(line_number, "is_correct must be a boolean");
    r.is_correct = j["is_correct"].get<bool>();
  }
  if (j.contains("vocab_size")) {
    if (!j["vocab_size"].is_number_unsigned() || j["vocab_size"].get<unsigned>() < 2)
      throw ParseError(line_number, "vocab_size must be an integer >= 2");
    r.vocab_size = j["vocab_size"].get<unsigned>();
  }
  if (j.contains("extracted_answer")) {
    if (!j["extracted_answer"].is_string())
      throw ParseError(line_number, "extracted_answer must be a string");
    r.extracted_answer = j["extracted_answer"].get<std::string>();
  }
  return r;
}

std::string serialize_record(const TraceRecord& record) {
  json j;
  j["id"] = record.id;
  j["model"] = record.model_name;
  j["dataset"] = record.dataset;
  j["raw_text"] = record.raw_text;
  j["reference_answer"] = record.reference_answer;
  json steps = json::array();
  for (const auto& s : record.steps) {
    json sj;
    sj["p_tr"] = s.p_target_trace.value_or(0.0);
    sj["h_tr"] = s.entropy_trace.value_or(0.0);
    if (s.grad_sq_trace) sj["g_tr"] = *s.grad_sq_trace;
    if (s.has_answer_channel()) {
      sj["p_ans"] = *s.p_target_answer;
      sj["h_ans"] = *s.entropy_answer;
      if (s.grad_sq_answer) sj["g_ans"] = *s.grad_sq_answer;
    }
    steps.push_back(std::move(sj));
  }
  j["steps"] = std::move(steps);
  if (record.split_pos) j["split_pos"] = *record.split_pos;
  if (record.is_correct) j["is_correct"] = *record.is_correct;
  if (record.vocab_size) j["vocab_size"] = *record.vocab_size;
  if (record.extracted_answer) j["extracted_answer"] = *record.extracted_answer;
  return j.dump();
}

std::vector<TraceRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file: " + path);
  std::vector<TraceRecord> records;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    records.push_back(parse_record(line, line_number));
  }
  return records;
}

void write_jsonl(const std::string& path,
                 const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  for (const auto& r : records) out << serialize_record(r) << "\n";
}

namespace {

// App-B declaration patterns; matching is case-sensitive and the
// latest occurrence wins (by end of match).
const char* kDeclarations[] = {"Final Answer", "## Final Answer", "Answer:",
                               "Therefore, the answer is"};

SplitResult make_split(const std::string& text, size_t pos) {
  SplitResult r;
  r.status = SplitStatus::Ok;
  r.pos = pos;
  r.trace = text.substr(0, pos);
  r.answer = text.substr(pos);
  return r;
}

}  // namespace

SplitResult split_reasoning_output(const std::string& text) {
  static const std::string kClose = "</think>";
  const size_t tag = text.rfind(kClose);
  if (tag == std::string::npos) return {SplitStatus::MissingThinkClose};
  const size_t post_begin = tag + kClose.size();
  const std::string post = text.substr(post_begin);

  size_t best_end = std::string::npos;
  for (const char* pattern : kDeclarations) {
    const size_t at = post.rfind(pattern);
    if (at == std::string::npos) continue;
    const size_t end = at + std::string(pattern).size();
    if (best_end == std::string::npos || end > best_end) best_end = end;
  }
  if (best_end == std::string::npos) return {SplitStatus::NoDeclaration};
  return make_split(text, post_begin + best_end);
}

SplitResult split_plain_output(const std::string& text) {
  // Last paragraph break: newline, optional blank space, newline.
  if (text.size() >= 2) {
    for (size_t p = text.size() - 2; ; --p) {
      if (text[p] == '\n') {
        size_t q = p + 1;
        while (q < text.size() &&
               (text[q] == ' ' || text[q] == '\t' || text[q] == '\r'))
          ++q;
        if (q < text.size() && text[q] == '\n') return make_split(text, q + 1);
      }
      if (p == 0) break;
    }
  }
  // Fallback: last single newline.
  const size_t nl = text.rfind('\n');
  if (nl != std::string::npos) return make_split(text, nl + 1);
  return {SplitStatus::NoSplit};
}

namespace {

std::string canonical_number(std::string s) {
  std::string cleaned;
  for (char c : s)
    if (c != ',' && c != '$' && c != '+') cleaned.push_back(c);
  bool negative = false;
  if (!cleaned.empty() && cleaned.front() == '-') {
    negative = true;
    cleaned.erase(cleaned.begin());
  }
  std::string integer = cleaned, fraction;
  if (const size_t dot = cleaned.find('.'); dot != std::string::npos) {
    integer = cleaned.substr(0, dot);
    fraction = cleaned.substr(dot + 1);
  }
  while (integer.size() > 1 && integer.front() == '0') integer.erase(integer.begin());
  if (integer.empty()) integer = "0";
  while (!fraction.empty() && fraction.back() == '0') fraction.pop_back();
  std::string out = integer;
  if (!fraction.empty()) out += "." + fraction;
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& answer_text,
                                          AnswerKind kind) {
  if (kind == AnswerKind::Numeric) {
    static const std::regex number_re(
        R"([+-]?\$?(?:\d[\d,]*(?:\.\d+)?|\.\d+))");
    std::string last;
    for (auto it = std::sregex_iterator(answer_text.begin(), answer_text.end(),
                                        number_re);
         it != std::sregex_iterator(); ++it)
      last = it->str();
    if (last.empty()) return std::nullopt;
    return canonical_number(last);
  }
  static const std::regex bool_re(R"(\b(true|false|yes|no)\b)",
                                  std::regex::icase);
  std::string last;
  for (auto it = std::sregex_iterator(answer_text.begin(), answer_text.end(),
                                      bool_re);
       it != std::sregex_iterator(); ++it)
    last = it->str();
  if (last.empty()) return std::nullopt;
  std::transform(last.begin(), last.end(), last.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return (last == "true" || last == "yes") ? std::string("true")
                                           : std::string("false");
}

AuditResult audit_correctness(const std::string& extracted,
                              const std::string& reference,
                              AuditorClient* auditor,
                              const std::string& question) {
  if (extracted.empty() || reference.empty())
    throw ValidationError("audit requires nonempty extracted and reference answers");
  if (extracted == reference) return {true, false};
  if (auditor != nullptr) {
    const auto verdict = auditor->equivalent(extracted, reference, question);
    if (verdict.has_value() && *verdict) return {true, true};
  }
  // Auditor absent, unreachable, or denying: keep the original label.
  return {false, false};
}

const char* retention_reason_id(RetentionReason r) {
  switch (r) {
    case RetentionReason::Ok: return "ok";
    case RetentionReason::NoAnswer: return "no_answer";
    case RetentionReason::NoSplit: return "no_split";
    case RetentionReason::RegenerateNeeded: return "regenerate_needed";
  }
  return "?";
}

std::pair<std::vector<TraceRecord>, std::vector<RetentionOutcome>>
retention_filter(const std::vector<TraceRecord>& records,
                 const IngestOptions& options) {
  std::vector<TraceRecord> kept;
  std::vector<RetentionOutcome> outcomes;
  outcomes.reserve(records.size());

  for (const TraceRecord& input : records) {
    TraceRecord r = input;
    RetentionOutcome outcome;

    if (!r.split_pos) {
      SplitResult split;
      switch (options.split) {
        case SplitStrategy::Reasoning:
          split = split_reasoning_output(r.raw_text);
          break;
        case SplitStrategy::Plain:
          split = split_plain_output(r.raw_text);
          break;
        case SplitStrategy::Precomputed:
          split.status = SplitStatus::NoSplit;
          break;
      }
      if (split.status != SplitStatus::Ok) {
        outcome.kept = false;
        outcome.reason = split.status == SplitStatus::MissingThinkClose
                             ? RetentionReason::RegenerateNeeded
                         : split.status == SplitStatus::NoDeclaration
                             ? RetentionReason::NoAnswer
                             : RetentionReason::NoSplit;
        outcomes.push_back(outcome);
        continue;
      }
      r.split_pos = split.pos;
    }
    r.answer_text = r.raw_text.substr(*r.split_pos);

    if (!r.extracted_answer)
      r.extracted_answer = extract_answer(*r.answer_text, options.kind);
    if (!r.extracted_answer) {
      outcome.kept = false;
      outcome.reason = RetentionReason::NoAnswer;
      outcomes.push_back(outcome);
      continue;
    }

    if (!r.is_correct) {
      const AuditResult audit = audit_correctness(
          *r.extracted_answer, r.reference_answer, options.auditor, r.id);
      r.is_correct = audit.is_correct;
      outcome.label_flipped = audit.label_flipped;
    }

    outcome.kept = true;
    outcome.reason = RetentionReason::Ok;
    outcomes.push_back(outcome);
    kept.push_back(std::move(r));
  }
  return {std::move(kept), std::move(outcomes)};
}

}  // namespace uqtrace::ingest
