// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uqtrace/uq_core.hpp"

namespace uqtrace::ingest {

struct ParseError : std::runtime_error {
  size_t line_number;
  ParseError(size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_number(line) {}
};

// One generation. raw_text is the verbatim model output; split_pos,
// when present, is a character offset such that
// raw_text.substr(0, split_pos) + raw_text.substr(split_pos) == raw_text
// with the second part being the answer section.
struct TraceRecord {
  std::string id;
  std::string model_name;
  std::string dataset;
  std::string raw_text;
  std::optional<size_t> split_pos;
  std::vector<uq::TokenStep> steps;
  std::optional<std::string> answer_text;
  std::optional<std::string> extracted_answer;
  std::string reference_answer;
  std::optional<bool> is_correct;
  std::optional<unsigned> vocab_size;

  size_t token_count() const { return steps.size(); }
  bool has_answer_channel() const {
    return !steps.empty() && steps.front().has_answer_channel();
  }
  bool has_trace_gradients() const;
  bool has_answer_gradients() const;
};

// One JSON object per line. Unknown fields are ignored; required
// fields and value ranges are checked. Throws ParseError.
TraceRecord parse_record(const std::string& line, size_t line_number = 0);
std::string serialize_record(const TraceRecord& record);

std::vector<TraceRecord> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path,
                 const std::vector<TraceRecord>& records);

enum class SplitStatus {
  Ok,
  MissingThinkClose,  // reasoning output without </think>; regeneration path
  NoDeclaration,      // post-think text without an answer declaration
  NoSplit             // plain output without any usable separator
};

struct SplitResult {
  SplitStatus status = SplitStatus::Ok;
  size_t pos = 0;  // valid iff status == Ok
  std::string trace;
  std::string answer;
};

// Reasoning-model strategy: locate the closing </think> tag, then the
// latest answer-declaration pattern after it; split immediately after
// the declaration. Lossless: trace + answer == text.
SplitResult split_reasoning_output(const std::string& text);

// Plain strategy: split after the last paragraph break, falling back
// to the last single newline. Lossless on success.
SplitResult split_plain_output(const std::string& text);

enum class AnswerKind { Numeric, Boolean };

// Pulls the final answer out of the answer section. Numeric: last
// number, normalized (commas/currency stripped, canonical decimal
// form). Boolean: last True/False/Yes/No, case-insensitive, mapped to
// "true"/"false". Absence is a value, not an error.
std::optional<std::string> extract_answer(const std::string& answer_text,
                                          AnswerKind kind);

// Lenient-equivalence auditor. equivalent() returns nullopt when the
// auditor is unavailable (transport failure etc); callers treat that
// as "keep the original label".
class AuditorClient {
 public:
  virtual ~AuditorClient() = default;
  virtual std::optional<bool> equivalent(const std::string& extracted,
                                         const std::string& reference,
                                         const std::string& question) = 0;
};

// Deterministic offline auditor backed by a table of equivalent pairs.
class MockAuditor : public AuditorClient {
 public:
  void add_equivalence(const std::string& a, const std::string& b);
  std::optional<bool> equivalent(const std::string& extracted,
                                 const std::string& reference,
                                 const std::string& question) override;

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
};

// POSTs {extracted, reference, question} to the configured endpoint
// and expects {"equivalent": bool} back.
class HttpAuditor : public AuditorClient {
 public:
  HttpAuditor(std::string base_url, std::string token = "");
  std::optional<bool> equivalent(const std::string& extracted,
                                 const std::string& reference,
                                 const std::string& question) override;

 private:
  std::string host_;
  std::string path_;
  std::string token_;
};

struct AuditResult {
  bool is_correct = false;
  bool label_flipped = false;
};

// Exact match wins without an auditor call; on mismatch the auditor
// may flip the label to correct, never the other way around.
AuditResult audit_correctness(const std::string& extracted,
                              const std::string& reference,
                              AuditorClient* auditor,
                              const std::string& question = "");

enum class RetentionReason { Ok, NoAnswer, NoSplit, RegenerateNeeded };

const char* retention_reason_id(RetentionReason r);

struct RetentionOutcome {
  bool kept = false;
  RetentionReason reason = RetentionReason::Ok;
  bool label_flipped = false;
};

enum class SplitStrategy { Reasoning, Plain, Precomputed };

struct IngestOptions {
  SplitStrategy split = SplitStrategy::Plain;
  AnswerKind kind = AnswerKind::Numeric;
  AuditorClient* auditor = nullptr;
};

// Applies splitting, answer extraction and correctness auditing, then
// drops the records the filters reject. Returns the kept records (in
// input order) plus one outcome per input record. Records that already
// carry a split_pos keep it, which makes the filter idempotent.
std::pair<std::vector<TraceRecord>, std::vector<RetentionOutcome>>
retention_filter(const std::vector<TraceRecord>& records,
                 const IngestOptions& options);

}  // namespace uqtrace::ingest
