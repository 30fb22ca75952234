// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace uqtrace::pipeline {

// Exit codes shared by the C API and the CLI.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kValidationFailure = 2;
inline constexpr int kInsufficientData = 3;

// Runs one subcommand ("synth", "ingest", "split", "features",
// "train", "evaluate", "early-detect", "report") against a JSON
// configuration document. Returns an exit code; on non-zero, `error`
// carries a diagnostic.
int run(const std::string& command, const std::string& config_json,
        std::string& error);

}  // namespace uqtrace::pipeline
