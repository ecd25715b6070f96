#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "report/report_writer.hpp"
#include "runner/run_config.hpp"

namespace cotaudit {

struct AuditRunResult {
    RunReport report;
    std::string run_dir;
    std::string summary_csv;
};

// Full audit: load model + tokenizer + dataset, sweep every instance with
// a bounded worker pool, fold deterministically, write the report
// directory. Identical configs and seeds reproduce run.json byte for byte
// apart from the timestamp field.
AuditRunResult run_audit(const RunConfig& config);

struct BehaviorRunResult {
    nlohmann::json report;
    std::string run_dir;
};

// Normal + audit-aware elicitation over the prompt list, scoring, and the
// mode comparison, written to behavior.json.
BehaviorRunResult run_behavior(const BehaviorConfig& config);

// Merged cross-model table from previously written run directories.
std::string summarize_runs(const std::vector<std::string>& run_dirs);

}  // namespace cotaudit
