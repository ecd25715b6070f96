#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "audit/auditor.hpp"

namespace cotaudit {

struct RunMetadata {
    std::string model_id;
    std::string dataset_kind;
    std::string dataset_path;
    int n = 0;
    std::uint64_t seed = 0;
    std::string config_hash;  // stable across re-serialization
    std::string timestamp;    // the only field allowed to differ between
                              // identical runs
    int schema_version = 1;
};

struct SkippedInstance {
    std::string instance_id;
    std::string reason;
};

struct RunReport {
    RunMetadata meta;
    std::vector<AuditRecord> records;  // sorted by (instance_id, answer_kind)
    ModelSummary summary;
    std::vector<SkippedInstance> skipped;
};

nlohmann::json run_report_to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

// One row per (instance, layer): id, layer, cot_drop, control_drop, cmi,
// bypass, flags. Values printed with 6 decimal places.
void emit_layer_csv(const RunReport& report, const std::string& path);

// Instance-by-layer CMI grid. Fixed [0, max] color scale; exact zero uses
// a reserved out-of-scale color so bypass regimes are visible at a glance.
void emit_heatmap_svg(const RunReport& report, const std::string& path);

struct SummaryRow {
    std::string model_id;
    ModelSummary summary;
};

// Cross-model table: Model, Mean CMI (4 dp), Layers, CMI-active layers
// (interval notation), % Active Layers (2 dp + %).
std::string render_summary_table(std::span<const SummaryRow> rows);
void emit_summary_table(std::span<const SummaryRow> rows, const std::string& path);

// Table-style interval notation: singletons bare, runs bracketed,
// comma-joined ("1, 2, [14, 16]"); empty renders as "--".
std::string format_intervals(const std::vector<LayerInterval>& intervals);

// Writes run.json, layers.csv, summary.csv and heatmap.svg under dir.
void write_run_report(const RunReport& report, const std::string& dir);

// FNV-1a over the canonical (sorted-key, compact) dump, as 16 hex chars.
std::string config_hash(const nlohmann::json& config);

std::string utc_timestamp();

}  // namespace cotaudit
