#include "report/report_writer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "util/errors.hpp"
#include "util/rng.hpp"

namespace cotaudit {

namespace {

using nlohmann::json;

std::string fixed(double v, int places) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", places, v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw_io("cannot write file: " + path);
    return f;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

json layer_to_json(const LayerRecord& lr) {
    return json{{"layer", lr.layer},
                {"cot_drop", lr.cot_drop},
                {"control_drop", lr.control_drop},
                {"control_draw_drops", lr.control_draw_drops},
                {"cmi", lr.cmi},
                {"bypass", lr.bypass},
                {"control_k", lr.control_k},
                {"control_pool_shrunk", lr.control_pool_shrunk},
                {"length_clamp_used", lr.length_clamp_used}};
}

LayerRecord layer_from_json(const json& j) {
    LayerRecord lr;
    lr.layer = j.at("layer").get<int>();
    lr.cot_drop = j.at("cot_drop").get<double>();
    lr.control_drop = j.at("control_drop").get<double>();
    lr.control_draw_drops = j.at("control_draw_drops").get<std::vector<double>>();
    lr.cmi = j.at("cmi").get<double>();
    lr.bypass = j.at("bypass").get<double>();
    lr.control_k = j.at("control_k").get<int>();
    lr.control_pool_shrunk = j.at("control_pool_shrunk").get<bool>();
    lr.length_clamp_used = j.at("length_clamp_used").get<bool>();
    return lr;
}

std::string row_label(const AuditRecord& rec) {
    if (rec.answer_kind == AnswerKind::single) return rec.instance_id;
    return rec.instance_id + "/" + answer_kind_name(rec.answer_kind);
}

// light yellow -> dark red; the red channel stays strictly monotone
std::string ramp_color(double x) {
    x = std::clamp(x, 0.0, 1.0);
    const int r = static_cast<int>(255 + x * (128 - 255));
    const int g = static_cast<int>(255 + x * (0 - 255));
    const int b = static_cast<int>(204 + x * (38 - 204));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

constexpr const char* kZeroColor = "#ffb6c1";  // reserved for exact zero

}  // namespace

json run_report_to_json(const RunReport& report) {
    json records = json::array();
    for (const AuditRecord& rec : report.records) {
        json layers = json::array();
        for (const LayerRecord& lr : rec.layers) layers.push_back(layer_to_json(lr));
        json r{{"instance_id", rec.instance_id},
               {"model_id", rec.model_id},
               {"answer_kind", answer_kind_name(rec.answer_kind)},
               {"baseline_logp", rec.baseline_logp},
               {"cmi_mean", rec.cmi_mean},
               {"bypass_mean", rec.bypass_mean},
               {"layers", std::move(layers)},
               {"span_fallback_used", rec.span_fallback_used},
               {"length_clamp_used", rec.length_clamp_used},
               {"control_pool_shrunk", rec.control_pool_shrunk}};
        if (!rec.placebo.empty()) r["placebo"] = rec.placebo;
        if (!rec.boundary.empty()) {
            json b = json::array();
            for (const BoundarySummary& bs : rec.boundary) {
                b.push_back(json{{"rel_sensitivity", bs.rel_sensitivity},
                                 {"fragile", bs.fragile},
                                 {"shrink_skipped", bs.shrink_skipped}});
            }
            r["boundary"] = std::move(b);
        }
        records.push_back(std::move(r));
    }

    json skipped = json::array();
    for (const SkippedInstance& s : report.skipped) {
        skipped.push_back(json{{"instance_id", s.instance_id}, {"reason", s.reason}});
    }

    return json{
        {"meta",
         {{"model_id", report.meta.model_id},
          {"dataset_kind", report.meta.dataset_kind},
          {"dataset_path", report.meta.dataset_path},
          {"n", report.meta.n},
          {"seed", report.meta.seed},
          {"config_hash", report.meta.config_hash},
          {"timestamp", report.meta.timestamp},
          {"schema_version", report.meta.schema_version}}},
        {"records", std::move(records)},
        {"summary",
         {{"mean_cmi", report.summary.mean_cmi},
          {"n_layers", report.summary.n_layers},
          {"active_layers", report.summary.active_layers},
          {"avg_active_per_prompt", report.summary.avg_active_per_prompt},
          {"pct_active", report.summary.pct_active}}},
        {"skipped", std::move(skipped)}};
}

RunReport run_report_from_json(const json& j) {
    RunReport report;
    const json& meta = j.at("meta");
    report.meta.model_id = meta.at("model_id").get<std::string>();
    report.meta.dataset_kind = meta.at("dataset_kind").get<std::string>();
    report.meta.dataset_path = meta.at("dataset_path").get<std::string>();
    report.meta.n = meta.at("n").get<int>();
    report.meta.seed = meta.at("seed").get<std::uint64_t>();
    report.meta.config_hash = meta.at("config_hash").get<std::string>();
    report.meta.timestamp = meta.at("timestamp").get<std::string>();
    report.meta.schema_version = meta.at("schema_version").get<int>();

    for (const json& r : j.at("records")) {
        AuditRecord rec;
        rec.instance_id = r.at("instance_id").get<std::string>();
        rec.model_id = r.at("model_id").get<std::string>();
        rec.answer_kind = answer_kind_from_name(r.at("answer_kind").get<std::string>());
        rec.baseline_logp = r.at("baseline_logp").get<double>();
        rec.cmi_mean = r.at("cmi_mean").get<double>();
        rec.bypass_mean = r.at("bypass_mean").get<double>();
        for (const json& l : r.at("layers")) rec.layers.push_back(layer_from_json(l));
        rec.span_fallback_used = r.at("span_fallback_used").get<bool>();
        rec.length_clamp_used = r.at("length_clamp_used").get<bool>();
        rec.control_pool_shrunk = r.at("control_pool_shrunk").get<bool>();
        if (r.contains("placebo")) rec.placebo = r["placebo"].get<std::vector<double>>();
        if (r.contains("boundary")) {
            for (const json& b : r["boundary"]) {
                rec.boundary.push_back({b.at("rel_sensitivity").get<double>(),
                                        b.at("fragile").get<bool>(),
                                        b.at("shrink_skipped").get<bool>()});
            }
        }
        report.records.push_back(std::move(rec));
    }

    const json& s = j.at("summary");
    report.summary.mean_cmi = s.at("mean_cmi").get<double>();
    report.summary.n_layers = s.at("n_layers").get<int>();
    report.summary.active_layers = s.at("active_layers").get<std::vector<int>>();
    report.summary.avg_active_per_prompt = s.at("avg_active_per_prompt").get<double>();
    report.summary.pct_active = s.at("pct_active").get<double>();

    for (const json& sk : j.at("skipped")) {
        report.skipped.push_back({sk.at("instance_id").get<std::string>(),
                                  sk.at("reason").get<std::string>()});
    }
    return report;
}

void emit_layer_csv(const RunReport& report, const std::string& path) {
    std::ofstream f = open_out(path);
    f << "id,layer,cot_drop,control_drop,cmi,bypass,flags\n";
    for (const AuditRecord& rec : report.records) {
        for (const LayerRecord& lr : rec.layers) {
            std::string flags;
            const auto add = [&](const char* tag) {
                if (!flags.empty()) flags += ';';
                flags += tag;
            };
            if (rec.span_fallback_used) add("span_fallback");
            if (lr.length_clamp_used) add("length_clamp");
            if (lr.control_pool_shrunk) add("pool_shrunk");
            f << csv_escape(row_label(rec)) << ',' << lr.layer << ','
              << fixed(lr.cot_drop, 6) << ',' << fixed(lr.control_drop, 6) << ','
              << fixed(lr.cmi, 6) << ',' << fixed(lr.bypass, 6) << ',' << flags
              << '\n';
        }
    }
    if (!f) throw_io("short write: " + path);
}

void emit_heatmap_svg(const RunReport& report, const std::string& path) {
    if (report.records.empty()) {
        throw_invalid("emit_heatmap_svg: empty report");
    }
    const int n_layers = report.summary.n_layers;
    const int n_rows = static_cast<int>(report.records.size());
    const int cell = 18;
    const int gutter = 140;
    const int top = 24;
    const int width = gutter + n_layers * cell + 8;
    const int height = top + n_rows * cell + 8;

    double max_cmi = 0.0;
    for (const AuditRecord& rec : report.records) {
        for (const LayerRecord& lr : rec.layers) max_cmi = std::max(max_cmi, lr.cmi);
    }

    std::ofstream f = open_out(path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
    f << "  <text x=\"" << gutter << "\" y=\"14\" font-size=\"11\" "
         "font-family=\"sans-serif\">CMI by layer (0.." << (n_layers - 1)
      << "), pink = 0</text>\n";
    for (int r = 0; r < n_rows; ++r) {
        const AuditRecord& rec = report.records[static_cast<size_t>(r)];
        const int y = top + r * cell;
        f << "  <text x=\"4\" y=\"" << y + cell - 5
          << "\" font-size=\"10\" font-family=\"monospace\">" << row_label(rec)
          << "</text>\n";
        for (int l = 0; l < n_layers; ++l) {
            const double v = rec.layers[static_cast<size_t>(l)].cmi;
            const std::string color =
                v == 0.0 ? kZeroColor
                         : ramp_color(max_cmi > 0.0 ? v / max_cmi : 0.0);
            f << "  <rect x=\"" << gutter + l * cell << "\" y=\"" << y
              << "\" width=\"" << cell - 1 << "\" height=\"" << cell - 1
              << "\" fill=\"" << color << "\"><title>" << row_label(rec)
              << " layer " << l << ": " << fixed(v, 6) << "</title></rect>\n";
        }
    }
    f << "</svg>\n";
    if (!f) throw_io("short write: " + path);
}

std::string format_intervals(const std::vector<LayerInterval>& intervals) {
    if (intervals.empty()) return "--";
    std::string out;
    for (const LayerInterval& iv : intervals) {
        if (!out.empty()) out += ", ";
        if (iv.first == iv.last) {
            out += std::to_string(iv.first);
        } else {
            out += "[" + std::to_string(iv.first) + ", " + std::to_string(iv.last) + "]";
        }
    }
    return out;
}

std::string render_summary_table(std::span<const SummaryRow> rows) {
    std::string out = "Model,Mean CMI,Layers,CMI-active layers,% Active Layers\n";
    for (const SummaryRow& row : rows) {
        const auto windows = reasoning_windows(row.summary);
        out += csv_escape(row.model_id) + ',' + fixed(row.summary.mean_cmi, 4) + ',' +
               std::to_string(row.summary.n_layers) + ',' +
               csv_escape(format_intervals(windows)) + ',' +
               fixed(row.summary.pct_active, 2) + "%\n";
    }
    return out;
}

void emit_summary_table(std::span<const SummaryRow> rows, const std::string& path) {
    std::ofstream f = open_out(path);
    f << render_summary_table(rows);
    if (!f) throw_io("short write: " + path);
}

void write_run_report(const RunReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw_io("cannot create output directory: " + dir);

    open_out((fs::path(dir) / "run.json").string())
        << run_report_to_json(report).dump(2) << "\n";
    emit_layer_csv(report, (fs::path(dir) / "layers.csv").string());
    const SummaryRow row{report.meta.model_id, report.summary};
    emit_summary_table(std::span(&row, 1), (fs::path(dir) / "summary.csv").string());
    if (!report.records.empty()) {
        emit_heatmap_svg(report, (fs::path(dir) / "heatmap.svg").string());
    }
}

std::string config_hash(const json& config) {
    const std::uint64_t h = fnv1a64(config.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

}  // namespace cotaudit
