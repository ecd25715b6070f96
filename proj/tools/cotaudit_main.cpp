// cotaudit command-line interface. Everything runs through the C API in
// include/cotaudit.h; this file only parses flags, merges them over an
// optional JSON config file (flags win), and maps status codes to exit
// codes: 0 ok, 2 bad config, 3 model load failure, 4 dataset failure,
// 1 anything else.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cotaudit.h"

namespace {

using nlohmann::json;

int exit_code_for(cotaudit_status status) {
    switch (status) {
        case COTAUDIT_OK: return 0;
        case COTAUDIT_ERR_INVALID:
        case COTAUDIT_ERR_CONFIG: return 2;
        case COTAUDIT_ERR_MODEL: return 3;
        case COTAUDIT_ERR_DATASET: return 4;
        default: return 1;
    }
}

int fail(cotaudit_status status) {
    std::cerr << "error: " << cotaudit_last_error() << "\n";
    return exit_code_for(status);
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) {
        std::cerr << "error: cannot open config file: " << path << "\n";
        std::exit(2);
    }
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        std::cerr << "error: config file is not valid JSON: " << e.what() << "\n";
        std::exit(2);
    }
}

struct OwnedString {
    char* value = nullptr;
    ~OwnedString() { cotaudit_string_free(value); }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cotaudit: layerwise CoT-faithfulness audits for GPT-2-family "
                 "models, plus a behavioral CoT-manipulation monitor"};
    app.require_subcommand(1);

    // ---- audit ----
    auto* audit = app.add_subcommand(
        "audit", "Run the layerwise activation-patching audit over a dataset");
    std::string audit_config, model_dir, model_id, dataset, dataset_path, out_dir;
    int n = 0, workers = 0, control_samples = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double drop_floor = 0, denom_floor = 0, base_floor = 0;
    std::vector<std::string> ablations;
    audit->add_option("--config", audit_config, "JSON config file (flags override it)");
    audit->add_option("--model", model_dir, "model directory (config.json + model.safetensors + tokenizer)");
    audit->add_option("--model-id", model_id, "label used in reports");
    audit->add_option("--dataset", dataset, "dataset kind: strategyqa | truthfulqa | gsm8k");
    audit->add_option("--path", dataset_path, "dataset file path");
    audit->add_option("--n", n, "number of instances (top-n prefix of the file)");
    audit->add_option("--seed", seed, "master seed; all sub-seeds derive from it")
        ->each([&](const std::string&) { seed_set = true; });
    audit->add_option("--workers", workers, "worker threads over instances");
    audit->add_option("--out", out_dir, "output directory root (default: runs)");
    audit->add_option("--ablate", ablations, "ablations to run: placebo, boundary")
        ->delimiter(',');
    audit->add_option("--drop-floor", drop_floor, "CMI drop floor (default 1e-4)");
    audit->add_option("--denom-floor", denom_floor, "CMI denominator floor (default 1e-3)");
    audit->add_option("--base-floor", base_floor, "boundary-sensitivity base floor (default 1e-2)");
    audit->add_option("--control-samples", control_samples, "control draws per layer (default 8)");

    // ---- behavior ----
    auto* behavior = app.add_subcommand(
        "behavior", "Run the behavioral monitor: normal vs audit-aware elicitation");
    std::string bh_config, base_url, endpoint_model, prompts_path, patterns_path,
        api_key_env, bh_out;
    int bh_workers = 0;
    behavior->add_option("--config", bh_config, "JSON config file (flags override it)");
    behavior->add_option("--base-url", base_url, "chat-completions endpoint base URL");
    behavior->add_option("--endpoint-model", endpoint_model, "model name sent to the endpoint");
    behavior->add_option("--prompts", prompts_path, "JSON array of prompts (strings or {id, prompt})");
    behavior->add_option("--patterns", patterns_path, "manipulation pattern file (19 categories)");
    behavior->add_option("--api-key-env", api_key_env, "environment variable holding the bearer token");
    behavior->add_option("--workers", bh_workers, "parallel elicitation calls");
    behavior->add_option("--out", bh_out, "output directory root (default: runs)");

    // ---- summarize ----
    auto* summarize = app.add_subcommand(
        "summarize", "Merge run directories into one cross-model summary table");
    std::vector<std::string> run_dirs;
    std::string summary_out;
    summarize->add_option("run_dirs", run_dirs, "run directories (each holding run.json)")
        ->required();
    summarize->add_option("--out", summary_out, "write the table here as well as stdout");

    // ---- make-toy ----
    auto* make_toy = app.add_subcommand(
        "make-toy", "Write a self-contained toy model directory for smoke tests");
    std::string toy_dir;
    std::uint64_t toy_seed = 0;
    int toy_layers = 0, toy_heads = 0, toy_d = 0, toy_ff = 0, toy_vocab = 0, toy_pos = 0;
    make_toy->add_option("--out", toy_dir, "target directory")->required();
    make_toy->add_option("--seed", toy_seed, "weight seed");
    make_toy->add_option("--layers", toy_layers, "transformer blocks (default 2)");
    make_toy->add_option("--heads", toy_heads, "attention heads (default 2)");
    make_toy->add_option("--d-model", toy_d, "model width (default 8)");
    make_toy->add_option("--d-ff", toy_ff, "MLP width (default 32)");
    make_toy->add_option("--vocab", toy_vocab, "vocabulary size (default 256)");
    make_toy->add_option("--max-positions", toy_pos, "context length (default 128)");

    CLI11_PARSE(app, argc, argv);

    if (audit->parsed()) {
        json config = load_config_file(audit_config);
        if (!model_dir.empty()) config["model_dir"] = model_dir;
        if (!model_id.empty()) config["model_id"] = model_id;
        if (!dataset.empty()) config["dataset"]["kind"] = dataset;
        if (!dataset_path.empty()) config["dataset"]["path"] = dataset_path;
        if (n > 0) config["dataset"]["n"] = n;
        if (seed_set) config["seed"] = seed;
        if (workers > 0) config["workers"] = workers;
        if (!out_dir.empty()) config["out_dir"] = out_dir;
        for (const std::string& a : ablations) config["ablations"][a] = true;
        if (drop_floor > 0) config["cmi"]["drop_floor"] = drop_floor;
        if (denom_floor > 0) config["cmi"]["denom_floor"] = denom_floor;
        if (base_floor > 0) config["cmi"]["base_floor"] = base_floor;
        if (control_samples > 0) config["cmi"]["control_samples"] = control_samples;

        OwnedString summary, run_dir;
        const cotaudit_status rc =
            cotaudit_run_audit(config.dump().c_str(), &summary.value, &run_dir.value);
        if (rc != COTAUDIT_OK) return fail(rc);
        std::cout << summary.value;
        std::cout << "report written to " << run_dir.value << "\n";
        return 0;
    }

    if (behavior->parsed()) {
        json config = load_config_file(bh_config);
        if (!base_url.empty()) config["endpoint"]["base_url"] = base_url;
        if (!endpoint_model.empty()) config["endpoint"]["model"] = endpoint_model;
        if (!api_key_env.empty()) config["endpoint"]["api_key_env"] = api_key_env;
        if (!prompts_path.empty()) config["prompts_path"] = prompts_path;
        if (!patterns_path.empty()) config["patterns_path"] = patterns_path;
        if (bh_workers > 0) config["workers"] = bh_workers;
        if (!bh_out.empty()) config["out_dir"] = bh_out;

        OwnedString report, run_dir;
        const cotaudit_status rc =
            cotaudit_run_behavior(config.dump().c_str(), &report.value, &run_dir.value);
        if (rc != COTAUDIT_OK) return fail(rc);
        std::cout << "behavior report written to " << run_dir.value << "\n";
        return 0;
    }

    if (summarize->parsed()) {
        std::vector<const char*> dirs;
        dirs.reserve(run_dirs.size());
        for (const std::string& d : run_dirs) dirs.push_back(d.c_str());

        OwnedString table;
        const cotaudit_status rc =
            cotaudit_summarize(dirs.data(), dirs.size(), &table.value);
        if (rc != COTAUDIT_OK) return fail(rc);
        std::cout << table.value;
        if (!summary_out.empty()) {
            std::ofstream f(summary_out);
            if (!f) {
                std::cerr << "error: cannot write " << summary_out << "\n";
                return 1;
            }
            f << table.value;
        }
        return 0;
    }

    if (make_toy->parsed()) {
        const cotaudit_status rc = cotaudit_write_toy_checkpoint(
            toy_dir.c_str(), toy_seed, toy_layers, toy_heads, toy_d, toy_ff,
            toy_vocab, toy_pos);
        if (rc != COTAUDIT_OK) return fail(rc);
        std::cout << "toy checkpoint written to " << toy_dir << "\n";
        return 0;
    }

    return 0;
}
