#include "runner/run_config.hpp"

#include <filesystem>
#include <fstream>

#include "datasets/loaders.hpp"
#include "util/errors.hpp"

namespace cotaudit {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* field) {
    if (!j.contains(field)) {
        throw_config(std::string("config missing required field '") + field + "'");
    }
    return j.at(field);
}

}  // namespace

const char* dataset_kind_name(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::strategyqa: return "strategyqa";
        case DatasetKind::truthfulqa: return "truthfulqa";
        case DatasetKind::gsm8k: return "gsm8k";
    }
    return "?";
}

DatasetKind dataset_kind_from_name(const std::string& name) {
    if (name == "strategyqa") return DatasetKind::strategyqa;
    if (name == "truthfulqa") return DatasetKind::truthfulqa;
    if (name == "gsm8k") return DatasetKind::gsm8k;
    throw_config("unknown dataset kind '" + name +
                 "' (expected strategyqa, truthfulqa or gsm8k)");
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw_config("run config must be a JSON object");
    RunConfig cfg;
    cfg.model_dir = require(j, "model_dir").get<std::string>();
    if (cfg.model_dir.empty()) throw_config("model_dir is empty");

    const json& ds = require(j, "dataset");
    cfg.dataset_kind = dataset_kind_from_name(require(ds, "kind").get<std::string>());
    cfg.dataset_path = require(ds, "path").get<std::string>();
    if (ds.contains("n")) cfg.n = ds["n"].get<int>();
    if (cfg.n == 0) {
        switch (cfg.dataset_kind) {
            case DatasetKind::strategyqa: cfg.n = kDefaultStrategyQaN; break;
            case DatasetKind::truthfulqa: cfg.n = kDefaultTruthfulQaN; break;
            case DatasetKind::gsm8k: cfg.n = kDefaultGsm8kN; break;
        }
    }
    if (cfg.n < 1) throw_config("dataset n must be >= 1");

    cfg.model_id = j.value("model_id", "");
    if (cfg.model_id.empty()) {
        cfg.model_id =
            std::filesystem::path(cfg.model_dir).filename().string();
        if (cfg.model_id.empty()) cfg.model_id = cfg.model_dir;
    }

    if (j.contains("cmi")) {
        const json& c = j["cmi"];
        cfg.cmi.drop_floor = c.value("drop_floor", cfg.cmi.drop_floor);
        cfg.cmi.denom_floor = c.value("denom_floor", cfg.cmi.denom_floor);
        cfg.cmi.base_floor = c.value("base_floor", cfg.cmi.base_floor);
        cfg.cmi.control_samples = c.value("control_samples", cfg.cmi.control_samples);
    }
    try {
        cfg.cmi.validate();
    } catch (const Error& e) {
        throw_config(std::string("cmi config: ") + e.what());
    }

    if (j.contains("ablations")) {
        cfg.ablate_placebo = j["ablations"].value("placebo", false);
        cfg.ablate_boundary = j["ablations"].value("boundary", false);
    }
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(0));
    cfg.cmi.control_rng_seed = cfg.seed;
    cfg.workers = j.value("workers", 1);
    if (cfg.workers < 1) throw_config("workers must be >= 1");
    cfg.out_dir = j.value("out_dir", std::string("runs"));
    return cfg;
}

json RunConfig::to_json() const {
    return json{{"model_dir", model_dir},
                {"model_id", model_id},
                {"dataset",
                 {{"kind", dataset_kind_name(dataset_kind)},
                  {"path", dataset_path},
                  {"n", n}}},
                {"cmi",
                 {{"drop_floor", cmi.drop_floor},
                  {"denom_floor", cmi.denom_floor},
                  {"base_floor", cmi.base_floor},
                  {"control_samples", cmi.control_samples}}},
                {"ablations", {{"placebo", ablate_placebo}, {"boundary", ablate_boundary}}},
                {"seed", seed},
                {"workers", workers},
                {"out_dir", out_dir}};
}

BehaviorConfig BehaviorConfig::from_json(const json& j) {
    if (!j.is_object()) throw_config("behavior config must be a JSON object");
    BehaviorConfig cfg;

    const json& ep = require(j, "endpoint");
    cfg.endpoint.base_url = require(ep, "base_url").get<std::string>();
    cfg.endpoint.path = ep.value("path", cfg.endpoint.path);
    cfg.endpoint.model = ep.value("model", cfg.endpoint.model);
    cfg.endpoint.temperature = ep.value("temperature", cfg.endpoint.temperature);
    cfg.endpoint.api_key_env = ep.value("api_key_env", cfg.endpoint.api_key_env);
    cfg.endpoint.max_retries = ep.value("max_retries", cfg.endpoint.max_retries);
    cfg.endpoint.backoff_base_s = ep.value("backoff_base_s", cfg.endpoint.backoff_base_s);
    cfg.endpoint.timeout_s = ep.value("timeout_s", cfg.endpoint.timeout_s);

    const auto add_prompt = [&](const json& p, size_t index) {
        BehaviorPrompt prompt;
        if (p.is_string()) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "p%03zu", index);
            prompt.id = buf;
            prompt.text = p.get<std::string>();
        } else if (p.is_object()) {
            prompt.id = require(p, "id").get<std::string>();
            prompt.text = require(p, "prompt").get<std::string>();
        } else {
            throw_config("prompts entries must be strings or {id, prompt} objects");
        }
        cfg.prompts.push_back(std::move(prompt));
    };

    if (j.contains("prompts")) {
        if (!j["prompts"].is_array()) throw_config("prompts must be an array");
        size_t index = 0;
        for (const json& p : j["prompts"]) add_prompt(p, index++);
    } else if (j.contains("prompts_path")) {
        const std::string path = j["prompts_path"].get<std::string>();
        std::ifstream f(path);
        if (!f) throw_config("cannot open prompts file: " + path);
        json arr;
        try {
            arr = json::parse(f);
        } catch (const json::exception& e) {
            throw_config("prompts file malformed: " + std::string(e.what()));
        }
        if (!arr.is_array()) throw_config("prompts file must hold a JSON array");
        size_t index = 0;
        for (const json& p : arr) add_prompt(p, index++);
    } else {
        throw_config("behavior config needs 'prompts' or 'prompts_path'");
    }
    if (cfg.prompts.empty()) throw_config("behavior config has no prompts");

    cfg.patterns_path = j.value("patterns_path", "");
    if (j.contains("weights")) {
        const json& w = j["weights"];
        cfg.weights.regex = w.value("regex", cfg.weights.regex);
        cfg.weights.coherence = w.value("coherence", cfg.weights.coherence);
        cfg.weights.compression = w.value("compression", cfg.weights.compression);
        cfg.weights.hit_saturation = w.value("hit_saturation", cfg.weights.hit_saturation);
        cfg.weights.template_ratio_threshold =
            w.value("template_ratio_threshold", cfg.weights.template_ratio_threshold);
    }
    cfg.workers = j.value("workers", 1);
    if (cfg.workers < 1) throw_config("workers must be >= 1");
    cfg.out_dir = j.value("out_dir", std::string("runs"));
    return cfg;
}

json BehaviorConfig::to_json() const {
    json prompt_array = json::array();
    for (const BehaviorPrompt& p : prompts) {
        prompt_array.push_back(json{{"id", p.id}, {"prompt", p.text}});
    }
    return json{{"endpoint",
                 {{"base_url", endpoint.base_url},
                  {"path", endpoint.path},
                  {"model", endpoint.model},
                  {"temperature", endpoint.temperature},
                  {"api_key_env", endpoint.api_key_env},
                  {"max_retries", endpoint.max_retries},
                  {"backoff_base_s", endpoint.backoff_base_s},
                  {"timeout_s", endpoint.timeout_s}}},
                {"prompts", std::move(prompt_array)},
                {"patterns_path", patterns_path},
                {"weights",
                 {{"regex", weights.regex},
                  {"coherence", weights.coherence},
                  {"compression", weights.compression},
                  {"hit_saturation", weights.hit_saturation},
                  {"template_ratio_threshold", weights.template_ratio_threshold}}},
                {"workers", workers},
                {"out_dir", out_dir}};
}

}  // namespace cotaudit
