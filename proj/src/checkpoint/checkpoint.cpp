#include "checkpoint/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "checkpoint/safetensors.hpp"
#include "tokenizer/bpe_tokenizer.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

namespace cotaudit {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw_io("cannot open config file: " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw_model("config file malformed: " + std::string(e.what()));
    }
}

void check_all_finite(const std::string& name, const std::vector<float>& data) {
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw_model("tensor '" + name + "' contains non-finite values");
        }
    }
}

class TensorTaker {
public:
    explicit TensorTaker(TensorMap tensors) : tensors_(std::move(tensors)) {}

    std::vector<float> take(const std::string& name,
                            std::vector<std::int64_t> expected_shape) {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) {
            missing_.push_back(name);
            return {};
        }
        if (it->second.shape != expected_shape) {
            std::ostringstream msg;
            msg << "tensor '" << name << "' has shape [";
            for (size_t i = 0; i < it->second.shape.size(); ++i) {
                msg << (i ? ", " : "") << it->second.shape[i];
            }
            msg << "], expected [";
            for (size_t i = 0; i < expected_shape.size(); ++i) {
                msg << (i ? ", " : "") << expected_shape[i];
            }
            msg << "]";
            throw_model(msg.str());
        }
        check_all_finite(name, it->second.data);
        std::vector<float> data = std::move(it->second.data);
        tensors_.erase(it);
        return data;
    }

    void finish() const {
        if (!missing_.empty()) {
            std::string msg = "missing tensors:";
            for (const auto& n : missing_) msg += " " + n;
            throw_model(msg);
        }
        if (!tensors_.empty()) {
            std::string msg = "unexpected tensors:";
            for (const auto& [n, t] : tensors_) msg += " " + n;
            throw_model(msg);
        }
    }

private:
    TensorMap tensors_;
    std::vector<std::string> missing_;
};

}  // namespace

ModelConfig parse_model_config(const std::string& config_json_path) {
    const json j = read_json_file(config_json_path);
    ModelConfig cfg;
    try {
        cfg.n_layers = j.at("n_layer").get<int>();
        cfg.n_heads = j.at("n_head").get<int>();
        cfg.d_model = j.at("n_embd").get<int>();
        if (j.contains("n_positions") && j["n_positions"].is_number()) {
            cfg.max_positions = j["n_positions"].get<int>();
        } else if (j.contains("n_ctx") && j["n_ctx"].is_number()) {
            cfg.max_positions = j["n_ctx"].get<int>();
        } else {
            throw_model("config file missing n_positions / n_ctx");
        }
        cfg.vocab_size = j.at("vocab_size").get<int>();
        cfg.layernorm_epsilon = j.value("layer_norm_epsilon", 1e-5f);
        if (j.contains("n_inner") && j["n_inner"].is_number()) {
            cfg.d_ff = j["n_inner"].get<int>();
        } else {
            cfg.d_ff = 4 * cfg.d_model;
        }
    } catch (const json::exception& e) {
        throw_model("config file malformed: " + std::string(e.what()));
    }
    cfg.validate();
    return cfg;
}

std::pair<ModelConfig, ParamSet> load_checkpoint(const std::string& model_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(model_dir)) {
        throw_model("model directory not found: " + model_dir);
    }
    const ModelConfig cfg = parse_model_config((fs::path(model_dir) / "config.json").string());

    TensorMap raw = read_safetensors((fs::path(model_dir) / "model.safetensors").string());

    // normalize: strip an optional "transformer." prefix, drop the causal
    // mask buffers some exports carry, and drop lm_head.weight when it is
    // just the tied embedding again
    TensorMap tensors;
    for (auto& [name, t] : raw) {
        std::string key = name;
        if (key.rfind("transformer.", 0) == 0) key = key.substr(12);
        const bool mask_buffer =
            key.rfind("h.", 0) == 0 &&
            (key.ends_with(".attn.bias") || key.ends_with(".attn.masked_bias"));
        if (mask_buffer) continue;
        if (key == "lm_head.weight") {
            const std::vector<std::int64_t> tied{cfg.vocab_size, cfg.d_model};
            if (t.shape != tied) {
                throw_model("lm_head.weight present but not the tied embedding shape");
            }
            continue;
        }
        tensors.emplace(std::move(key), std::move(t));
    }

    const std::int64_t d = cfg.d_model;
    const std::int64_t f = cfg.d_ff;
    TensorTaker taker(std::move(tensors));

    ParamSet params;
    params.wte = taker.take("wte.weight", {cfg.vocab_size, d});
    params.wpe = taker.take("wpe.weight", {cfg.max_positions, d});
    params.blocks.resize(static_cast<size_t>(cfg.n_layers));
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        BlockParams& blk = params.blocks[static_cast<size_t>(i)];
        blk.ln1_weight = taker.take(p + "ln_1.weight", {d});
        blk.ln1_bias = taker.take(p + "ln_1.bias", {d});
        blk.attn_qkv_weight = taker.take(p + "attn.c_attn.weight", {d, 3 * d});
        blk.attn_qkv_bias = taker.take(p + "attn.c_attn.bias", {3 * d});
        blk.attn_proj_weight = taker.take(p + "attn.c_proj.weight", {d, d});
        blk.attn_proj_bias = taker.take(p + "attn.c_proj.bias", {d});
        blk.ln2_weight = taker.take(p + "ln_2.weight", {d});
        blk.ln2_bias = taker.take(p + "ln_2.bias", {d});
        blk.mlp_fc_weight = taker.take(p + "mlp.c_fc.weight", {d, f});
        blk.mlp_fc_bias = taker.take(p + "mlp.c_fc.bias", {f});
        blk.mlp_proj_weight = taker.take(p + "mlp.c_proj.weight", {f, d});
        blk.mlp_proj_bias = taker.take(p + "mlp.c_proj.bias", {d});
    }
    params.lnf_weight = taker.take("ln_f.weight", {d});
    params.lnf_bias = taker.take("ln_f.bias", {d});
    taker.finish();

    return {cfg, std::move(params)};
}

std::pair<ModelConfig, ParamSet> make_toy_params(const ToyCheckpointOptions& opts) {
    ModelConfig cfg;
    cfg.n_layers = opts.n_layers;
    cfg.n_heads = opts.n_heads;
    cfg.d_model = opts.d_model;
    cfg.d_ff = opts.d_ff;
    cfg.vocab_size = opts.vocab_size;
    cfg.max_positions = opts.max_positions;
    cfg.layernorm_epsilon = opts.layernorm_epsilon;
    cfg.validate();

    Rng rng(opts.seed);
    const auto fill = [&](std::vector<float>& v, size_t n, double stddev,
                          double mean = 0.0) {
        v.resize(n);
        for (auto& x : v) x = static_cast<float>(mean + stddev * rng.gaussian());
    };

    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t f = static_cast<size_t>(cfg.d_ff);

    ParamSet params;
    fill(params.wte, static_cast<size_t>(cfg.vocab_size) * d, 1.0);
    fill(params.wpe, static_cast<size_t>(cfg.max_positions) * d, 0.3);
    params.blocks.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& blk : params.blocks) {
        fill(blk.ln1_weight, d, 0.05, 1.0);
        fill(blk.ln1_bias, d, 0.05);
        fill(blk.attn_qkv_weight, d * 3 * d, 0.5 / std::sqrt(static_cast<double>(d)));
        fill(blk.attn_qkv_bias, 3 * d, 0.02);
        fill(blk.attn_proj_weight, d * d, 0.5 / std::sqrt(static_cast<double>(d)));
        fill(blk.attn_proj_bias, d, 0.02);
        fill(blk.ln2_weight, d, 0.05, 1.0);
        fill(blk.ln2_bias, d, 0.05);
        fill(blk.mlp_fc_weight, d * f, 0.5 / std::sqrt(static_cast<double>(d)));
        fill(blk.mlp_fc_bias, f, 0.02);
        fill(blk.mlp_proj_weight, f * d, 0.5 / std::sqrt(static_cast<double>(f)));
        fill(blk.mlp_proj_bias, d, 0.02);
    }
    fill(params.lnf_weight, d, 0.05, 1.0);
    fill(params.lnf_bias, d, 0.05);
    return {cfg, std::move(params)};
}

void write_toy_checkpoint(const std::string& dir, const ToyCheckpointOptions& opts) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    auto [cfg, params] = make_toy_params(opts);

    json config{{"model_type", "gpt2"},
                {"n_layer", cfg.n_layers},
                {"n_head", cfg.n_heads},
                {"n_embd", cfg.d_model},
                {"n_inner", cfg.d_ff},
                {"n_positions", cfg.max_positions},
                {"vocab_size", cfg.vocab_size},
                {"layer_norm_epsilon", cfg.layernorm_epsilon}};
    std::ofstream cf(fs::path(dir) / "config.json");
    if (!cf) throw_io("cannot write config.json under " + dir);
    cf << config.dump(2) << "\n";

    const std::int64_t d = cfg.d_model;
    const std::int64_t f = cfg.d_ff;
    TensorMap tensors;
    const auto put = [&](const std::string& name, std::vector<float> data,
                         std::vector<std::int64_t> shape) {
        tensors[name] = TensorEntry{std::move(shape), std::move(data)};
    };
    put("wte.weight", params.wte, {cfg.vocab_size, d});
    put("wpe.weight", params.wpe, {cfg.max_positions, d});
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "h." + std::to_string(i) + ".";
        BlockParams& blk = params.blocks[static_cast<size_t>(i)];
        put(p + "ln_1.weight", blk.ln1_weight, {d});
        put(p + "ln_1.bias", blk.ln1_bias, {d});
        put(p + "attn.c_attn.weight", blk.attn_qkv_weight, {d, 3 * d});
        put(p + "attn.c_attn.bias", blk.attn_qkv_bias, {3 * d});
        put(p + "attn.c_proj.weight", blk.attn_proj_weight, {d, d});
        put(p + "attn.c_proj.bias", blk.attn_proj_bias, {d});
        put(p + "ln_2.weight", blk.ln2_weight, {d});
        put(p + "ln_2.bias", blk.ln2_bias, {d});
        put(p + "mlp.c_fc.weight", blk.mlp_fc_weight, {d, f});
        put(p + "mlp.c_fc.bias", blk.mlp_fc_bias, {f});
        put(p + "mlp.c_proj.weight", blk.mlp_proj_weight, {f, d});
        put(p + "mlp.c_proj.bias", blk.mlp_proj_bias, {d});
    }
    put("ln_f.weight", params.lnf_weight, {d});
    put("ln_f.bias", params.lnf_bias, {d});
    write_safetensors((fs::path(dir) / "model.safetensors").string(), tensors);

    write_byte_level_tokenizer(dir);
}

}  // namespace cotaudit
