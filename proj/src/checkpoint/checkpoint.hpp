#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "checkpoint/param_set.hpp"
#include "engine/types.hpp"

namespace cotaudit {

// Loads a GPT-2-family checkpoint directory: config.json (HF field names)
// plus model.safetensors with the published GPT-2 tensor naming scheme
// (wte.weight, wpe.weight, h.<i>.*, ln_f.*; an optional "transformer."
// prefix is stripped, attention mask buffers and a tied lm_head.weight are
// recognized and skipped). Shapes are validated against the config before
// anything is computed; missing or unexpected tensors are reported by name.
std::pair<ModelConfig, ParamSet> load_checkpoint(const std::string& model_dir);

ModelConfig parse_model_config(const std::string& config_json_path);

struct ToyCheckpointOptions {
    int n_layers = 2;
    int n_heads = 2;
    int d_model = 8;
    int d_ff = 32;
    int vocab_size = 256;
    int max_positions = 128;
    float layernorm_epsilon = 1e-5f;
    std::uint64_t seed = 0;
};

// Writes a complete model directory (config.json, model.safetensors,
// vocab.json, merges.txt) with seeded random weights and a byte-level
// tokenizer, so the whole pipeline runs without downloading anything.
void write_toy_checkpoint(const std::string& dir, const ToyCheckpointOptions& opts);

// Builds the same parameters in memory (used heavily by tests).
std::pair<ModelConfig, ParamSet> make_toy_params(const ToyCheckpointOptions& opts);

}  // namespace cotaudit
