#pragma once

#include <vector>

namespace cotaudit {

// Weights for one pre-layernorm GPT-2 block. Linear weights use the
// HF Conv1D layout: [in_features, out_features], row-major.
struct BlockParams {
    std::vector<float> ln1_weight, ln1_bias;        // [d_model]
    std::vector<float> attn_qkv_weight;             // [d_model, 3*d_model]
    std::vector<float> attn_qkv_bias;               // [3*d_model]
    std::vector<float> attn_proj_weight;            // [d_model, d_model]
    std::vector<float> attn_proj_bias;              // [d_model]
    std::vector<float> ln2_weight, ln2_bias;        // [d_model]
    std::vector<float> mlp_fc_weight;               // [d_model, d_ff]
    std::vector<float> mlp_fc_bias;                 // [d_ff]
    std::vector<float> mlp_proj_weight;             // [d_ff, d_model]
    std::vector<float> mlp_proj_bias;               // [d_model]
};

// Immutable after load; shared read-only across concurrent forwards.
// The unembedding is tied to wte.
struct ParamSet {
    std::vector<float> wte;          // [vocab_size, d_model]
    std::vector<float> wpe;          // [max_positions, d_model]
    std::vector<BlockParams> blocks;
    std::vector<float> lnf_weight, lnf_bias;  // [d_model]
};

}  // namespace cotaudit
