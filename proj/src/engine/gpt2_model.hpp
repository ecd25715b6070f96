#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "checkpoint/param_set.hpp"
#include "engine/types.hpp"

namespace cotaudit {

struct ForwardResult {
    HiddenStateCache cache;
    LogProbTable logprobs;
};

struct GenerateOptions {
    int max_new_tokens = 80;
    double temperature = 0.7;
    double top_p = 0.9;
    std::uint64_t seed = 0;
};

// Deterministic forward pass for GPT-2-family decoder-only transformers:
// learned positional embeddings, pre-layernorm blocks, tanh-GELU MLP, tied
// unembedding. Weights are immutable after construction; every forward owns
// its private workspace, so concurrent read-only forwards are safe.
//
// All math is float32; layernorm statistics and log-prob sums accumulate in
// double. No KV caching: a patch invalidates everything downstream, so each
// measurement is a full clean forward.
class Gpt2Model {
public:
    Gpt2Model(ModelConfig config, ParamSet params);

    const ModelConfig& config() const { return config_; }

    ForwardResult forward_with_cache(std::span<const int> token_ids) const;

    // Overwrites the output of block `plan.layer` at `plan.positions` before
    // block `layer+1` consumes it. An empty plan list reproduces
    // forward_with_cache's log-prob table bit for bit.
    LogProbTable forward_patched(std::span<const int> token_ids,
                                 const std::vector<PatchPlan>& plans) const;

    // Teacher-forced log-likelihood of token_ids[span.start..span.end), i.e.
    // the sum over the span of log P(token_t | tokens_<t). Always <= 0.
    static double answer_logprob(std::span<const int> token_ids, TokenSpan answer_span,
                                 const LogProbTable& table);

    // Nucleus sampling, seeded. temperature == 0 is the greedy-argmax limit.
    std::vector<int> generate(std::span<const int> token_ids,
                              const GenerateOptions& opts) const;

private:
    LogProbTable run_forward(std::span<const int> token_ids,
                             const std::vector<PatchPlan>* plans,
                             HiddenStateCache* cache_out) const;
    void validate_ids(std::span<const int> token_ids) const;
    void validate_plans(std::span<const int> token_ids,
                        const std::vector<PatchPlan>& plans) const;

    ModelConfig config_;
    ParamSet params_;
};

}  // namespace cotaudit
