#pragma once

// Independent brute-force GPT-2 forward pass used as the oracle for the
// engine. Deliberately shares no code with src/engine: every operation is
// written out as plain double-precision loops directly over ParamSet
// arrays. Keep it slow and obvious.

#include <span>
#include <vector>

#include "checkpoint/param_set.hpp"
#include "engine/types.hpp"

namespace cotaudit::testing {

struct RefPatch {
    int layer;                        // -1 = embedding output
    std::vector<int> positions;
    std::vector<std::vector<double>> rows;  // one row per position
};

struct RefForwardResult {
    // hidden[k][t] is the state of token t after stage k
    // (k = 0: embeddings, k = l+1: output of block l), as consumed by the
    // next stage (i.e. post-patch).
    std::vector<std::vector<std::vector<double>>> hidden;
    // logprobs[t][v] = log softmax of next-token distribution at position t
    std::vector<std::vector<double>> logprobs;
};

RefForwardResult reference_forward(const ModelConfig& cfg, const ParamSet& params,
                                   std::span<const int> ids,
                                   const std::vector<RefPatch>& patches = {});

// Teacher-forced log-likelihood of ids[start..end) under the reference
// log-prob table, computed as log of a product of probabilities.
double reference_answer_logprob(const RefForwardResult& ref, std::span<const int> ids,
                                int start, int end);

}  // namespace cotaudit::testing
