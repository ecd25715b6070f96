#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "datasets/prompt_pair.hpp"
#include "engine/gpt2_model.hpp"
#include "intervention/cmi.hpp"
#include "tokenizer/bpe_tokenizer.hpp"

namespace cotaudit {

struct AblationFlags {
    bool placebo = false;
    bool boundary = false;
};

struct BoundarySummary {
    double rel_sensitivity = 0.0;
    bool fragile = false;
    bool shrink_skipped = false;
};

// Full per-instance result: baseline, one LayerRecord per layer, optional
// ablations, and the fallback/clamp metadata needed to filter results.
struct AuditRecord {
    std::string instance_id;
    std::string model_id;
    AnswerKind answer_kind = AnswerKind::single;
    double baseline_logp = 0.0;
    std::vector<LayerRecord> layers;  // one per layer, 0..n_layers-1
    double cmi_mean = 0.0;
    double bypass_mean = 1.0;
    std::vector<double> placebo;              // per layer, when enabled
    std::vector<BoundarySummary> boundary;    // per layer, when enabled
    bool span_fallback_used = false;
    bool length_clamp_used = false;
    bool control_pool_shrunk = false;
};

// Cross-run statistics in the two aggregations the cross-model table uses:
// active_layers comes from the prompt-averaged per-layer CMI, pct_active
// from the per-prompt active-layer count averaged over prompts.
struct ModelSummary {
    double mean_cmi = 0.0;
    int n_layers = 0;
    std::vector<int> active_layers;      // mean-over-prompts CMI_l > 0
    double avg_active_per_prompt = 0.0;  // mean over prompts of #active layers
    double pct_active = 0.0;             // 100 * avg_active_per_prompt / n_layers
};

// Inclusive layer interval [first, last].
struct LayerInterval {
    int first = 0;
    int last = 0;
    bool operator==(const LayerInterval&) const = default;
};

// Number of prompt tokens used when the CoT char span cannot be located:
// the CoT position set falls back to the last 8 tokens before the answer.
inline constexpr int kSpanFallbackTokens = 8;

AuditRecord audit_instance(const Gpt2Model& model, const BpeTokenizer& tokenizer,
                           const PromptPair& pair, const CmiConfig& cfg,
                           const AblationFlags& ablations,
                           std::uint64_t instance_seed,
                           const std::string& model_id = "");

ModelSummary summarize_run(std::span<const AuditRecord> records, int n_layers);

// Maximal contiguous runs of active layers, shortest-first filtered by
// min_run_length. An analysis heuristic, not a calibrated detector.
std::vector<LayerInterval> reasoning_windows(const ModelSummary& summary,
                                             int min_run_length = 1);

}  // namespace cotaudit
