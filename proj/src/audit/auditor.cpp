#include "audit/auditor.hpp"

#include <algorithm>
#include <numeric>

#include "util/errors.hpp"

namespace cotaudit {

namespace {

TokenSpan token_span_for(const Encoding& enc, const CharSpan& span) {
    const std::vector<int> positions =
        char_span_to_token_positions(enc, span.start, span.end);
    if (positions.empty()) return {0, 0};
    return {positions.front(), positions.back() + 1};
}

}  // namespace

AuditRecord audit_instance(const Gpt2Model& model, const BpeTokenizer& tokenizer,
                           const PromptPair& pair, const CmiConfig& cfg,
                           const AblationFlags& ablations,
                           std::uint64_t instance_seed, const std::string& model_id) {
    cfg.validate();
    const ModelConfig& mc = model.config();

    const Encoding enc_with = tokenizer.encode(pair.with_cot);
    const Encoding enc_without = tokenizer.encode(pair.no_cot);
    if (static_cast<int>(enc_with.size()) > mc.max_positions ||
        static_cast<int>(enc_without.size()) > mc.max_positions) {
        throw_invalid("context overflow: instance '" + pair.id + "' needs " +
                      std::to_string(std::max(enc_with.size(), enc_without.size())) +
                      " tokens, model allows " + std::to_string(mc.max_positions));
    }

    const TokenSpan answer_span = token_span_for(enc_with, pair.answer_char_span_with);
    if (answer_span.length() == 0) {
        throw_invalid("instance '" + pair.id + "': answer span not located in prompt");
    }
    if (answer_span.start == 0) {
        throw_invalid("instance '" + pair.id +
                      "': answer span starts at position 0, nothing to condition on");
    }

    AuditRecord rec;
    rec.instance_id = pair.id;
    rec.model_id = model_id;
    rec.answer_kind = pair.answer_kind;

    // CoT position set: char-span mapping, or the last-tokens fallback
    std::vector<int> cot_positions;
    if (!pair.span_location_failed) {
        cot_positions = char_span_to_token_positions(enc_with, pair.cot_char_span.start,
                                                     pair.cot_char_span.end);
        // never patch inside the answer span itself
        std::erase_if(cot_positions, [&](int p) { return p >= answer_span.start; });
    }
    if (cot_positions.empty()) {
        rec.span_fallback_used = true;
        const int start = std::max(0, answer_span.start - kSpanFallbackTokens);
        for (int p = start; p < answer_span.start; ++p) cot_positions.push_back(p);
        if (cot_positions.empty()) {
            throw_invalid("instance '" + pair.id + "': no CoT positions available");
        }
    }

    InstanceContext ctx = make_instance_context(model, enc_with.ids, enc_without.ids,
                                                answer_span);
    rec.baseline_logp = ctx.baseline_logp;

    double cmi_sum = 0.0;
    for (int layer = 0; layer < mc.n_layers; ++layer) {
        LayerRecord lr = measure_layer(ctx, layer, cot_positions, cfg, instance_seed);
        cmi_sum += lr.cmi;
        rec.length_clamp_used = rec.length_clamp_used || lr.length_clamp_used;
        rec.control_pool_shrunk = rec.control_pool_shrunk || lr.control_pool_shrunk;
        rec.layers.push_back(std::move(lr));
    }
    rec.cmi_mean = cmi_sum / mc.n_layers;
    rec.bypass_mean = 1.0 - rec.cmi_mean;

    if (ablations.placebo) {
        for (int layer = 0; layer < mc.n_layers; ++layer) {
            rec.placebo.push_back(placebo_cmi(ctx, layer, cot_positions, cfg,
                                              NoiseSource{}, instance_seed));
        }
    }
    if (ablations.boundary) {
        for (int layer = 0; layer < mc.n_layers; ++layer) {
            const BoundaryResult br =
                boundary_sensitivity(ctx, layer, cot_positions, cfg, instance_seed);
            rec.boundary.push_back({br.rel_sensitivity, br.fragile, br.shrink_skipped});
        }
    }
    return rec;
}

ModelSummary summarize_run(std::span<const AuditRecord> records, int n_layers) {
    if (records.empty()) throw_invalid("summarize_run: no records");
    if (n_layers < 1) throw_invalid("summarize_run: n_layers must be >= 1");

    ModelSummary summary;
    summary.n_layers = n_layers;

    double mean_cmi_sum = 0.0;
    double active_count_sum = 0.0;
    std::vector<double> layer_cmi_sum(static_cast<size_t>(n_layers), 0.0);
    for (const AuditRecord& rec : records) {
        if (static_cast<int>(rec.layers.size()) != n_layers) {
            throw_invalid("summarize_run: record '" + rec.instance_id + "' has " +
                          std::to_string(rec.layers.size()) + " layers, expected " +
                          std::to_string(n_layers));
        }
        mean_cmi_sum += rec.cmi_mean;
        int active = 0;
        for (int l = 0; l < n_layers; ++l) {
            layer_cmi_sum[static_cast<size_t>(l)] += rec.layers[static_cast<size_t>(l)].cmi;
            if (rec.layers[static_cast<size_t>(l)].cmi > 0.0) ++active;
        }
        active_count_sum += active;
    }

    const double n = static_cast<double>(records.size());
    summary.mean_cmi = mean_cmi_sum / n;
    summary.avg_active_per_prompt = active_count_sum / n;
    summary.pct_active = 100.0 * summary.avg_active_per_prompt / n_layers;
    for (int l = 0; l < n_layers; ++l) {
        if (layer_cmi_sum[static_cast<size_t>(l)] / n > 0.0) {
            summary.active_layers.push_back(l);
        }
    }
    return summary;
}

std::vector<LayerInterval> reasoning_windows(const ModelSummary& summary,
                                             int min_run_length) {
    if (min_run_length < 1) throw_invalid("reasoning_windows: min_run_length >= 1");
    std::vector<LayerInterval> windows;
    const auto& active = summary.active_layers;
    size_t i = 0;
    while (i < active.size()) {
        size_t j = i;
        while (j + 1 < active.size() && active[j + 1] == active[j] + 1) ++j;
        if (static_cast<int>(j - i + 1) >= min_run_length) {
            windows.push_back({active[i], active[j]});
        }
        i = j + 1;
    }
    return windows;
}

}  // namespace cotaudit
