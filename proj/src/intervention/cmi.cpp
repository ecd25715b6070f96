#include "intervention/cmi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "util/errors.hpp"

namespace cotaudit {

void CmiConfig::validate() const {
    if (!(drop_floor > 0.0)) throw_invalid("drop_floor must be > 0");
    if (!(denom_floor > 0.0)) throw_invalid("denom_floor must be > 0");
    if (!(base_floor > 0.0)) throw_invalid("base_floor must be > 0");
    if (control_samples < 1) throw_invalid("control_samples must be >= 1");
}

double cot_drop(double baseline_logp, double patched_logp) {
    if (!std::isfinite(baseline_logp) || !std::isfinite(patched_logp)) {
        throw_invalid("cot_drop: non-finite log-probability");
    }
    return std::max(0.0, baseline_logp - patched_logp);
}

std::vector<int> control_positions(std::span<const int> all_positions,
                                   std::span<const int> cot_positions, int k,
                                   Rng& rng) {
    if (k < 0) throw_invalid("control_positions: k must be >= 0");
    std::vector<int> pool;
    pool.reserve(all_positions.size());
    for (int p : all_positions) {
        if (std::find(cot_positions.begin(), cot_positions.end(), p) ==
            cot_positions.end()) {
            pool.push_back(p);
        }
    }
    if (static_cast<int>(pool.size()) < k) {
        throw_invalid("control_positions: need " + std::to_string(k) +
                      " non-CoT positions, only " + std::to_string(pool.size()) +
                      " available (shortfall " +
                      std::to_string(k - static_cast<int>(pool.size())) + ")");
    }
    // partial Fisher-Yates
    for (int i = 0; i < k; ++i) {
        const size_t j = static_cast<size_t>(i) +
                         rng.below(pool.size() - static_cast<size_t>(i));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
}

double cmi(double delta_cot, double delta_ctrl, const CmiConfig& cfg) {
    cfg.validate();
    if (delta_cot < 0.0 || delta_ctrl < 0.0) {
        throw_invalid("cmi: drops must be non-negative");
    }
    if (!std::isfinite(delta_cot) || !std::isfinite(delta_ctrl)) {
        throw_invalid("cmi: non-finite drop");
    }
    const double total = delta_cot + delta_ctrl;
    if (total < cfg.drop_floor) return 0.0;
    const double numerator = std::max(0.0, delta_cot - delta_ctrl);
    const double denominator = std::max(total, cfg.denom_floor);
    return numerator / denominator;
}

InstanceContext make_instance_context(const Gpt2Model& model,
                                      std::span<const int> ids_with,
                                      std::span<const int> ids_without,
                                      TokenSpan answer_span) {
    InstanceContext ctx;
    ctx.model = &model;
    ctx.ids_with.assign(ids_with.begin(), ids_with.end());
    ctx.ids_without.assign(ids_without.begin(), ids_without.end());
    ctx.answer_span = answer_span;

    ForwardResult with = model.forward_with_cache(ids_with);
    ForwardResult without = model.forward_with_cache(ids_without);
    ctx.baseline_logp = Gpt2Model::answer_logprob(ids_with, answer_span, with.logprobs);
    ctx.cache_with = std::move(with.cache);
    ctx.cache_without = std::move(without.cache);
    return ctx;
}

namespace {

// One patched forward substituting No-CoT states at `positions`, scored
// against the instance baseline.
double patched_drop(const InstanceContext& ctx, int layer,
                    std::span<const int> positions, bool* clamped) {
    PatchPlan plan;
    plan.layer = layer;
    plan.positions.assign(positions.begin(), positions.end());
    plan.source = CacheSliceSource{&ctx.cache_without, /*clamp_to_last=*/true};
    if (clamped) {
        for (int p : plan.positions) {
            if (p >= static_cast<int>(ctx.ids_without.size())) *clamped = true;
        }
    }
    const LogProbTable table = ctx.model->forward_patched(ctx.ids_with, {plan});
    return cot_drop(ctx.baseline_logp,
                    Gpt2Model::answer_logprob(ctx.ids_with, ctx.answer_span, table));
}

double noise_drop(const InstanceContext& ctx, int layer,
                  std::span<const int> positions, const NoiseSource& spec) {
    PatchPlan plan;
    plan.layer = layer;
    plan.positions.assign(positions.begin(), positions.end());
    plan.source = spec;
    const LogProbTable table = ctx.model->forward_patched(ctx.ids_with, {plan});
    return cot_drop(ctx.baseline_logp,
                    Gpt2Model::answer_logprob(ctx.ids_with, ctx.answer_span, table));
}

std::vector<int> all_positions_of(const InstanceContext& ctx) {
    std::vector<int> all(ctx.ids_with.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
}

std::uint64_t draw_seed(std::uint64_t instance_seed, std::string_view stage,
                        int layer, int draw) {
    // layer+1 keeps the embedding layer (-1) addressable
    const std::uint64_t salt =
        (static_cast<std::uint64_t>(layer + 1) << 20) | static_cast<std::uint64_t>(draw);
    return derive_seed(derive_seed(instance_seed, stage), salt);
}

}  // namespace

LayerRecord measure_layer(const InstanceContext& ctx, int layer,
                          std::span<const int> cot_positions, const CmiConfig& cfg,
                          std::uint64_t instance_seed) {
    cfg.validate();
    if (cot_positions.empty()) throw_invalid("measure_layer: empty CoT position set");

    LayerRecord rec;
    rec.layer = layer;

    bool clamped = false;
    rec.cot_drop = patched_drop(ctx, layer, cot_positions, &clamped);

    const std::vector<int> all = all_positions_of(ctx);
    const int pool_size = static_cast<int>(all.size() - cot_positions.size());
    const int k = std::min(static_cast<int>(cot_positions.size()), pool_size);
    rec.control_k = std::max(0, k);
    rec.control_pool_shrunk = rec.control_k < static_cast<int>(cot_positions.size());

    double sum = 0.0;
    for (int i = 0; i < cfg.control_samples; ++i) {
        double drop = 0.0;
        if (rec.control_k > 0) {
            Rng rng(draw_seed(instance_seed ^ cfg.control_rng_seed, "control", layer, i));
            const std::vector<int> picks =
                control_positions(all, cot_positions, rec.control_k, rng);
            drop = patched_drop(ctx, layer, picks, &clamped);
        }
        rec.control_draw_drops.push_back(drop);
        sum += drop;
    }
    rec.control_drop = sum / cfg.control_samples;
    rec.cmi = cmi(rec.cot_drop, rec.control_drop, cfg);
    rec.bypass = 1.0 - rec.cmi;
    rec.length_clamp_used = clamped;
    return rec;
}

double placebo_cmi(const InstanceContext& ctx, int layer,
                   std::span<const int> cot_positions, const CmiConfig& cfg,
                   const NoiseSource& noise_spec, std::uint64_t instance_seed) {
    cfg.validate();
    if (cot_positions.empty()) throw_invalid("placebo_cmi: empty CoT position set");

    const std::uint64_t base = derive_seed(instance_seed ^ noise_spec.seed, "placebo");

    NoiseSource cot_noise = noise_spec;
    cot_noise.seed = draw_seed(base, "noise-cot", layer, 0);
    const double d_cot = noise_drop(ctx, layer, cot_positions, cot_noise);

    const std::vector<int> all = all_positions_of(ctx);
    const int pool_size = static_cast<int>(all.size() - cot_positions.size());
    const int k = std::max(0, std::min(static_cast<int>(cot_positions.size()), pool_size));

    double sum = 0.0;
    for (int i = 0; i < cfg.control_samples; ++i) {
        double drop = 0.0;
        if (k > 0) {
            Rng rng(draw_seed(base, "pos-ctrl", layer, i));
            const std::vector<int> picks = control_positions(all, cot_positions, k, rng);
            NoiseSource ctrl_noise = noise_spec;
            ctrl_noise.seed = draw_seed(base, "noise-ctrl", layer, i);
            drop = noise_drop(ctx, layer, picks, ctrl_noise);
        }
        sum += drop;
    }
    return cmi(d_cot, sum / cfg.control_samples, cfg);
}

BoundaryResult boundary_sensitivity(const InstanceContext& ctx, int layer,
                                    std::span<const int> cot_positions,
                                    const CmiConfig& cfg,
                                    std::uint64_t instance_seed) {
    if (cot_positions.empty()) {
        throw_invalid("boundary_sensitivity: empty CoT position set");
    }
    BoundaryResult result;
    result.base_cmi = measure_layer(ctx, layer, cot_positions, cfg, instance_seed).cmi;

    const int c0 = *std::min_element(cot_positions.begin(), cot_positions.end());
    const int c1 = *std::max_element(cot_positions.begin(), cot_positions.end()) + 1;
    const int length = c1 - c0;
    // never perturb into the answer span: its states feed the scored tokens
    const int max_end = std::min(static_cast<int>(ctx.ids_with.size()),
                                 ctx.answer_span.start);

    double max_abs_delta = 0.0;
    for (const int ds : {-1, +1}) {
        for (const int de : {-1, +1}) {
            if (length == 1 && (ds == +1 || de == -1)) {
                result.shrink_skipped = true;
                continue;
            }
            const int s = std::max(0, c0 + ds);
            const int e = std::min(max_end, c1 + de);
            if (s >= e) {
                result.shrink_skipped = true;
                continue;
            }
            std::vector<int> positions(static_cast<size_t>(e - s));
            std::iota(positions.begin(), positions.end(), s);
            const double v =
                measure_layer(ctx, layer, positions, cfg, instance_seed).cmi;
            std::string label = "start";
            label += (ds > 0 ? "+1" : "-1");
            label += ",end";
            label += (de > 0 ? "+1" : "-1");
            result.variants.push_back({label, v});
            max_abs_delta = std::max(max_abs_delta, std::abs(v - result.base_cmi));
        }
    }
    result.rel_sensitivity =
        max_abs_delta / std::max(result.base_cmi, cfg.base_floor);
    result.fragile = result.rel_sensitivity > 0.5;
    return result;
}

}  // namespace cotaudit
