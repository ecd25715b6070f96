#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "engine/gpt2_model.hpp"
#include "engine/types.hpp"
#include "util/rng.hpp"

namespace cotaudit {

// Floors and draw count for the CoT Mediation Index.
struct CmiConfig {
    double drop_floor = 1e-4;   // total drop below this -> CMI is zero
    double denom_floor = 1e-3;  // keeps tiny denominators from inflating CMI
    double base_floor = 1e-2;   // reporting / stability checks only
    int control_samples = 8;
    std::uint64_t control_rng_seed = 0;

    void validate() const;
};

// Per-layer measurement. bypass == 1 - cmi exactly.
struct LayerRecord {
    int layer = 0;
    double cot_drop = 0.0;
    double control_drop = 0.0;
    std::vector<double> control_draw_drops;
    double cmi = 0.0;
    double bypass = 1.0;
    bool control_pool_shrunk = false;
    int control_k = 0;               // draw size actually used
    bool length_clamp_used = false;  // a patched index was clamped to the
                                     // No-CoT run's final position
};

// Non-negative decrease in answer log-probability, clipped at zero.
double cot_drop(double baseline_logp, double patched_logp);

// Uniform sample without replacement of k non-CoT positions, seeded.
// Throws (naming the shortfall) when fewer than k non-CoT positions exist.
std::vector<int> control_positions(std::span<const int> all_positions,
                                   std::span<const int> cot_positions, int k,
                                   Rng& rng);

// CMI: 0 when total drop is under drop_floor, otherwise
// max(0, d_cot - d_ctrl) / max(d_cot + d_ctrl, denom_floor). In [0, 1].
double cmi(double delta_cot, double delta_ctrl, const CmiConfig& cfg);

// Everything measure_layer needs about one instance: both runs' caches,
// the With-CoT token ids, where the answer lives, and the unpatched
// baseline. Build it once per instance, then sweep layers.
struct InstanceContext {
    const Gpt2Model* model = nullptr;
    std::vector<int> ids_with;
    std::vector<int> ids_without;
    HiddenStateCache cache_with;
    HiddenStateCache cache_without;
    TokenSpan answer_span;  // in ids_with
    double baseline_logp = 0.0;
    bool length_clamp_used = false;  // any patched index >= len(ids_without)
};

InstanceContext make_instance_context(const Gpt2Model& model,
                                      std::span<const int> ids_with,
                                      std::span<const int> ids_without,
                                      TokenSpan answer_span);

// One layer of the core intervention: one CoT patch, control_samples
// seeded control patches, CMI + Bypass. Control draws use a
// per-(instance seed, layer, draw) derived seed so any single draw is
// reproducible in isolation.
LayerRecord measure_layer(const InstanceContext& ctx, int layer,
                          std::span<const int> cot_positions, const CmiConfig& cfg,
                          std::uint64_t instance_seed);

// Same pipeline with noise patch sources instead of No-CoT states.
double placebo_cmi(const InstanceContext& ctx, int layer,
                   std::span<const int> cot_positions, const CmiConfig& cfg,
                   const NoiseSource& noise_spec, std::uint64_t instance_seed);

struct BoundaryVariant {
    std::string label;  // e.g. "start-1,end+1"
    double cmi_value;
};

struct BoundaryResult {
    double base_cmi = 0.0;
    std::vector<BoundaryVariant> variants;
    double rel_sensitivity = 0.0;
    bool fragile = false;         // rel_sensitivity > 0.5
    bool shrink_skipped = false;  // span length 1: shrink variants skipped
};

// CMI for the four {start+-1} x {end+-1} perturbations of the CoT token
// range, against the base; rel_sensitivity = max |CMI_v - CMI_base| /
// max(CMI_base, base_floor).
BoundaryResult boundary_sensitivity(const InstanceContext& ctx, int layer,
                                    std::span<const int> cot_positions,
                                    const CmiConfig& cfg,
                                    std::uint64_t instance_seed);

}  // namespace cotaudit
