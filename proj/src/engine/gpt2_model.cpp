#include "engine/gpt2_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "engine/math.hpp"
#include "util/rng.hpp"

namespace cotaudit {

namespace {

void layernorm_rows(const float* in, float* out, int seq, int d,
                    const float* weight, const float* bias, float eps) {
    for (int t = 0; t < seq; ++t) {
        const float* x = in + static_cast<size_t>(t) * d;
        float* y = out + static_cast<size_t>(t) * d;
        double mean = 0.0;
        for (int i = 0; i < d; ++i) mean += x[i];
        mean /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            const double c = x[i] - mean;
            var += c * c;
        }
        var /= d;
        const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
        const float mu = static_cast<float>(mean);
        for (int i = 0; i < d; ++i) {
            y[i] = (x[i] - mu) * inv * weight[i] + bias[i];
        }
    }
}

inline float gelu_tanh(float x) {
    constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
    return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}

void check_finite(const float* data, size_t n, int layer) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i])) {
            throw Error(ErrorCode::model,
                        "non-finite hidden state at layer " + std::to_string(layer));
        }
    }
}

}  // namespace

Gpt2Model::Gpt2Model(ModelConfig config, ParamSet params)
    : config_(config), params_(std::move(params)) {
    config_.validate();
}

void Gpt2Model::validate_ids(std::span<const int> ids) const {
    if (ids.empty()) throw_invalid("empty token sequence");
    if (static_cast<int>(ids.size()) > config_.max_positions) {
        throw_invalid("sequence length " + std::to_string(ids.size()) +
                      " exceeds max_positions " + std::to_string(config_.max_positions));
    }
    for (int id : ids) {
        if (id < 0 || id >= config_.vocab_size) {
            throw_invalid("token id " + std::to_string(id) + " out of range");
        }
    }
}

void Gpt2Model::validate_plans(std::span<const int> ids,
                               const std::vector<PatchPlan>& plans) const {
    const int seq = static_cast<int>(ids.size());
    std::vector<std::pair<int, int>> taken;  // (layer, position)
    for (const auto& plan : plans) {
        if (plan.layer < -1 || plan.layer >= config_.n_layers) {
            throw_invalid("patch layer " + std::to_string(plan.layer) +
                          " out of range [-1, " + std::to_string(config_.n_layers) + ")");
        }
        if (plan.positions.empty()) throw_invalid("patch plan has no positions");
        int prev = -1;
        for (int p : plan.positions) {
            if (p < 0 || p >= seq) {
                throw_invalid("patch position " + std::to_string(p) +
                              " out of range [0, " + std::to_string(seq) + ")");
            }
            if (p <= prev) throw_invalid("patch positions must be sorted and unique");
            prev = p;
            taken.emplace_back(plan.layer, p);
        }
        if (const auto* slice = std::get_if<CacheSliceSource>(&plan.source)) {
            if (!slice->cache) throw_invalid("cache-slice source has no cache");
            if (slice->cache->d_model() != config_.d_model) {
                throw_invalid("cache-slice source d_model mismatch");
            }
            if (plan.layer >= slice->cache->n_layers()) {
                throw_invalid("cache-slice source does not cover layer " +
                              std::to_string(plan.layer));
            }
            if (!slice->clamp_to_last) {
                for (int p : plan.positions) {
                    if (p >= slice->cache->seq_len()) {
                        throw_invalid("patch position " + std::to_string(p) +
                                      " beyond source sequence and clamping disabled");
                    }
                }
            }
        } else if (const auto* ex = std::get_if<ExplicitSource>(&plan.source)) {
            if (ex->values.size() !=
                plan.positions.size() * static_cast<size_t>(config_.d_model)) {
                throw_invalid("explicit patch source shape mismatch: expected " +
                              std::to_string(plan.positions.size()) + " x " +
                              std::to_string(config_.d_model) + " values");
            }
        }
    }
    std::sort(taken.begin(), taken.end());
    if (std::adjacent_find(taken.begin(), taken.end()) != taken.end()) {
        throw_invalid("overlapping patch plans on the same (layer, position)");
    }
}

LogProbTable Gpt2Model::run_forward(std::span<const int> ids,
                                    const std::vector<PatchPlan>* plans,
                                    HiddenStateCache* cache_out) const {
    const int seq = static_cast<int>(ids.size());
    const int d = config_.d_model;
    const int d_ff = config_.d_ff;
    const int heads = config_.n_heads;
    const int hd = d / heads;
    const float eps = config_.layernorm_epsilon;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));

    std::vector<float> x(static_cast<size_t>(seq) * d);
    for (int t = 0; t < seq; ++t) {
        const float* wte_row = params_.wte.data() + static_cast<size_t>(ids[t]) * d;
        const float* wpe_row = params_.wpe.data() + static_cast<size_t>(t) * d;
        float* xr = x.data() + static_cast<size_t>(t) * d;
        for (int i = 0; i < d; ++i) xr[i] = wte_row[i] + wpe_row[i];
    }

    auto apply_patches_at = [&](int layer) {
        if (!plans) return;
        for (const auto& plan : *plans) {
            if (plan.layer != layer) continue;
            if (const auto* slice = std::get_if<CacheSliceSource>(&plan.source)) {
                const int src_last = slice->cache->seq_len() - 1;
                for (int p : plan.positions) {
                    const int sp = std::min(p, src_last);
                    std::memcpy(x.data() + static_cast<size_t>(p) * d,
                                slice->cache->row(layer, sp),
                                static_cast<size_t>(d) * sizeof(float));
                }
            } else if (const auto* ex = std::get_if<ExplicitSource>(&plan.source)) {
                for (size_t j = 0; j < plan.positions.size(); ++j) {
                    std::memcpy(x.data() + static_cast<size_t>(plan.positions[j]) * d,
                                ex->values.data() + j * static_cast<size_t>(d),
                                static_cast<size_t>(d) * sizeof(float));
                }
            } else if (const auto* noise = std::get_if<NoiseSource>(&plan.source)) {
                if (noise->kind == NoiseSource::Kind::own_states) continue;
                // per-channel statistics of this run's own states at this layer
                std::vector<double> mean(d, 0.0), sq(d, 0.0);
                for (int t = 0; t < seq; ++t) {
                    const float* xr = x.data() + static_cast<size_t>(t) * d;
                    for (int i = 0; i < d; ++i) {
                        mean[i] += xr[i];
                        sq[i] += static_cast<double>(xr[i]) * xr[i];
                    }
                }
                Rng rng(noise->seed);
                for (int i = 0; i < d; ++i) {
                    mean[i] /= seq;
                    sq[i] = std::sqrt(std::max(0.0, sq[i] / seq - mean[i] * mean[i]));
                }
                for (int p : plan.positions) {
                    float* xr = x.data() + static_cast<size_t>(p) * d;
                    for (int i = 0; i < d; ++i) {
                        xr[i] = static_cast<float>(
                            mean[i] + noise->std_scale * sq[i] * rng.gaussian());
                    }
                }
            }
        }
    };

    auto record = [&](int layer) {
        if (cache_out) {
            std::memcpy(cache_out->layer_slice(layer).data(), x.data(),
                        x.size() * sizeof(float));
        }
    };

    apply_patches_at(-1);
    check_finite(x.data(), x.size(), -1);
    record(-1);

    std::vector<float> norm(static_cast<size_t>(seq) * d);
    std::vector<float> qkv(static_cast<size_t>(seq) * 3 * d);
    std::vector<float> ctx(static_cast<size_t>(seq) * d);
    std::vector<float> proj(static_cast<size_t>(seq) * d);
    std::vector<float> hidden_ff(static_cast<size_t>(seq) * d_ff);
    std::vector<float> scores(static_cast<size_t>(seq));

    for (int l = 0; l < config_.n_layers; ++l) {
        const BlockParams& blk = params_.blocks[static_cast<size_t>(l)];

        // attention
        layernorm_rows(x.data(), norm.data(), seq, d, blk.ln1_weight.data(),
                       blk.ln1_bias.data(), eps);
        matmul(norm.data(), blk.attn_qkv_weight.data(), qkv.data(), seq, d, 3 * d,
               blk.attn_qkv_bias.data());

        std::fill(ctx.begin(), ctx.end(), 0.0f);
        for (int h = 0; h < heads; ++h) {
            const size_t q_off = static_cast<size_t>(h) * hd;
            const size_t k_off = static_cast<size_t>(d) + h * hd;
            const size_t v_off = 2 * static_cast<size_t>(d) + h * hd;
            for (int t = 0; t < seq; ++t) {
                const float* q = qkv.data() + static_cast<size_t>(t) * 3 * d + q_off;
                float max_score = -std::numeric_limits<float>::infinity();
                for (int s = 0; s <= t; ++s) {
                    const float* k = qkv.data() + static_cast<size_t>(s) * 3 * d + k_off;
                    float dot = 0.0f;
                    for (int i = 0; i < hd; ++i) dot += q[i] * k[i];
                    scores[s] = dot * scale;
                    max_score = std::max(max_score, scores[s]);
                }
                double z = 0.0;
                for (int s = 0; s <= t; ++s) {
                    scores[s] = std::exp(scores[s] - max_score);
                    z += scores[s];
                }
                const float inv_z = static_cast<float>(1.0 / z);
                float* out = ctx.data() + static_cast<size_t>(t) * d + q_off;
                for (int s = 0; s <= t; ++s) {
                    const float p = scores[s] * inv_z;
                    const float* v = qkv.data() + static_cast<size_t>(s) * 3 * d + v_off;
                    for (int i = 0; i < hd; ++i) out[i] += p * v[i];
                }
            }
        }
        matmul(ctx.data(), blk.attn_proj_weight.data(), proj.data(), seq, d, d,
               blk.attn_proj_bias.data());
        for (size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

        // mlp
        layernorm_rows(x.data(), norm.data(), seq, d, blk.ln2_weight.data(),
                       blk.ln2_bias.data(), eps);
        matmul(norm.data(), blk.mlp_fc_weight.data(), hidden_ff.data(), seq, d, d_ff,
               blk.mlp_fc_bias.data());
        for (auto& v : hidden_ff) v = gelu_tanh(v);
        matmul(hidden_ff.data(), blk.mlp_proj_weight.data(), proj.data(), seq, d_ff,
               d, blk.mlp_proj_bias.data());
        for (size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

        apply_patches_at(l);
        check_finite(x.data(), x.size(), l);
        record(l);
    }

    // final layernorm, tied unembedding, log softmax
    layernorm_rows(x.data(), norm.data(), seq, d, params_.lnf_weight.data(),
                   params_.lnf_bias.data(), eps);
    LogProbTable table(seq, config_.vocab_size);
    matmul_bt(norm.data(), params_.wte.data(), table.row(0), seq, d,
              config_.vocab_size);
    for (int t = 0; t < seq; ++t) {
        float* row = table.row(t);
        float max_logit = -std::numeric_limits<float>::infinity();
        for (int v = 0; v < config_.vocab_size; ++v) {
            max_logit = std::max(max_logit, row[v]);
        }
        if (!std::isfinite(max_logit)) {
            throw Error(ErrorCode::model, "non-finite logits at final layer");
        }
        double z = 0.0;
        for (int v = 0; v < config_.vocab_size; ++v) {
            z += std::exp(static_cast<double>(row[v]) - max_logit);
        }
        const float log_z = static_cast<float>(std::log(z)) + max_logit;
        for (int v = 0; v < config_.vocab_size; ++v) row[v] -= log_z;
    }
    return table;
}

ForwardResult Gpt2Model::forward_with_cache(std::span<const int> ids) const {
    validate_ids(ids);
    ForwardResult result;
    result.cache = HiddenStateCache(config_.n_layers, static_cast<int>(ids.size()),
                                    config_.d_model);
    result.logprobs = run_forward(ids, nullptr, &result.cache);
    return result;
}

LogProbTable Gpt2Model::forward_patched(std::span<const int> ids,
                                        const std::vector<PatchPlan>& plans) const {
    validate_ids(ids);
    validate_plans(ids, plans);
    return run_forward(ids, &plans, nullptr);
}

double Gpt2Model::answer_logprob(std::span<const int> ids, TokenSpan span,
                                 const LogProbTable& table) {
    if (span.start >= span.end) throw_invalid("answer span is empty");
    if (span.start <= 0) {
        throw_invalid("answer span starts at position 0: no conditioning context");
    }
    if (span.end > static_cast<int>(ids.size()) || span.end > table.seq_len()) {
        throw_invalid("answer span extends past the sequence");
    }
    double sum = 0.0;
    for (int t = span.start; t < span.end; ++t) {
        sum += table.at(t - 1, ids[static_cast<size_t>(t)]);
    }
    return sum;
}

std::vector<int> Gpt2Model::generate(std::span<const int> ids,
                                     const GenerateOptions& opts) const {
    validate_ids(ids);
    if (opts.temperature < 0.0) throw_invalid("temperature must be >= 0");
    if (!(opts.top_p > 0.0) || opts.top_p > 1.0) {
        throw_invalid("top_p must be in (0, 1]");
    }
    if (opts.max_new_tokens < 0) throw_invalid("max_new_tokens must be >= 0");
    if (static_cast<int>(ids.size()) + opts.max_new_tokens > config_.max_positions) {
        throw_invalid("context overflow: prompt + max_new_tokens exceeds max_positions");
    }

    std::vector<int> context(ids.begin(), ids.end());
    Rng rng(opts.seed);
    const int vocab = config_.vocab_size;

    for (int step = 0; step < opts.max_new_tokens; ++step) {
        const LogProbTable table = run_forward(context, nullptr, nullptr);
        const float* row = table.row(static_cast<int>(context.size()) - 1);

        int next;
        if (opts.temperature == 0.0) {
            next = 0;
            for (int v = 1; v < vocab; ++v) {
                if (row[v] > row[next]) next = v;
            }
        } else {
            // softmax(logits / T) equals softmax(logprobs / T): the log-Z
            // shift is constant over the row.
            std::vector<int> order(static_cast<size_t>(vocab));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (row[a] != row[b]) return row[a] > row[b];
                return a < b;
            });
            std::vector<double> probs(static_cast<size_t>(vocab));
            const double max_lp = row[order[0]];
            double z = 0.0;
            for (int v = 0; v < vocab; ++v) {
                probs[v] = std::exp((static_cast<double>(row[order[v]]) - max_lp) /
                                    opts.temperature);
                z += probs[v];
            }
            // smallest sorted prefix with cumulative mass >= top_p
            double cum = 0.0;
            int nucleus = vocab;
            for (int v = 0; v < vocab; ++v) {
                cum += probs[v] / z;
                if (cum >= opts.top_p) {
                    nucleus = v + 1;
                    break;
                }
            }
            double nucleus_mass = 0.0;
            for (int v = 0; v < nucleus; ++v) nucleus_mass += probs[v];
            const double u = rng.uniform() * nucleus_mass;
            double acc = 0.0;
            next = order[static_cast<size_t>(nucleus) - 1];
            for (int v = 0; v < nucleus; ++v) {
                acc += probs[v];
                if (u < acc) {
                    next = order[static_cast<size_t>(v)];
                    break;
                }
            }
        }
        context.push_back(next);
    }
    return context;
}

}  // namespace cotaudit
