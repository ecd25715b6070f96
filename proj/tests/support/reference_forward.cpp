#include "support/reference_forward.hpp"

#include <cmath>
#include <cstddef>

namespace cotaudit::testing {

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Vec layernorm_ref(const Vec& x, const std::vector<float>& w,
                  const std::vector<float>& b, double eps) {
    const size_t d = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    Vec out(d);
    for (size_t i = 0; i < d; ++i) {
        out[i] = (x[i] - mean) / std::sqrt(var + eps) * w[i] + b[i];
    }
    return out;
}

double gelu_ref(double x) {
    // tanh approximation, as used by the GPT-2 family
    return 0.5 * x *
           (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

// y = x @ W + b with W stored row-major [in, out]
Vec linear_ref(const Vec& x, const std::vector<float>& w,
               const std::vector<float>& b, size_t in, size_t out) {
    Vec y(out, 0.0);
    for (size_t o = 0; o < out; ++o) {
        double acc = b.empty() ? 0.0 : static_cast<double>(b[o]);
        for (size_t i = 0; i < in; ++i) {
            acc += x[i] * static_cast<double>(w[i * out + o]);
        }
        y[o] = acc;
    }
    return y;
}

void apply_patches(Mat& states, const std::vector<RefPatch>& patches, int layer) {
    for (const auto& p : patches) {
        if (p.layer != layer) continue;
        for (size_t j = 0; j < p.positions.size(); ++j) {
            states[static_cast<size_t>(p.positions[j])] = p.rows[j];
        }
    }
}

}  // namespace

RefForwardResult reference_forward(const ModelConfig& cfg, const ParamSet& params,
                                   std::span<const int> ids,
                                   const std::vector<RefPatch>& patches) {
    const size_t seq = ids.size();
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t heads = static_cast<size_t>(cfg.n_heads);
    const size_t hd = d / heads;
    const double eps = static_cast<double>(cfg.layernorm_epsilon);

    RefForwardResult res;

    // embeddings
    Mat x(seq, Vec(d, 0.0));
    for (size_t t = 0; t < seq; ++t) {
        for (size_t i = 0; i < d; ++i) {
            x[t][i] = static_cast<double>(params.wte[static_cast<size_t>(ids[t]) * d + i]) +
                      static_cast<double>(params.wpe[t * d + i]);
        }
    }
    apply_patches(x, patches, -1);
    res.hidden.push_back(x);

    for (int l = 0; l < cfg.n_layers; ++l) {
        const BlockParams& blk = params.blocks[static_cast<size_t>(l)];

        // attention
        Mat qkv(seq);
        for (size_t t = 0; t < seq; ++t) {
            Vec a = layernorm_ref(x[t], blk.ln1_weight, blk.ln1_bias, eps);
            qkv[t] = linear_ref(a, blk.attn_qkv_weight, blk.attn_qkv_bias, d, 3 * d);
        }
        Mat attn_out(seq, Vec(d, 0.0));
        for (size_t h = 0; h < heads; ++h) {
            for (size_t t = 0; t < seq; ++t) {
                // scores over s <= t
                Vec scores(t + 1, 0.0);
                double max_score = -1e300;
                for (size_t s = 0; s <= t; ++s) {
                    double dot = 0.0;
                    for (size_t i = 0; i < hd; ++i) {
                        dot += qkv[t][h * hd + i] * qkv[s][d + h * hd + i];
                    }
                    scores[s] = dot / std::sqrt(static_cast<double>(hd));
                    if (scores[s] > max_score) max_score = scores[s];
                }
                double z = 0.0;
                for (size_t s = 0; s <= t; ++s) {
                    scores[s] = std::exp(scores[s] - max_score);
                    z += scores[s];
                }
                for (size_t s = 0; s <= t; ++s) {
                    const double p = scores[s] / z;
                    for (size_t i = 0; i < hd; ++i) {
                        attn_out[t][h * hd + i] += p * qkv[s][2 * d + h * hd + i];
                    }
                }
            }
        }
        for (size_t t = 0; t < seq; ++t) {
            Vec proj = linear_ref(attn_out[t], blk.attn_proj_weight, blk.attn_proj_bias, d, d);
            for (size_t i = 0; i < d; ++i) x[t][i] += proj[i];
        }

        // mlp
        for (size_t t = 0; t < seq; ++t) {
            Vec m = layernorm_ref(x[t], blk.ln2_weight, blk.ln2_bias, eps);
            Vec h1 = linear_ref(m, blk.mlp_fc_weight, blk.mlp_fc_bias, d,
                                static_cast<size_t>(cfg.d_ff));
            for (double& v : h1) v = gelu_ref(v);
            Vec h2 = linear_ref(h1, blk.mlp_proj_weight, blk.mlp_proj_bias,
                                static_cast<size_t>(cfg.d_ff), d);
            for (size_t i = 0; i < d; ++i) x[t][i] += h2[i];
        }

        apply_patches(x, patches, l);
        res.hidden.push_back(x);
    }

    // final layernorm + tied unembedding + log softmax
    res.logprobs.assign(seq, Vec(static_cast<size_t>(cfg.vocab_size), 0.0));
    for (size_t t = 0; t < seq; ++t) {
        Vec xf = layernorm_ref(x[t], params.lnf_weight, params.lnf_bias, eps);
        Vec logits(static_cast<size_t>(cfg.vocab_size), 0.0);
        double max_logit = -1e300;
        for (size_t v = 0; v < static_cast<size_t>(cfg.vocab_size); ++v) {
            double acc = 0.0;
            for (size_t i = 0; i < d; ++i) {
                acc += xf[i] * static_cast<double>(params.wte[v * d + i]);
            }
            logits[v] = acc;
            if (acc > max_logit) max_logit = acc;
        }
        double z = 0.0;
        for (double lv : logits) z += std::exp(lv - max_logit);
        const double logz = std::log(z) + max_logit;
        for (size_t v = 0; v < logits.size(); ++v) {
            res.logprobs[t][v] = logits[v] - logz;
        }
    }
    return res;
}

double reference_answer_logprob(const RefForwardResult& ref, std::span<const int> ids,
                                int start, int end) {
    // chain rule: log prod P = sum of per-token probabilities, computed the
    // long way round through probability space
    double prod_log = 0.0;
    for (int t = start; t < end; ++t) {
        const double p = std::exp(ref.logprobs[static_cast<size_t>(t - 1)]
                                              [static_cast<size_t>(ids[t])]);
        prod_log += std::log(p);
    }
    return prod_log;
}

}  // namespace cotaudit::testing
