#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "util/errors.hpp"

namespace cotaudit {

struct ModelConfig {
    int n_layers = 0;
    int n_heads = 0;
    int d_model = 0;
    int d_ff = 0;
    int vocab_size = 0;
    int max_positions = 0;
    float layernorm_epsilon = 1e-5f;

    void validate() const {
        if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 ||
            vocab_size < 1 || max_positions < 1) {
            throw_invalid("ModelConfig: all counts must be >= 1");
        }
        if (d_model % n_heads != 0) {
            throw_invalid("ModelConfig: d_model (" + std::to_string(d_model) +
                          ") not divisible by n_heads (" + std::to_string(n_heads) + ")");
        }
        if (!(layernorm_epsilon > 0.0f)) {
            throw_invalid("ModelConfig: layernorm_epsilon must be > 0");
        }
    }
};

// Half-open token index range [start, end).
struct TokenSpan {
    int start = 0;
    int end = 0;
    int length() const { return end - start; }
};

// Hidden states for one forward pass. Slot 0 holds the embedding output
// (addressable as layer -1), slot l+1 holds the output of block l.
class HiddenStateCache {
public:
    HiddenStateCache() = default;
    HiddenStateCache(int n_layers, int seq_len, int d_model)
        : n_layers_(n_layers), seq_len_(seq_len), d_model_(d_model),
          states_(static_cast<size_t>(n_layers + 1) * seq_len * d_model, 0.0f) {}

    int n_layers() const { return n_layers_; }
    int seq_len() const { return seq_len_; }
    int d_model() const { return d_model_; }

    // layer in [-1, n_layers); -1 is the embedding output.
    const float* row(int layer, int pos) const {
        return states_.data() + offset(layer, pos);
    }
    float* row(int layer, int pos) {
        return states_.data() + offset(layer, pos);
    }

    std::span<const float> layer_slice(int layer) const {
        return {states_.data() + offset(layer, 0),
                static_cast<size_t>(seq_len_) * d_model_};
    }
    std::span<float> layer_slice(int layer) {
        return {states_.data() + offset(layer, 0),
                static_cast<size_t>(seq_len_) * d_model_};
    }

    bool all_finite() const {
        for (float v : states_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    size_t offset(int layer, int pos) const {
        if (layer < -1 || layer >= n_layers_) {
            throw_invalid("HiddenStateCache: layer index " + std::to_string(layer) +
                          " out of range [-1, " + std::to_string(n_layers_) + ")");
        }
        if (pos < 0 || pos >= seq_len_) {
            throw_invalid("HiddenStateCache: position " + std::to_string(pos) +
                          " out of range [0, " + std::to_string(seq_len_) + ")");
        }
        return (static_cast<size_t>(layer + 1) * seq_len_ + pos) * d_model_;
    }

    int n_layers_ = 0;
    int seq_len_ = 0;
    int d_model_ = 0;
    std::vector<float> states_;
};

// Row t is the log-softmax over the vocabulary of the next-token
// distribution after consuming tokens[0..t].
class LogProbTable {
public:
    LogProbTable() = default;
    LogProbTable(int seq_len, int vocab_size)
        : seq_len_(seq_len), vocab_size_(vocab_size),
          data_(static_cast<size_t>(seq_len) * vocab_size, 0.0f) {}

    int seq_len() const { return seq_len_; }
    int vocab_size() const { return vocab_size_; }

    const float* row(int t) const {
        check_pos(t);
        return data_.data() + static_cast<size_t>(t) * vocab_size_;
    }
    float* row(int t) {
        check_pos(t);
        return data_.data() + static_cast<size_t>(t) * vocab_size_;
    }

    float at(int t, int token_id) const {
        check_pos(t);
        if (token_id < 0 || token_id >= vocab_size_) {
            throw_invalid("LogProbTable: token id out of range");
        }
        return data_[static_cast<size_t>(t) * vocab_size_ + token_id];
    }

    bool operator==(const LogProbTable& other) const {
        return seq_len_ == other.seq_len_ && vocab_size_ == other.vocab_size_ &&
               data_ == other.data_;
    }

private:
    void check_pos(int t) const {
        if (t < 0 || t >= seq_len_) {
            throw_invalid("LogProbTable: position out of range");
        }
    }

    int seq_len_ = 0;
    int vocab_size_ = 0;
    std::vector<float> data_;
};

// --- PatchPlan sources -------------------------------------------------

// Rows come from another run's cache at the same layer and token index.
// Positions past the source sequence end use the source's final-position
// state when clamp_to_last is set, otherwise they are an error.
struct CacheSliceSource {
    const HiddenStateCache* cache = nullptr;
    bool clamp_to_last = true;
};

// One d_model row per target position, in plan-position order.
struct ExplicitSource {
    std::vector<float> values;
};

// Per-channel Gaussian noise. matched_gaussian draws
// N(channel_mean, (std_scale * channel_std)^2) where the statistics come
// from the destination run's own states at the patched layer.
// own_states degenerates to an identity patch (useful as a null case).
struct NoiseSource {
    enum class Kind { matched_gaussian, own_states };
    Kind kind = Kind::matched_gaussian;
    double std_scale = 1.0;
    std::uint64_t seed = 0;
};

using PatchSource = std::variant<CacheSliceSource, ExplicitSource, NoiseSource>;

// One intervention: overwrite the output of block `layer` (-1 = embedding
// output) at `positions` before the next block consumes it.
struct PatchPlan {
    int layer = 0;
    std::vector<int> positions;  // sorted, unique
    PatchSource source;
};

}  // namespace cotaudit
