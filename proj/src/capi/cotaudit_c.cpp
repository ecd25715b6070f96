#include "cotaudit.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "checkpoint/checkpoint.hpp"
#include "engine/gpt2_model.hpp"
#include "intervention/cmi.hpp"
#include "runner/runner.hpp"
#include "tokenizer/bpe_tokenizer.hpp"
#include "util/errors.hpp"

namespace {

using cotaudit::Error;
using cotaudit::ErrorCode;

thread_local std::string g_last_error;

cotaudit_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return COTAUDIT_ERR_INVALID;
        case ErrorCode::config: return COTAUDIT_ERR_CONFIG;
        case ErrorCode::model: return COTAUDIT_ERR_MODEL;
        case ErrorCode::dataset: return COTAUDIT_ERR_DATASET;
        case ErrorCode::io: return COTAUDIT_ERR_IO;
        case ErrorCode::endpoint: return COTAUDIT_ERR_ENDPOINT;
        case ErrorCode::internal: return COTAUDIT_ERR_INTERNAL;
    }
    return COTAUDIT_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Runs fn, translating exceptions into status codes + last-error text.
template <typename Fn>
cotaudit_status guarded(Fn&& fn) {
    try {
        fn();
        return COTAUDIT_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("config is not valid JSON: ") + e.what();
        return COTAUDIT_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return COTAUDIT_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return COTAUDIT_ERR_INTERNAL;
    }
}

cotaudit_status require_arg(bool ok, const char* message) {
    if (ok) return COTAUDIT_OK;
    g_last_error = message;
    return COTAUDIT_ERR_INVALID;
}

}  // namespace

struct cotaudit_model {
    cotaudit::ModelConfig config;
    cotaudit::Gpt2Model model;
};

struct cotaudit_tokenizer {
    cotaudit::BpeTokenizer tokenizer;
};

extern "C" {

const char* cotaudit_version(void) { return "0.1.0"; }

const char* cotaudit_last_error(void) { return g_last_error.c_str(); }

void cotaudit_string_free(char* s) { std::free(s); }

void cotaudit_buffer_free(void* buffer) { std::free(buffer); }

cotaudit_status cotaudit_run_audit(const char* config_json,
                                   char** summary_csv_out, char** run_dir_out) {
    if (auto rc = require_arg(config_json != nullptr, "config_json is NULL")) return rc;
    return guarded([&] {
        const auto config =
            cotaudit::RunConfig::from_json(nlohmann::json::parse(config_json));
        const cotaudit::AuditRunResult result = cotaudit::run_audit(config);
        if (summary_csv_out) *summary_csv_out = dup_string(result.summary_csv);
        if (run_dir_out) *run_dir_out = dup_string(result.run_dir);
    });
}

cotaudit_status cotaudit_run_behavior(const char* config_json,
                                      char** report_json_out, char** run_dir_out) {
    if (auto rc = require_arg(config_json != nullptr, "config_json is NULL")) return rc;
    return guarded([&] {
        const auto config =
            cotaudit::BehaviorConfig::from_json(nlohmann::json::parse(config_json));
        const cotaudit::BehaviorRunResult result = cotaudit::run_behavior(config);
        if (report_json_out) *report_json_out = dup_string(result.report.dump(2));
        if (run_dir_out) *run_dir_out = dup_string(result.run_dir);
    });
}

cotaudit_status cotaudit_summarize(const char* const* run_dirs, size_t n_dirs,
                                   char** summary_csv_out) {
    if (auto rc = require_arg(run_dirs != nullptr && n_dirs > 0,
                              "run_dirs is empty")) {
        return rc;
    }
    return guarded([&] {
        std::vector<std::string> dirs(run_dirs, run_dirs + n_dirs);
        const std::string table = cotaudit::summarize_runs(dirs);
        if (summary_csv_out) *summary_csv_out = dup_string(table);
    });
}

cotaudit_status cotaudit_write_toy_checkpoint(const char* dir, uint64_t seed,
                                              int n_layers, int n_heads,
                                              int d_model, int d_ff,
                                              int vocab_size, int max_positions) {
    if (auto rc = require_arg(dir != nullptr, "dir is NULL")) return rc;
    return guarded([&] {
        cotaudit::ToyCheckpointOptions opts;
        opts.seed = seed;
        if (n_layers > 0) opts.n_layers = n_layers;
        if (n_heads > 0) opts.n_heads = n_heads;
        if (d_model > 0) opts.d_model = d_model;
        if (d_ff > 0) opts.d_ff = d_ff;
        if (vocab_size > 0) opts.vocab_size = vocab_size;
        if (max_positions > 0) opts.max_positions = max_positions;
        cotaudit::write_toy_checkpoint(dir, opts);
    });
}

cotaudit_status cotaudit_model_open(const char* model_dir, cotaudit_model** out) {
    if (auto rc = require_arg(model_dir && out, "model_dir or out is NULL")) return rc;
    return guarded([&] {
        auto [config, params] = cotaudit::load_checkpoint(model_dir);
        *out = new cotaudit_model{config,
                                  cotaudit::Gpt2Model(config, std::move(params))};
    });
}

void cotaudit_model_close(cotaudit_model* model) { delete model; }

int cotaudit_model_n_layers(const cotaudit_model* model) {
    return model ? model->config.n_layers : -1;
}

int cotaudit_model_d_model(const cotaudit_model* model) {
    return model ? model->config.d_model : -1;
}

int cotaudit_model_vocab_size(const cotaudit_model* model) {
    return model ? model->config.vocab_size : -1;
}

cotaudit_status cotaudit_model_answer_logprob(const cotaudit_model* model,
                                              const int32_t* ids, size_t n_ids,
                                              size_t answer_start,
                                              size_t answer_end,
                                              double* logprob_out) {
    if (auto rc = require_arg(model && ids && logprob_out && n_ids > 0,
                              "model, ids or logprob_out is NULL")) {
        return rc;
    }
    return guarded([&] {
        const std::vector<int> tokens(ids, ids + n_ids);
        const cotaudit::ForwardResult fwd = model->model.forward_with_cache(tokens);
        *logprob_out = cotaudit::Gpt2Model::answer_logprob(
            tokens,
            {static_cast<int>(answer_start), static_cast<int>(answer_end)},
            fwd.logprobs);
    });
}

cotaudit_status cotaudit_tokenizer_open(const char* model_dir,
                                        cotaudit_tokenizer** out) {
    if (auto rc = require_arg(model_dir && out, "model_dir or out is NULL")) return rc;
    return guarded([&] {
        *out = new cotaudit_tokenizer{
            cotaudit::BpeTokenizer::from_model_dir(model_dir)};
    });
}

void cotaudit_tokenizer_close(cotaudit_tokenizer* tokenizer) { delete tokenizer; }

cotaudit_status cotaudit_tokenizer_encode(const cotaudit_tokenizer* tokenizer,
                                          const char* text, int32_t** ids_out,
                                          size_t** offsets_out, size_t* n_out) {
    if (auto rc = require_arg(tokenizer && text && n_out,
                              "tokenizer, text or n_out is NULL")) {
        return rc;
    }
    return guarded([&] {
        const cotaudit::Encoding enc = tokenizer->tokenizer.encode(text);
        *n_out = enc.size();
        if (ids_out) {
            *ids_out = static_cast<int32_t*>(std::malloc(enc.size() * sizeof(int32_t)));
            for (size_t i = 0; i < enc.size(); ++i) (*ids_out)[i] = enc.ids[i];
        }
        if (offsets_out) {
            *offsets_out =
                static_cast<size_t*>(std::malloc(2 * enc.size() * sizeof(size_t)));
            for (size_t i = 0; i < enc.size(); ++i) {
                (*offsets_out)[2 * i] = enc.offsets[i].first;
                (*offsets_out)[2 * i + 1] = enc.offsets[i].second;
            }
        }
    });
}

cotaudit_status cotaudit_cmi(double cot_drop, double control_drop,
                             double drop_floor, double denom_floor,
                             double* cmi_out) {
    if (auto rc = require_arg(cmi_out != nullptr, "cmi_out is NULL")) return rc;
    return guarded([&] {
        cotaudit::CmiConfig cfg;
        cfg.drop_floor = drop_floor;
        cfg.denom_floor = denom_floor;
        *cmi_out = cotaudit::cmi(cot_drop, control_drop, cfg);
    });
}

}  // extern "C"
