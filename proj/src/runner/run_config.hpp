#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "behavior/chat_client.hpp"
#include "behavior/risk_scorer.hpp"
#include "intervention/cmi.hpp"

namespace cotaudit {

enum class DatasetKind { strategyqa, truthfulqa, gsm8k };

const char* dataset_kind_name(DatasetKind kind);
DatasetKind dataset_kind_from_name(const std::string& name);

// Parsed run-config document for an audit run. Defaults follow the
// reference protocol: K = 8 control draws, floors 1e-4 / 1e-3, top-20
// (top-10 for truthfulqa) dataset prefixes.
struct RunConfig {
    std::string model_dir;
    std::string model_id;  // defaults to the model_dir basename
    DatasetKind dataset_kind = DatasetKind::strategyqa;
    std::string dataset_path;
    int n = 0;  // 0 = dataset default
    CmiConfig cmi;
    bool ablate_placebo = false;
    bool ablate_boundary = false;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir = "runs";

    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;  // canonical form (fills defaults)
};

struct BehaviorPrompt {
    std::string id;
    std::string text;
};

struct BehaviorConfig {
    EndpointConfig endpoint;
    std::vector<BehaviorPrompt> prompts;
    std::string patterns_path;  // empty = built-in categories
    ScoreWeights weights;
    int workers = 1;
    std::string out_dir = "runs";

    static BehaviorConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

}  // namespace cotaudit
