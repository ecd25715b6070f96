#pragma once

#include <string>
#include <vector>

#include "datasets/prompt_pair.hpp"

namespace cotaudit {

// Loaders for the three benchmark file formats. All take a top-n prefix of
// the file; the loader output for a file prefix is a prefix of the loader
// output for the whole file.

// JSON array with qid/question/answer and optional facts/decomposition/
// evidence. Boolean answers render as "Yes"/"No".
std::vector<PromptPair> load_strategyqa(const std::string& path, int n);

// CSV with Question / Best Answer / Best Incorrect Answer columns; emits
// two pairs per row (truth, myth). The No-CoT prompt places the answer
// directly after the question with no "Final answer:" prefix.
std::vector<PromptPair> load_truthfulqa(const std::string& path, int n);

// JSON array with id/task_type/with_cot/no_cot/answer/correct; prompts are
// taken verbatim from the file.
std::vector<PromptPair> load_gsm8k(const std::string& path, int n);

// RFC-4180 CSV parsing (quoted fields, escaped quotes, embedded newlines).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

inline constexpr int kDefaultStrategyQaN = 20;
inline constexpr int kDefaultTruthfulQaN = 10;
inline constexpr int kDefaultGsm8kN = 20;

}  // namespace cotaudit
