#pragma once

#include <cstddef>
#include <string>

namespace cotaudit {

// Byte offsets [start, end) into a prompt string.
struct CharSpan {
    size_t start = 0;
    size_t end = 0;
    bool empty() const { return end <= start; }
};

enum class AnswerKind { single, truth, myth };

const char* answer_kind_name(AnswerKind kind);
AnswerKind answer_kind_from_name(const std::string& name);

// One audit instance: a With-CoT prompt, its No-CoT counterpart, the
// reference answer, and where the CoT and answer live inside each prompt.
struct PromptPair {
    std::string id;
    std::string with_cot;
    std::string no_cot;
    std::string answer;
    CharSpan cot_char_span;          // into with_cot
    CharSpan answer_char_span_with;  // into with_cot
    CharSpan answer_char_span_no;    // into no_cot
    AnswerKind answer_kind = AnswerKind::single;

    // set when the CoT span could not be located; downstream falls back to
    // the last prompt tokens before the answer
    bool span_location_failed = false;
};

}  // namespace cotaudit
