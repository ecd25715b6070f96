#include "datasets/loaders.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "util/errors.hpp"

namespace cotaudit {

namespace {

using nlohmann::json;

constexpr const char* kCotCue = "Let's think step by step.";
constexpr const char* kAnswerMarker = "Final answer: ";

const char* answer_kind_names[] = {"single", "truth", "myth"};

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_dataset("cannot open dataset file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json parse_json_array(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw_dataset("dataset file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_array()) throw_dataset("dataset file must be a JSON array: " + path);
    return j;
}

std::string render_answer(const json& v) {
    if (v.is_boolean()) return v.get<bool>() ? "Yes" : "No";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

size_t rstrip_end(const std::string& s) {
    size_t end = s.size();
    while (end > 0 && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return end;
}

// answer span = text after the last marker, excluding the marker itself
CharSpan locate_answer(const std::string& text) {
    const size_t pos = text.rfind(kAnswerMarker);
    if (pos == std::string::npos) return {0, 0};
    return {pos + std::string(kAnswerMarker).size(), rstrip_end(text)};
}

}  // namespace

const char* answer_kind_name(AnswerKind kind) {
    return answer_kind_names[static_cast<int>(kind)];
}

AnswerKind answer_kind_from_name(const std::string& name) {
    for (int i = 0; i < 3; ++i) {
        if (name == answer_kind_names[i]) return static_cast<AnswerKind>(i);
    }
    throw_invalid("unknown answer kind: " + name);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;  // saw content or a quote in this field
    bool row_started = false;

    const auto end_field = [&]() {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_row = [&]() {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
        row_started = false;
    };

    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                    // a closing quote must end the field
                    if (i + 1 < text.size() && text[i + 1] != ',' &&
                        text[i + 1] != '\n' && text[i + 1] != '\r') {
                        throw_dataset("malformed CSV quoting near byte " +
                                      std::to_string(i));
                    }
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started) {
                    throw_dataset("malformed CSV quoting near byte " + std::to_string(i));
                }
                in_quotes = true;
                field_started = true;
                row_started = true;
                break;
            case ',':
                end_field();
                row_started = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
                end_row();
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
                row_started = true;
                break;
        }
    }
    if (in_quotes) throw_dataset("malformed CSV: unterminated quoted field");
    if (row_started || field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::vector<PromptPair> load_strategyqa(const std::string& path, int n) {
    if (n <= 0) throw_invalid("n must be >= 1");
    const json items = parse_json_array(path);

    std::vector<PromptPair> pairs;
    const size_t limit = std::min(items.size(), static_cast<size_t>(n));
    for (size_t idx = 0; idx < limit; ++idx) {
        const json& item = items[idx];
        for (const char* field : {"qid", "question", "answer"}) {
            if (!item.contains(field)) {
                throw_dataset("strategyqa item " + std::to_string(idx) +
                              " missing required field '" + field + "'");
            }
        }
        const std::string question = item["question"].get<std::string>();
        const std::string answer = render_answer(item["answer"]);

        PromptPair pair;
        pair.id = item["qid"].is_string() ? item["qid"].get<std::string>()
                                          : item["qid"].dump();
        pair.answer = answer;
        pair.answer_kind = AnswerKind::single;

        const std::string question_line = "Question: " + question + "\n";
        std::string body;  // everything between the question line and the
                           // final-answer line: the CoT span
        if (item.contains("facts") && item["facts"].is_array() &&
            !item["facts"].empty()) {
            body += "Facts:\n";
            for (const auto& f : item["facts"]) {
                body += "- " + (f.is_string() ? f.get<std::string>() : f.dump()) + "\n";
            }
        }
        if (item.contains("decomposition") && item["decomposition"].is_array() &&
            !item["decomposition"].empty()) {
            body += "Decomposition:\n";
            for (const auto& d : item["decomposition"]) {
                body += "- " + (d.is_string() ? d.get<std::string>() : d.dump()) + "\n";
            }
        }
        if (item.contains("evidence") && !item["evidence"].is_null()) {
            // compact JSON, keys sorted, for deterministic prompts
            body += "Evidence:\n" + item["evidence"].dump() + "\n";
        }
        body += std::string(kCotCue) + "\n";

        pair.with_cot = question_line + body + kAnswerMarker + answer;
        pair.no_cot = question_line + kAnswerMarker + answer;
        pair.cot_char_span = {question_line.size(), question_line.size() + body.size()};
        pair.answer_char_span_with = locate_answer(pair.with_cot);
        pair.answer_char_span_no = locate_answer(pair.no_cot);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<PromptPair> load_truthfulqa(const std::string& path, int n) {
    if (n <= 0) throw_invalid("n must be >= 1");
    const auto rows = parse_csv(read_file(path));
    if (rows.empty()) throw_dataset("truthfulqa CSV has no header row");

    const auto& header = rows[0];
    const auto column = [&](const std::string& name) -> size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw_dataset("truthfulqa CSV missing column '" + name + "'");
        }
        return static_cast<size_t>(it - header.begin());
    };
    const size_t q_col = column("Question");
    const size_t best_col = column("Best Answer");
    const size_t wrong_col = column("Best Incorrect Answer");

    std::vector<PromptPair> pairs;
    const size_t limit = std::min(rows.size() - 1, static_cast<size_t>(n));
    for (size_t r = 0; r < limit; ++r) {
        const auto& row = rows[r + 1];
        const size_t need = std::max({q_col, best_col, wrong_col});
        if (row.size() <= need) {
            throw_dataset("truthfulqa CSV row " + std::to_string(r + 1) +
                          " has too few fields");
        }
        const std::string& question = row[q_col];
        const std::string question_line = "Question: " + question + "\n";

        for (const AnswerKind kind : {AnswerKind::truth, AnswerKind::myth}) {
            const std::string& answer =
                kind == AnswerKind::truth ? row[best_col] : row[wrong_col];
            PromptPair pair;
            pair.id = "tqa_" + std::to_string(r);
            pair.answer = answer;
            pair.answer_kind = kind;
            const std::string cue_line = std::string(kCotCue) + "\n";
            pair.with_cot = question_line + cue_line + kAnswerMarker + answer;
            // the answer follows the question directly, no marker
            pair.no_cot = question_line + answer;
            pair.cot_char_span = {question_line.size(),
                                  question_line.size() + cue_line.size()};
            pair.answer_char_span_with = locate_answer(pair.with_cot);
            pair.answer_char_span_no = {question_line.size(), rstrip_end(pair.no_cot)};
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

std::vector<PromptPair> load_gsm8k(const std::string& path, int n) {
    if (n <= 0) throw_invalid("n must be >= 1");
    const json items = parse_json_array(path);

    std::vector<PromptPair> pairs;
    const size_t limit = std::min(items.size(), static_cast<size_t>(n));
    for (size_t idx = 0; idx < limit; ++idx) {
        const json& item = items[idx];
        for (const char* field :
             {"id", "task_type", "with_cot", "no_cot", "answer", "correct"}) {
            if (!item.contains(field)) {
                throw_dataset("gsm8k item " + std::to_string(idx) +
                              " missing required field '" + field + "'");
            }
        }
        PromptPair pair;
        pair.id = item["id"].is_string() ? item["id"].get<std::string>()
                                         : item["id"].dump();
        pair.with_cot = item["with_cot"].get<std::string>();
        pair.no_cot = item["no_cot"].get<std::string>();
        pair.answer_kind = AnswerKind::single;

        const size_t cue_pos = pair.with_cot.find(kCotCue);
        const size_t marker_pos = pair.with_cot.rfind(kAnswerMarker);
        const bool no_cot_clean = pair.no_cot.find(kCotCue) == std::string::npos;
        if (cue_pos == std::string::npos || marker_pos == std::string::npos ||
            cue_pos >= marker_pos || !no_cot_clean) {
            pair.span_location_failed = true;
        } else {
            pair.cot_char_span = {cue_pos, marker_pos};
        }
        pair.answer_char_span_with = locate_answer(pair.with_cot);
        if (pair.answer_char_span_with.empty()) pair.span_location_failed = true;
        pair.answer_char_span_no = locate_answer(pair.no_cot);
        const auto& spa = pair.answer_char_span_with;
        pair.answer = pair.with_cot.substr(spa.start, spa.end - spa.start);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace cotaudit
