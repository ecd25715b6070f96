#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cotaudit {

enum class ElicitMode { normal, audit_aware };

const char* elicit_mode_name(ElicitMode mode);
ElicitMode elicit_mode_from_name(const std::string& name);

// Chat-completions wire format: POST {model, messages, temperature} to
// base_url + path, bearer token from an environment variable, response
// content read from choices[0].message.content.
struct EndpointConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8089" or an https URL
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    double temperature = 0.7;
    std::string api_key_env = "OPENAI_API_KEY";  // empty string = no auth
    int max_retries = 3;
    double backoff_base_s = 0.5;
    double timeout_s = 30.0;
};

// One elicited reasoning sample. parse_failed marks responses that did not
// yield the {"cot": ..., "answer": ...} object; they are kept for
// inspection but excluded from aggregates.
struct BehaviorSample {
    std::string prompt_id;
    ElicitMode mode = ElicitMode::normal;
    std::string cot;
    std::string answer;
    std::string raw_response;
    bool parse_failed = false;
};

// The only component in the repository that performs network I/O.
class ChatClient {
public:
    explicit ChatClient(EndpointConfig config);

    // Sends the mode's template and parses the structured reply. Network
    // failures and retryable statuses are retried with exponential backoff
    // up to max_retries; auth failures are not retried.
    BehaviorSample elicit(const std::string& prompt_id, const std::string& prompt,
                          ElicitMode mode) const;

    static std::string system_prompt(ElicitMode mode);

private:
    EndpointConfig config_;
    std::string api_key_;
};

// First balanced {...} object in the text, tolerating surrounding prose.
// Understands JSON string literals and escapes.
std::optional<std::string> extract_balanced_json_object(std::string_view text);

}  // namespace cotaudit
