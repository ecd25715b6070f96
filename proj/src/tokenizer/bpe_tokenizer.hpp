#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cotaudit {

// Byte offsets [start, end) into the UTF-8 source text. Offsets are
// non-overlapping, ordered, and jointly cover every source byte.
struct Encoding {
    std::vector<int> ids;
    std::vector<std::pair<size_t, size_t>> offsets;

    size_t size() const { return ids.size(); }
};

// Byte-level BPE with the GPT-2 vocabulary format: a `vocab` JSON mapping
// token string -> id and a ranked `merges` pair list. Immutable after load.
class BpeTokenizer {
public:
    static BpeTokenizer load(const std::string& vocab_path,
                             const std::string& merges_path);
    // Loads <dir>/vocab.json and <dir>/merges.txt.
    static BpeTokenizer from_model_dir(const std::string& dir);

    Encoding encode(std::string_view text) const;
    std::string decode(std::span<const int> ids) const;

    int vocab_size() const { return static_cast<int>(id_to_token_.size()); }

private:
    BpeTokenizer() = default;

    std::vector<std::string> bpe_merge(std::vector<std::string> symbols,
                                       std::vector<size_t>& byte_counts) const;

    std::unordered_map<std::string, int> vocab_;        // unicode-space token -> id
    std::unordered_map<int, std::string> id_to_token_;
    std::unordered_map<std::string, int> merge_ranks_;  // "left right" -> rank
    std::string byte_to_unicode_[256];                  // UTF-8 of mapped codepoint
    std::unordered_map<std::uint32_t, unsigned char> unicode_to_byte_;
};

// Every token whose byte interval intersects [start, end). Degenerate
// spans yield the empty set. Partial overlap includes the token, so a span
// edge inside a token still selects it.
std::vector<int> char_span_to_token_positions(const Encoding& enc, size_t start,
                                              size_t end);

// The canonical byte-level base vocabulary: the 256 byte symbols with ids
// assigned in mapped-codepoint order, exactly as the published GPT-2
// assets do. Used by the toy checkpoint generator.
std::map<std::string, int> byte_level_base_vocab();

// Writes <dir>/vocab.json and <dir>/merges.txt holding the base vocabulary
// and no merges: a minimal, fully functional byte-level tokenizer.
void write_byte_level_tokenizer(const std::string& dir);

}  // namespace cotaudit
