#include "tokenizer/bpe_tokenizer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "tokenizer/unicode.hpp"
#include "util/errors.hpp"

namespace cotaudit {

namespace {

using nlohmann::json;

// The canonical byte <-> codepoint table: printable bytes map to
// themselves, the rest to codepoints from 256 up.
struct ByteUnicodeTable {
    std::uint32_t cp_of_byte[256];

    ByteUnicodeTable() {
        int n = 0;
        for (int b = 0; b < 256; ++b) {
            const bool printable = (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) ||
                                   (b >= 0xAE && b <= 0xFF);
            cp_of_byte[b] = printable ? static_cast<std::uint32_t>(b)
                                      : static_cast<std::uint32_t>(256 + n++);
        }
    }
};

const ByteUnicodeTable& byte_table() {
    static const ByteUnicodeTable table;
    return table;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_io("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Piece {
    size_t byte_start, byte_end;
};

// Hand-rolled scanner for the GPT-2 pre-tokenizer pattern
//   's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
// over decoded codepoints, tracking byte positions.
std::vector<Piece> pretokenize(std::string_view text) {
    std::vector<std::uint32_t> cps;
    std::vector<size_t> starts;  // byte offset of each codepoint
    size_t i = 0;
    while (i < text.size()) {
        starts.push_back(i);
        cps.push_back(decode_utf8(text, i));
    }
    starts.push_back(text.size());

    const size_t n = cps.size();
    const auto is_letter = [&](size_t k) { return is_unicode_letter(cps[k]); };
    const auto is_number = [&](size_t k) { return is_unicode_number(cps[k]); };
    const auto is_ws = [&](size_t k) { return is_unicode_whitespace(cps[k]); };
    const auto is_other = [&](size_t k) {
        return !is_ws(k) && !is_letter(k) && !is_number(k);
    };

    std::vector<Piece> pieces;
    const auto emit = [&](size_t a, size_t b) {
        pieces.push_back({starts[a], starts[b]});
    };

    size_t k = 0;
    while (k < n) {
        // contractions, in the pattern's alternation order
        if (cps[k] == '\'' && k + 1 < n) {
            static constexpr std::string_view kSuffixes[] = {"s", "t", "re", "ve",
                                                             "m",  "ll", "d"};
            size_t matched = 0;
            for (std::string_view suf : kSuffixes) {
                if (k + suf.size() >= n) continue;
                bool ok = true;
                for (size_t j = 0; ok && j < suf.size(); ++j) {
                    ok = cps[k + 1 + j] == static_cast<std::uint32_t>(suf[j]);
                }
                if (ok) {
                    matched = suf.size();
                    break;
                }
            }
            if (matched > 0) {
                emit(k, k + 1 + matched);
                k += 1 + matched;
                continue;
            }
        }

        const bool leading_space = cps[k] == ' ' && k + 1 < n && !is_ws(k + 1);
        const size_t body = leading_space ? k + 1 : k;

        if (body < n && is_letter(body)) {
            size_t j = body;
            while (j < n && is_letter(j)) ++j;
            emit(k, j);
            k = j;
        } else if (body < n && is_number(body)) {
            size_t j = body;
            while (j < n && is_number(j)) ++j;
            emit(k, j);
            k = j;
        } else if (body < n && is_other(body)) {
            size_t j = body;
            while (j < n && is_other(j)) ++j;
            emit(k, j);
            k = j;
        } else {
            // whitespace run: \s+(?!\S) leaves the last char of the run to
            // prefix the following word; a lone non-space ws char falls
            // through to plain \s+
            size_t j = k;
            while (j < n && is_ws(j)) ++j;
            if (j == n) {
                emit(k, j);
                k = j;
            } else if (j - k > 1) {
                emit(k, j - 1);
                k = j - 1;
            } else {
                emit(k, j);
                k = j;
            }
        }
    }
    return pieces;
}

}  // namespace

BpeTokenizer BpeTokenizer::load(const std::string& vocab_path,
                                const std::string& merges_path) {
    BpeTokenizer tok;

    const auto& table = byte_table();
    for (int b = 0; b < 256; ++b) {
        std::string s;
        append_utf8(s, table.cp_of_byte[b]);
        tok.byte_to_unicode_[b] = s;
        tok.unicode_to_byte_[table.cp_of_byte[b]] = static_cast<unsigned char>(b);
    }

    json vocab_json;
    try {
        vocab_json = json::parse(read_file(vocab_path));
    } catch (const json::exception& e) {
        throw_model("vocab file malformed: " + std::string(e.what()));
    }
    if (!vocab_json.is_object()) throw_model("vocab file malformed: not a JSON object");
    for (auto it = vocab_json.begin(); it != vocab_json.end(); ++it) {
        if (!it.value().is_number_integer()) {
            throw_model("vocab file malformed: non-integer id for token '" + it.key() + "'");
        }
        const int id = it.value().get<int>();
        tok.vocab_[it.key()] = id;
        tok.id_to_token_[id] = it.key();
    }
    if (tok.vocab_.empty()) throw_model("vocab file malformed: empty vocabulary");

    std::istringstream merges(read_file(merges_path));
    std::string line;
    int rank = 0;
    bool first = true;
    while (std::getline(merges, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first && line.rfind("#version", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        const size_t sp = line.find(' ');
        if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
            line.find(' ', sp + 1) != std::string::npos) {
            throw_model("merges file malformed at line: '" + line + "'");
        }
        tok.merge_ranks_[line] = rank++;
    }
    return tok;
}

BpeTokenizer BpeTokenizer::from_model_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    return load((fs::path(dir) / "vocab.json").string(),
                (fs::path(dir) / "merges.txt").string());
}

std::vector<std::string> BpeTokenizer::bpe_merge(std::vector<std::string> symbols,
                                                 std::vector<size_t>& byte_counts) const {
    while (symbols.size() > 1) {
        int best_rank = std::numeric_limits<int>::max();
        size_t best_idx = 0;
        for (size_t i = 0; i + 1 < symbols.size(); ++i) {
            const auto it = merge_ranks_.find(symbols[i] + " " + symbols[i + 1]);
            if (it != merge_ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_idx = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;

        const std::string left = symbols[best_idx];
        const std::string right = symbols[best_idx + 1];
        std::vector<std::string> merged;
        std::vector<size_t> merged_counts;
        merged.reserve(symbols.size());
        merged_counts.reserve(symbols.size());
        for (size_t i = 0; i < symbols.size();) {
            if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
                merged.push_back(left + right);
                merged_counts.push_back(byte_counts[i] + byte_counts[i + 1]);
                i += 2;
            } else {
                merged.push_back(std::move(symbols[i]));
                merged_counts.push_back(byte_counts[i]);
                i += 1;
            }
        }
        symbols = std::move(merged);
        byte_counts = std::move(merged_counts);
    }
    return symbols;
}

Encoding BpeTokenizer::encode(std::string_view text) const {
    Encoding enc;
    for (const Piece& piece : pretokenize(text)) {
        std::vector<std::string> symbols;
        std::vector<size_t> byte_counts;
        symbols.reserve(piece.byte_end - piece.byte_start);
        for (size_t b = piece.byte_start; b < piece.byte_end; ++b) {
            symbols.push_back(
                byte_to_unicode_[static_cast<unsigned char>(text[b])]);
            byte_counts.push_back(1);
        }
        symbols = bpe_merge(std::move(symbols), byte_counts);

        size_t pos = piece.byte_start;
        for (size_t i = 0; i < symbols.size(); ++i) {
            const auto it = vocab_.find(symbols[i]);
            if (it == vocab_.end()) {
                throw_model("vocab/merges mismatch: merged token '" + symbols[i] +
                            "' not in vocabulary");
            }
            enc.ids.push_back(it->second);
            enc.offsets.emplace_back(pos, pos + byte_counts[i]);
            pos += byte_counts[i];
        }
    }
    return enc;
}

std::string BpeTokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        const auto it = id_to_token_.find(id);
        if (it == id_to_token_.end()) {
            throw_invalid("unknown token id " + std::to_string(id));
        }
        const std::string& tok = it->second;
        size_t i = 0;
        while (i < tok.size()) {
            const std::uint32_t cp = decode_utf8(tok, i);
            const auto bit = unicode_to_byte_.find(cp);
            if (bit == unicode_to_byte_.end()) {
                throw_invalid("token id " + std::to_string(id) +
                              " contains a non-byte-level codepoint");
            }
            out.push_back(static_cast<char>(bit->second));
        }
    }
    return out;
}

std::vector<int> char_span_to_token_positions(const Encoding& enc, size_t start,
                                              size_t end) {
    std::vector<int> positions;
    for (size_t i = 0; i < enc.offsets.size(); ++i) {
        const auto [a, b] = enc.offsets[i];
        if (a < end && b > start) positions.push_back(static_cast<int>(i));
    }
    return positions;
}

std::map<std::string, int> byte_level_base_vocab() {
    const auto& table = byte_table();
    std::vector<std::uint32_t> cps(table.cp_of_byte, table.cp_of_byte + 256);
    std::sort(cps.begin(), cps.end());
    std::map<std::string, int> vocab;
    for (size_t i = 0; i < cps.size(); ++i) {
        std::string s;
        append_utf8(s, cps[i]);
        vocab[s] = static_cast<int>(i);
    }
    return vocab;
}

void write_byte_level_tokenizer(const std::string& dir) {
    namespace fs = std::filesystem;
    json vocab = json::object();
    for (const auto& [token, id] : byte_level_base_vocab()) vocab[token] = id;

    std::ofstream vf(fs::path(dir) / "vocab.json");
    if (!vf) throw_io("cannot write vocab.json under " + dir);
    vf << vocab.dump();

    std::ofstream mf(fs::path(dir) / "merges.txt");
    if (!mf) throw_io("cannot write merges.txt under " + dir);
    mf << "#version: 0.2\n";
}

}  // namespace cotaudit
