#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cotaudit {

// Codepoint classification for the GPT-2 pre-tokenizer pattern. The
// letter/number tables cover the major scripts; codepoints outside the
// tables fall into the punctuation/symbol bucket, which only shifts split
// boundaries for exotic scripts and never affects byte round-tripping.
bool is_unicode_letter(std::uint32_t cp);
bool is_unicode_number(std::uint32_t cp);
bool is_unicode_whitespace(std::uint32_t cp);

// Decodes the UTF-8 sequence starting at `text[i]`, advancing `i` past it.
// Invalid bytes decode as one-byte sentinel codepoints (classified as
// punctuation) so arbitrary byte strings survive a round trip.
std::uint32_t decode_utf8(std::string_view text, size_t& i);

// Appends the UTF-8 encoding of cp.
void append_utf8(std::string& out, std::uint32_t cp);

}  // namespace cotaudit
