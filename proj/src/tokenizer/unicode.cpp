#include "tokenizer/unicode.hpp"

#include <algorithm>
#include <array>

namespace cotaudit {

namespace {

struct Range {
    std::uint32_t lo, hi;  // inclusive
};

// Letter ranges (coarse): Latin, Latin supplements/extended, IPA, Greek,
// Cyrillic, Armenian, Hebrew, Arabic, Syriac, Devanagari and the other
// Indic blocks, Thai, Lao, Tibetan, Georgian, Hangul jamo, Ethiopic,
// Cherokee, Mongolian, CJK, kana, Hangul syllables, fullwidth forms.
constexpr std::array<Range, 47> kLetterRanges{{
    {0x0041, 0x005A}, {0x0061, 0x007A}, {0x00AA, 0x00AA}, {0x00B5, 0x00B5},
    {0x00BA, 0x00BA}, {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x02C1},
    {0x02C6, 0x02D1}, {0x0370, 0x0374}, {0x0376, 0x0377}, {0x037A, 0x037D},
    {0x037F, 0x037F}, {0x0386, 0x0386}, {0x0388, 0x03F5}, {0x03F7, 0x0481},
    {0x048A, 0x052F}, {0x0531, 0x0556}, {0x0560, 0x0588}, {0x05D0, 0x05EA},
    {0x05EF, 0x05F2}, {0x0620, 0x064A}, {0x066E, 0x066F}, {0x0671, 0x06D3},
    {0x06FA, 0x06FC}, {0x0710, 0x072F}, {0x0750, 0x077F}, {0x0780, 0x07A5},
    {0x0800, 0x0815}, {0x0840, 0x0858}, {0x0900, 0x0963}, {0x0971, 0x0DC6},
    {0x0E01, 0x0E30}, {0x0E40, 0x0E46}, {0x0E81, 0x0EB0}, {0x0F00, 0x0F47},
    {0x10A0, 0x10FA}, {0x1100, 0x1248}, {0x13A0, 0x13F5}, {0x1E00, 0x1FBC},
    {0x3041, 0x3096}, {0x30A1, 0x30FA}, {0x3105, 0x312F}, {0x4E00, 0x9FFF},
    {0xA000, 0xA48C}, {0xAC00, 0xD7A3}, {0xFF21, 0xFF5A},
}};

// Number ranges: ASCII digits, superscripts/fractions, Arabic-Indic,
// Devanagari/Bengali/Thai digits, number forms, fullwidth digits.
constexpr std::array<Range, 13> kNumberRanges{{
    {0x0030, 0x0039}, {0x00B2, 0x00B3}, {0x00B9, 0x00B9}, {0x00BC, 0x00BE},
    {0x0660, 0x0669}, {0x06F0, 0x06F9}, {0x0966, 0x096F}, {0x09E6, 0x09EF},
    {0x0E50, 0x0E59}, {0x2070, 0x2079}, {0x2080, 0x2089}, {0x2150, 0x2189},
    {0xFF10, 0xFF19},
}};

bool in_ranges(std::uint32_t cp, const Range* ranges, size_t n) {
    auto it = std::upper_bound(ranges, ranges + n, cp, [](std::uint32_t v, const Range& r) {
        return v < r.lo;
    });
    if (it == ranges) return false;
    --it;
    return cp >= it->lo && cp <= it->hi;
}

}  // namespace

bool is_unicode_letter(std::uint32_t cp) {
    // the coarse Indic letter blocks also span digit rows; numbers win there
    return in_ranges(cp, kLetterRanges.data(), kLetterRanges.size()) &&
           !in_ranges(cp, kNumberRanges.data(), kNumberRanges.size());
}

bool is_unicode_number(std::uint32_t cp) {
    return in_ranges(cp, kNumberRanges.data(), kNumberRanges.size());
}

bool is_unicode_whitespace(std::uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x1C: case 0x1D: case 0x1E: case 0x1F:
        case 0x20: case 0x85: case 0xA0:
        case 0x1680: case 0x2028: case 0x2029: case 0x202F:
        case 0x205F: case 0x3000:
            return true;
        default:
            return (cp >= 0x2000 && cp <= 0x200A);
    }
}

std::uint32_t decode_utf8(std::string_view text, size_t& i) {
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(text[k]); };
    const unsigned char b0 = byte(i);
    // sentinel range 0x110000+ keeps invalid bytes distinct from real codepoints
    const auto invalid = [&]() { return 0x110000u + b0; };

    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len;
    std::uint32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1Fu;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0Fu;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07u;
    } else {
        ++i;
        return invalid();
    }
    if (i + static_cast<size_t>(len) > text.size()) {
        ++i;
        return invalid();
    }
    for (int k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + static_cast<size_t>(k));
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return invalid();
        }
        cp = (cp << 6) | (bk & 0x3Fu);
    }
    i += static_cast<size_t>(len);
    return cp;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace cotaudit
