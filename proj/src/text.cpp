#include "sandhiseg/text.hpp"

#include <algorithm>
#include <numeric>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

Text utf8_to_text(std::string_view utf8) {
    Text out;
    out.reserve(utf8.size());
    const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
    const int32_t len = static_cast<int32_t>(utf8.size());
    int32_t i = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT(bytes, i, len, c);
        if (c < 0) throw Error(ErrorCode::ParseError, "invalid UTF-8 sequence");
        out.push_back(static_cast<char32_t>(c));
    }
    return out;
}

std::string text_to_utf8(char32_t c) {
    std::string out;
    uint8_t buf[4];
    int32_t n = 0;
    UBool err = false;
    U8_APPEND(buf, n, 4, static_cast<UChar32>(c), err);
    if (err) throw Error(ErrorCode::ParseError, "invalid scalar value");
    out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
    return out;
}

std::string text_to_utf8(const Text& text) {
    std::string out;
    out.reserve(text.size());
    for (char32_t c : text) out += text_to_utf8(c);
    return out;
}

std::string normalize_utf8(std::string_view utf8) {
    // Validate first so ICU never silently substitutes U+FFFD.
    (void)utf8_to_text(utf8);
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error(ErrorCode::ParseError, "NFC normalizer unavailable");
    icu::UnicodeString src = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    icu::UnicodeString dst = nfc->normalize(src, status);
    if (U_FAILURE(status)) throw Error(ErrorCode::ParseError, "NFC normalization failed");
    std::string out;
    dst.toUTF8String(out);
    return out;
}

Text normalize(std::string_view utf8) { return utf8_to_text(normalize_utf8(utf8)); }

bool is_space(char32_t c) {
    switch (c) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
        case 0x00A0: case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
        case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009: case 0x200A:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return false;
    }
}

std::vector<Text> split_words(const Text& text) {
    std::vector<Text> out;
    Text cur;
    for (char32_t c : text) {
        if (is_space(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> split_words(std::string_view utf8) {
    std::vector<std::string> out;
    for (const auto& w : split_words(utf8_to_text(utf8))) out.push_back(text_to_utf8(w));
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

Text join(const std::vector<Text>& parts, char32_t sep) {
    Text out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::size_t edit_distance(const Text& a, const Text& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace sandhiseg
