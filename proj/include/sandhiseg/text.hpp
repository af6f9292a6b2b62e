#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sandhiseg {

/// Text inside the engine is a sequence of Unicode scalar values in NFC form.
/// Surface indices always count scalars of the normalized string.
using Text = std::u32string;

Text utf8_to_text(std::string_view utf8);
std::string text_to_utf8(const Text& text);
std::string text_to_utf8(char32_t c);

/// NFC-normalize UTF-8 input and decode it. Throws Error(ParseError) on invalid UTF-8.
Text normalize(std::string_view utf8);
std::string normalize_utf8(std::string_view utf8);

bool is_space(char32_t c);

/// Split on runs of whitespace, dropping empty pieces.
std::vector<Text> split_words(const Text& text);
std::vector<std::string> split_words(std::string_view utf8);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
Text join(const std::vector<Text>& parts, char32_t sep);

/// Unit-cost Levenshtein distance over scalars.
std::size_t edit_distance(const Text& a, const Text& b);

}  // namespace sandhiseg
