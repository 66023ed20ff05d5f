#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace texrepair {

/// How a pdfLaTeX document with default UTF-8 input copes with a character.
enum class GlyphSupport { Ascii, Builtin, NeedsT1, Unsupported };

GlyphSupport glyph_support(char32_t cp);

/// Standard LaTeX spelling of a character, if there is one. Math-only
/// symbols come wrapped in `$...$` unless `in_math`.
std::optional<std::string> latex_escape(char32_t cp, bool in_math);

struct Utf8Char {
    char32_t cp = 0;
    std::size_t length = 1;
    bool valid = true;
};

/// Decodes one character at `pos`; invalid sequences report length 1, valid = false.
Utf8Char decode_utf8(std::string_view s, std::size_t pos);

std::string encode_utf8(char32_t cp);

/// "U+00F0"
std::string codepoint_label(char32_t cp);

/// Encodings fontenc ships definition files for.
bool known_font_encoding(std::string_view name);
/// Nearest known encoding by edit distance (ties alphabetical), if within 2.
std::optional<std::string> nearest_font_encoding(std::string_view name);

}  // namespace texrepair
