#include "texrepair/encoding.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <utility>

#include "texrepair/text_util.hpp"

namespace texrepair {

namespace {

// Glyphs the OT1 default lacks; utf8.def only sets them up under T1.
constexpr std::array<char32_t, 12> kT1Only = {
    0x00D0, 0x00F0, 0x00DE, 0x00FE, 0x00AB, 0x00BB, 0x2039, 0x203A, 0x014A, 0x014B, 0x0110, 0x0111,
};

// Latin Extended-A characters without a default definition.
constexpr std::array<char32_t, 3> kLatinGaps = {0x0138, 0x0149, 0x017F};

// Punctuation and symbols with text-mode definitions in the kernel.
constexpr std::array<char32_t, 22> kBuiltinSymbols = {
    0x2013, 0x2014, 0x2018, 0x2019, 0x201A, 0x201C, 0x201D, 0x201E, 0x2020, 0x2021, 0x2022,
    0x2026, 0x2030, 0x20AC, 0x2122, 0x2190, 0x2191, 0x2192, 0x2193, 0x2212, 0x2032, 0x2116,
};

struct Escape {
    char32_t cp;
    const char* text;
    bool math;
};

constexpr std::array<Escape, 64> kEscapes = {{
    {0x03B1, "\\alpha", true},  {0x03B2, "\\beta", true},    {0x03B3, "\\gamma", true},  {0x03B4, "\\delta", true},
    {0x03B5, "\\epsilon", true}, {0x03B6, "\\zeta", true},   {0x03B7, "\\eta", true},    {0x03B8, "\\theta", true},
    {0x03B9, "\\iota", true},   {0x03BA, "\\kappa", true},   {0x03BB, "\\lambda", true}, {0x03BC, "\\mu", true},
    {0x03BD, "\\nu", true},     {0x03BE, "\\xi", true},      {0x03C0, "\\pi", true},     {0x03C1, "\\rho", true},
    {0x03C3, "\\sigma", true},  {0x03C4, "\\tau", true},     {0x03C5, "\\upsilon", true}, {0x03C6, "\\phi", true},
    {0x03C7, "\\chi", true},    {0x03C8, "\\psi", true},     {0x03C9, "\\omega", true},  {0x0393, "\\Gamma", true},
    {0x0394, "\\Delta", true},  {0x0398, "\\Theta", true},   {0x039B, "\\Lambda", true}, {0x039E, "\\Xi", true},
    {0x03A0, "\\Pi", true},     {0x03A3, "\\Sigma", true},   {0x03A6, "\\Phi", true},    {0x03A8, "\\Psi", true},
    {0x03A9, "\\Omega", true},  {0x2264, "\\leq", true},     {0x2265, "\\geq", true},    {0x2260, "\\neq", true},
    {0x2248, "\\approx", true}, {0x221E, "\\infty", true},   {0x2208, "\\in", true},     {0x2209, "\\notin", true},
    {0x2211, "\\sum", true},    {0x220F, "\\prod", true},    {0x221A, "\\surd", true},   {0x2202, "\\partial", true},
    {0x2207, "\\nabla", true},  {0x2200, "\\forall", true},  {0x2203, "\\exists", true}, {0x2205, "\\emptyset", true},
    {0x2229, "\\cap", true},    {0x222A, "\\cup", true},     {0x2282, "\\subset", true}, {0x2286, "\\subseteq", true},
    {0x21D2, "\\Rightarrow", true}, {0x21D4, "\\Leftrightarrow", true}, {0x2261, "\\equiv", true},
    {0x223C, "\\sim", true},    {0x22C5, "\\cdot", true},    {0x2194, "\\leftrightarrow", true},
    {0x00F0, "\\dh{}", false},  {0x00D0, "\\DH{}", false},   {0x00FE, "\\th{}", false},  {0x00DE, "\\TH{}", false},
    {0x00AB, "\\guillemotleft{}", false}, {0x00BB, "\\guillemotright{}", false},
}};

constexpr std::array<const char*, 19> kFontEncodings = {
    "T1", "OT1", "LY1", "T2A", "T2B", "T2C", "T3", "T4", "T5", "TS1", "LGR", "X2", "OT2", "OT4", "QX", "L7x", "EU1", "EU2", "TU",
};

template <std::size_t N>
bool in(const std::array<char32_t, N>& set, char32_t cp)
{
    return std::find(set.begin(), set.end(), cp) != set.end();
}

}  // namespace

GlyphSupport glyph_support(char32_t cp)
{
    if (cp < 0x80) return GlyphSupport::Ascii;
    if (in(kT1Only, cp)) return GlyphSupport::NeedsT1;
    if (cp >= 0xA0 && cp <= 0xFF) return GlyphSupport::Builtin;
    if (cp >= 0x100 && cp <= 0x17F) return in(kLatinGaps, cp) ? GlyphSupport::Unsupported : GlyphSupport::Builtin;
    if (cp == 0x152 || cp == 0x153) return GlyphSupport::Builtin;
    if (in(kBuiltinSymbols, cp)) return GlyphSupport::Builtin;
    return GlyphSupport::Unsupported;
}

std::optional<std::string> latex_escape(char32_t cp, bool in_math)
{
    for (const auto& e : kEscapes) {
        if (e.cp != cp) continue;
        if (!e.math) return in_math ? std::nullopt : std::optional<std::string>(e.text);
        std::string t = e.text;
        if (in_math) return t + " ";
        return "$" + t + "$";
    }
    return std::nullopt;
}

Utf8Char decode_utf8(std::string_view s, std::size_t pos)
{
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    unsigned char b0 = byte(pos);
    if (b0 < 0x80) return {b0, 1, true};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {b0, 1, false};
    }
    if (pos + len > s.size()) return {b0, 1, false};
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char b = byte(pos + i);
        if ((b & 0xC0) != 0x80) return {b0, 1, false};
        cp = (cp << 6) | (b & 0x3F);
    }
    // Overlong forms and surrogates.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF))
        return {b0, 1, false};
    return {cp, len, true};
}

std::string encode_utf8(char32_t cp)
{
    std::string out;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
    return out;
}

std::string codepoint_label(char32_t cp)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
    return buf;
}

bool known_font_encoding(std::string_view name)
{
    return std::any_of(kFontEncodings.begin(), kFontEncodings.end(), [&](const char* e) { return name == e; });
}

std::optional<std::string> nearest_font_encoding(std::string_view name)
{
    std::optional<std::string> best;
    std::size_t best_d = 3;
    std::vector<std::string> sorted(kFontEncodings.begin(), kFontEncodings.end());
    std::sort(sorted.begin(), sorted.end());
    for (const auto& e : sorted) {
        std::size_t d = edit_distance(name, e, 2);
        if (d < best_d) {
            best_d = d;
            best = e;
        }
    }
    return best;
}

}  // namespace texrepair
