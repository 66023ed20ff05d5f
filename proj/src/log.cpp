#include "texrepair/log.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <utility>

namespace texrepair {

namespace {

constexpr std::array<std::pair<LogPattern, const char*>, 27> kPatternNames{{
    {LogPattern::UndefinedControlSequence, "UndefinedControlSequence"},
    {LogPattern::MissingDollar, "MissingDollar"},
    {LogPattern::DisplayMathEnd, "DisplayMathEnd"},
    {LogPattern::BadMathDelimiter, "BadMathDelimiter"},
    {LogPattern::ExtraBraceOrDollar, "ExtraBraceOrDollar"},
    {LogPattern::MissingBrace, "MissingBrace"},
    {LogPattern::EnvironmentUndefined, "EnvironmentUndefined"},
    {LogPattern::EnvironmentMismatch, "EnvironmentMismatch"},
    {LogPattern::FileNotFound, "FileNotFound"},
    {LogPattern::CommandAlreadyDefined, "CommandAlreadyDefined"},
    {LogPattern::PackageError, "PackageError"},
    {LogPattern::ExtraAlignmentTab, "ExtraAlignmentTab"},
    {LogPattern::MisplacedAlignmentTab, "MisplacedAlignmentTab"},
    {LogPattern::IllegalArrayArg, "IllegalArrayArg"},
    {LogPattern::NotInOuterPar, "NotInOuterPar"},
    {LogPattern::CaptionOutsideFloat, "CaptionOutsideFloat"},
    {LogPattern::FloatError, "FloatError"},
    {LogPattern::CitationUndefined, "CitationUndefined"},
    {LogPattern::ReferenceUndefined, "ReferenceUndefined"},
    {LogPattern::UnicodeCharacter, "UnicodeCharacter"},
    {LogPattern::InvalidUtf8, "InvalidUtf8"},
    {LogPattern::FontNotLoadable, "FontNotLoadable"},
    {LogPattern::EncodingUnknown, "EncodingUnknown"},
    {LogPattern::OverfullBox, "OverfullBox"},
    {LogPattern::UnderfullBox, "UnderfullBox"},
    {LogPattern::OtherWarning, "OtherWarning"},
    {LogPattern::Unclassified, "Unclassified"},
}};

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string rtrim(std::string s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
}

std::optional<std::size_t> parse_number(std::string_view s)
{
    std::size_t i = 0, v = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) v = v * 10 + static_cast<std::size_t>(s[i++] - '0');
    if (i == 0) return std::nullopt;
    return v;
}

/// Text between the first `X' or 'X' quote pair.
std::optional<std::string> quoted(std::string_view s)
{
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '`' || s[i] == '\'') {
            std::size_t j = s.find('\'', i + 1);
            if (j == std::string_view::npos) return std::nullopt;
            return std::string(s.substr(i + 1, j - i - 1));
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> number_after(std::string_view s, std::string_view marker)
{
    std::size_t at = s.find(marker);
    if (at == std::string_view::npos) return std::nullopt;
    return parse_number(s.substr(at + marker.size()));
}

/// `(pkg)    continued text` lines that follow package messages.
bool is_continuation_line(std::string_view line)
{
    if (line.size() < 3 || line[0] != '(') return false;
    std::size_t close = line.find(')');
    if (close == std::string_view::npos || close == 1) return false;
    for (std::size_t i = 1; i < close; ++i) {
        char c = line[i];
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '@' || c == '-' || c == '_' || c == ' ')) return false;
    }
    return close + 1 == line.size() || line[close + 1] == ' ';
}

bool looks_like_file(std::string_view token)
{
    if (token.empty()) return false;
    if (starts_with(token, "./") || starts_with(token, "/") || starts_with(token, "../") || starts_with(token, "~/"))
        return true;
    if (token.size() > 2 && std::isalpha(static_cast<unsigned char>(token[0])) && token[1] == ':' &&
        (token[2] == '/' || token[2] == '\\'))
        return true;
    std::size_t dot = token.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 >= token.size()) return false;
    auto ext = token.substr(dot + 1);
    return std::all_of(ext.begin(), ext.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }) &&
           std::isalpha(static_cast<unsigned char>(ext[0]));
}

class FileStack {
public:
    void scan(std::string_view line)
    {
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '(') {
                std::size_t j = i + 1;
                while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != ')' &&
                       line[j] != '(')
                    ++j;
                auto token = line.substr(i + 1, j - i - 1);
                stack_.push_back(looks_like_file(token) ? std::string(token) : std::string{});
                i = j - 1;
            } else if (line[i] == ')') {
                if (!stack_.empty()) stack_.pop_back();
            }
        }
    }

    std::string current() const
    {
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it)
            if (!it->empty()) return *it;
        return "unknown";
    }

private:
    std::vector<std::string> stack_;
};

struct ContextLine {
    std::size_t line = 0;
    std::string before;
};

std::optional<ContextLine> parse_context(std::string_view l)
{
    if (!starts_with(l, "l.")) return std::nullopt;
    auto n = parse_number(l.substr(2));
    if (!n) return std::nullopt;
    std::size_t digits = std::to_string(*n).size();
    std::string rest(l.substr(2 + digits));
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    return ContextLine{*n, rest};
}

/// Last token TeX had read: a control sequence name or a single character.
std::optional<std::string> trailing_token(std::string before)
{
    if (before.size() >= 3 && before.compare(before.size() - 3, 3, "^^M") == 0) before.resize(before.size() - 3);
    before = rtrim(before);
    if (before.empty()) return std::nullopt;
    std::size_t i = before.size();
    while (i > 0 && (std::isalpha(static_cast<unsigned char>(before[i - 1])) || before[i - 1] == '@')) --i;
    if (i > 0 && before[i - 1] == '\\' && i < before.size()) return before.substr(i);
    if (before.size() >= 2 && before[before.size() - 2] == '\\') return before.substr(before.size() - 1);
    // UTF-8 aware single character.
    std::size_t start = before.size() - 1;
    while (start > 0 && (static_cast<unsigned char>(before[start]) & 0xC0) == 0x80) --start;
    return before.substr(start);
}

void classify_error(LogRecord& rec, const std::string& head, const std::string& full_message)
{
    static const std::regex kEnvMismatch(R"(\\begin\{([^}]*)\} on input line (\d+) ended by \\end\{([^}]*)\})");
    static const std::regex kPackageError(R"(^(?:Fatal )?Package ([A-Za-z0-9@_-]+) Error: (.*)$)");
    static const std::regex kFont(R"(^Font \\[^=]*=([^ ]+).* not loadable)");
    static const std::regex kUnicode(R"(Unicode character (.+) \(U\+([0-9A-Fa-f]+)\))");

    auto set = [&](LogPattern p) {
        rec.pattern = p;
        rec.message = full_message;
    };

    std::smatch m;
    if (head == "Undefined control sequence.") {
        set(LogPattern::UndefinedControlSequence);
    } else if (head == "Missing $ inserted.") {
        set(LogPattern::MissingDollar);
    } else if (head == "Display math should end with $$.") {
        set(LogPattern::DisplayMathEnd);
    } else if (head == "Bad math environment delimiter." || head == "LaTeX Error: Bad math environment delimiter." || starts_with(head, "Extra \\right") ||
               starts_with(head, "Missing \\right") || starts_with(head, "Missing delimiter")) {
        set(LogPattern::BadMathDelimiter);
    } else if (starts_with(head, "Extra }, or forgotten")) {
        set(LogPattern::ExtraBraceOrDollar);
    } else if (head == "Missing } inserted." || head == "Missing { inserted.") {
        set(LogPattern::MissingBrace);
    } else if (starts_with(head, "Extra alignment tab")) {
        set(LogPattern::ExtraAlignmentTab);
    } else if (starts_with(head, "Misplaced alignment tab")) {
        set(LogPattern::MisplacedAlignmentTab);
    } else if (starts_with(head, "LaTeX Error: Environment ") && head.find(" undefined") != std::string::npos) {
        set(LogPattern::EnvironmentUndefined);
        std::string rest = head.substr(std::string("LaTeX Error: Environment ").size());
        rec.token = rest.substr(0, rest.find(" undefined"));
    } else if (std::regex_search(head, m, kEnvMismatch)) {
        set(LogPattern::EnvironmentMismatch);
        rec.token = m[1].str();
        rec.referenced_line = static_cast<std::size_t>(std::stoul(m[2].str()));
        rec.detail = m[3].str();
    } else if (starts_with(head, "LaTeX Error: File ") && head.find("not found") != std::string::npos) {
        set(LogPattern::FileNotFound);
        rec.token = quoted(head.substr(18));
    } else if (starts_with(head, "LaTeX Error: Command ") && head.find("already defined") != std::string::npos) {
        set(LogPattern::CommandAlreadyDefined);
        std::string rest = head.substr(std::string("LaTeX Error: Command ").size());
        if (!rest.empty() && rest[0] == '\\') rest.erase(0, 1);
        rec.token = rest.substr(0, rest.find(' '));
    } else if (starts_with(head, "LaTeX Error: Not in outer par mode")) {
        set(LogPattern::NotInOuterPar);
    } else if (starts_with(head, "LaTeX Error: \\caption outside float")) {
        set(LogPattern::CaptionOutsideFloat);
    } else if (starts_with(head, "LaTeX Error: Illegal character in array arg")) {
        set(LogPattern::IllegalArrayArg);
    } else if (starts_with(head, "LaTeX Error: Float(s) lost") || starts_with(head, "LaTeX Error: Unknown float option") ||
               starts_with(head, "LaTeX Error: Too many unprocessed floats")) {
        set(LogPattern::FloatError);
        rec.token = quoted(head.substr(12));
    } else if (starts_with(head, "LaTeX Error: Option clash for package ")) {
        set(LogPattern::PackageError);
        std::string pkg = head.substr(std::string("LaTeX Error: Option clash for package ").size());
        if (!pkg.empty() && pkg.back() == '.') pkg.pop_back();
        rec.package = pkg;
        rec.token = pkg;
    } else if (starts_with(head, "LaTeX Error: Encoding scheme")) {
        set(LogPattern::EncodingUnknown);
        rec.token = quoted(head.substr(12));
    } else if (std::regex_search(head, m, kPackageError)) {
        rec.package = m[1].str();
        std::string body = m[2].str();
        std::smatch u;
        if (*rec.package == "inputenc" && std::regex_search(body, u, kUnicode)) {
            set(LogPattern::UnicodeCharacter);
            rec.token = u[1].str();
        } else if (*rec.package == "inputenc" && body.find("Invalid UTF-8") != std::string::npos) {
            set(LogPattern::InvalidUtf8);
            rec.token = quoted(body);
        } else if (*rec.package == "fontenc" && body.find("Encoding file") != std::string::npos) {
            set(LogPattern::EncodingUnknown);
            rec.token = quoted(body);
        } else {
            set(LogPattern::PackageError);
            rec.token = quoted(body);
        }
    } else if (std::regex_search(head, m, kFont)) {
        set(LogPattern::FontNotLoadable);
        rec.token = m[1].str();
    } else {
        rec.pattern = LogPattern::Unclassified;
        rec.message = "unclassified";
    }
}

void classify_warning(LogRecord& rec, const std::string& message)
{
    static const std::regex kPackageWarning(R"(^Package ([A-Za-z0-9@_-]+) Warning: )");
    rec.severity = Severity::Warning;
    rec.message = message;
    std::smatch m;
    if (std::regex_search(message, m, kPackageWarning)) rec.package = m[1].str();
    if (message.find("Citation ") != std::string::npos && message.find("undefined") != std::string::npos &&
        message.find("There were") == std::string::npos) {
        rec.pattern = LogPattern::CitationUndefined;
        rec.token = quoted(message.substr(message.find("Citation ")));
    } else if (message.find("Reference ") != std::string::npos && message.find("undefined") != std::string::npos &&
               message.find("There were") == std::string::npos) {
        rec.pattern = LogPattern::ReferenceUndefined;
        rec.token = quoted(message.substr(message.find("Reference ")));
    } else {
        rec.pattern = LogPattern::OtherWarning;
    }
    rec.reported_line = number_after(message, "on input line ");
}

bool is_warning_start(std::string_view line)
{
    static const std::regex kWarning(R"(^(LaTeX|Package [A-Za-z0-9@_-]+|Class [A-Za-z0-9@_-]+|LaTeX Font|pdfTeX) [Ww]arning: )");
    return std::regex_search(line.begin(), line.end(), kWarning);
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t from, std::size_t to)
{
    std::string out;
    for (std::size_t i = from; i < to && i < lines.size(); ++i) {
        if (i > from) out += '\n';
        out += lines[i];
    }
    return out;
}

std::string detect_engine(std::string_view line)
{
    if (!starts_with(line, "This is ")) return {};
    if (line.find("pdfTeX") != std::string_view::npos) return "pdftex";
    if (line.find("XeTeX") != std::string_view::npos) return "xetex";
    if (line.find("LuaHBTeX") != std::string_view::npos || line.find("LuaTeX") != std::string_view::npos) return "luatex";
    if (line.find("texrepair") != std::string_view::npos) return "proxy";
    if (line.find("TeX, Version") != std::string_view::npos) return "tex";
    return "unknown";
}

}  // namespace

std::string_view to_string(Severity s)
{
    switch (s) {
    case Severity::Error: return "Error";
    case Severity::Warning: return "Warning";
    case Severity::BadBox: return "BadBox";
    }
    return "?";
}

std::string_view to_string(LogPattern p)
{
    for (const auto& [pattern, name] : kPatternNames)
        if (pattern == p) return name;
    return "?";
}

std::optional<LogPattern> log_pattern_from_string(std::string_view s)
{
    for (const auto& [pattern, name] : kPatternNames)
        if (s == name) return pattern;
    return std::nullopt;
}

std::vector<std::string> unwrap(std::string_view raw_log, std::size_t max_print_line)
{
    std::vector<std::string> physical;
    std::size_t start = 0;
    while (start < raw_log.size()) {
        std::size_t nl = raw_log.find('\n', start);
        std::size_t end = nl == std::string_view::npos ? raw_log.size() : nl;
        std::string line(raw_log.substr(start, end - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        physical.push_back(std::move(line));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    std::vector<std::string> logical;
    for (std::size_t i = 0; i < physical.size(); ++i) {
        std::string line = physical[i];
        while (max_print_line > 0 && physical[i].size() == max_print_line && i + 1 < physical.size()) {
            line += physical[++i];
        }
        logical.push_back(std::move(line));
    }
    return logical;
}

bool looks_like_tex_log(std::string_view raw_log)
{
    if (raw_log.find('\0') != std::string_view::npos) return false;
    if (raw_log.empty()) return true;
    auto lines = unwrap(raw_log);
    for (const auto& l : lines) {
        if (!detect_engine(l).empty() || starts_with(l, "! ") || starts_with(l, "(./") || is_warning_start(l) ||
            starts_with(l, "**") || starts_with(l, "Overfull ") || starts_with(l, "Underfull "))
            return true;
    }
    return false;
}

LogReport parse_log(std::string_view raw_log, const LogOptions& options)
{
    LogReport report;
    auto lines = unwrap(raw_log, options.max_print_line);
    FileStack files;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];

        if (report.engine == "unknown" && i < 5) {
            if (auto e = detect_engine(line); !e.empty()) {
                report.engine = e;
                continue;
            }
        }

        if (starts_with(line, "!  ==> Fatal error")) continue;

        if (starts_with(line, "! ")) {
            LogRecord rec;
            rec.severity = Severity::Error;
            rec.file = files.current();
            std::string head = line.substr(2);
            std::size_t j = i + 1;
            // Package messages continue on "(pkg)  ..." lines.
            std::string full = head;
            while (j < lines.size() && is_continuation_line(lines[j])) {
                std::string cont = lines[j].substr(lines[j].find(')') + 1);
                std::size_t b = cont.find_first_not_of(' ');
                full += " " + (b == std::string::npos ? std::string{} : rtrim(cont.substr(b)));
                ++j;
            }
            // Find the l.<n> context before the next error; an emergency stop
            // directly following lends its context to this record.
            std::optional<ContextLine> ctx;
            std::size_t k = j;
            for (; k < lines.size() && k < j + 40; ++k) {
                if (starts_with(lines[k], "! ")) {
                    if (lines[k] != "! Emergency stop.") break;
                    continue;
                }
                if ((ctx = parse_context(lines[k]))) break;
            }
            std::size_t block_end = j;
            if (ctx) {
                block_end = k + 1;
                if (block_end < lines.size() && !lines[block_end].empty() && !starts_with(lines[block_end], "! "))
                    ++block_end;  // text after the offending token
            }
            // Help text runs to the next blank line.
            while (block_end < lines.size() && !lines[block_end].empty() && !starts_with(lines[block_end], "! ") &&
                   !starts_with(lines[block_end], "(./") && !is_warning_start(lines[block_end]))
                ++block_end;

            classify_error(rec, head, full);
            if (ctx) {
                rec.reported_line = ctx->line;
                if (!starts_with(ctx->before, "...")) {
                    std::string before = ctx->before;
                    if (before.size() >= 3 && before.compare(before.size() - 3, 3, "^^M") == 0)
                        before.resize(before.size() - 3);
                    rec.column = rtrim(before).size();
                }
                if ((rec.pattern == LogPattern::UndefinedControlSequence || rec.pattern == LogPattern::MissingDollar) &&
                    !rec.token)
                    rec.token = trailing_token(ctx->before);
            }
            rec.raw_excerpt = join_lines(lines, i, block_end);

            // An emergency stop right after another error is its consequence, not a new record.
            if (head == "Emergency stop." && !report.records.empty() &&
                report.records.back().severity == Severity::Error && i > 0) {
                report.records.back().raw_excerpt += "\n" + rec.raw_excerpt;
            } else {
                report.records.push_back(std::move(rec));
            }
            i = std::max(i, block_end == 0 ? i : block_end - 1);
            continue;
        }

        if (is_warning_start(line)) {
            LogRecord rec;
            rec.file = files.current();
            std::string message = line;
            std::size_t j = i + 1;
            while (j < lines.size() && is_continuation_line(lines[j])) {
                std::string cont = lines[j].substr(lines[j].find(')') + 1);
                std::size_t b = cont.find_first_not_of(' ');
                message += " " + (b == std::string::npos ? std::string{} : rtrim(cont.substr(b)));
                ++j;
            }
            classify_warning(rec, message);
            rec.raw_excerpt = join_lines(lines, i, j);
            report.records.push_back(std::move(rec));
            i = j - 1;
            continue;
        }

        if (starts_with(line, "Overfull \\") || starts_with(line, "Underfull \\")) {
            LogRecord rec;
            rec.severity = Severity::BadBox;
            rec.pattern = starts_with(line, "Overfull") ? LogPattern::OverfullBox : LogPattern::UnderfullBox;
            rec.file = files.current();
            rec.message = line;
            rec.reported_line = number_after(line, "at lines ");
            if (!rec.reported_line) rec.reported_line = number_after(line, "at line ");
            std::size_t j = i + 1;
            // Box contents follow until a blank line.
            while (j < lines.size() && !lines[j].empty() && !starts_with(lines[j], "! ") &&
                   !starts_with(lines[j], "Overfull \\") && !starts_with(lines[j], "Underfull \\") &&
                   !is_warning_start(lines[j]) && !starts_with(lines[j], "(./") && j < i + 8)
                ++j;
            rec.raw_excerpt = join_lines(lines, i, j);
            report.records.push_back(std::move(rec));
            i = j - 1;
            continue;
        }

        if (is_continuation_line(line)) continue;
        files.scan(line);
    }

    report.clean = std::none_of(report.records.begin(), report.records.end(),
                                [](const LogRecord& r) { return r.severity == Severity::Error; });
    return report;
}

}  // namespace texrepair
