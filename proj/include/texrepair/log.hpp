#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace texrepair {

enum class Severity { Error, Warning, BadBox };

/// Which known engine message a record matched.
enum class LogPattern {
    UndefinedControlSequence,
    MissingDollar,
    DisplayMathEnd,
    BadMathDelimiter,
    ExtraBraceOrDollar,
    MissingBrace,
    EnvironmentUndefined,
    EnvironmentMismatch,
    FileNotFound,
    CommandAlreadyDefined,
    PackageError,
    ExtraAlignmentTab,
    MisplacedAlignmentTab,
    IllegalArrayArg,
    NotInOuterPar,
    CaptionOutsideFloat,
    FloatError,
    CitationUndefined,
    ReferenceUndefined,
    UnicodeCharacter,
    InvalidUtf8,
    FontNotLoadable,
    EncodingUnknown,
    OverfullBox,
    UnderfullBox,
    OtherWarning,
    Unclassified,
};

std::string_view to_string(Severity s);
std::string_view to_string(LogPattern p);
std::optional<LogPattern> log_pattern_from_string(std::string_view s);

struct LogRecord {
    Severity severity = Severity::Error;
    LogPattern pattern = LogPattern::Unclassified;
    /// Canonical message text, or "unclassified" for unrecognized errors.
    std::string message;
    /// Verbatim lines of the unwrapped log that produced this record.
    std::string raw_excerpt;
    /// Innermost file open when the record was emitted, or "unknown".
    std::string file = "unknown";
    /// Line from `l.<n>`, or from "on input line <n>" / "at lines <n>" when no `l.` context exists.
    std::optional<std::size_t> reported_line;
    /// Offending token: control-sequence name, environment, key, file or character.
    std::optional<std::string> token;
    /// Package named in "Package <name> Error/Warning".
    std::optional<std::string> package;
    /// A second line the message itself mentions ("\begin{x} on input line 4 ended by ...").
    std::optional<std::size_t> referenced_line;
    /// Secondary subject, e.g. the `\end{...}` name of an environment mismatch.
    std::optional<std::string> detail;
    /// Byte column just past the offending token, from the `l.` context when it is not truncated.
    std::optional<std::size_t> column;

    friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

struct LogReport {
    std::vector<LogRecord> records;
    std::string engine = "unknown";
    bool clean = true;
};

struct LogOptions {
    std::size_t max_print_line = 79;
};

/// Rejoins lines the engine hard-wrapped at `max_print_line` columns.
std::vector<std::string> unwrap(std::string_view raw_log, std::size_t max_print_line = 79);

/// Total: never throws, unrecognized `!` errors become unclassified records.
LogReport parse_log(std::string_view raw_log, const LogOptions& options = {});

/// Heuristic check that the text looks like a TeX engine log at all.
bool looks_like_tex_log(std::string_view raw_log);

}  // namespace texrepair
