#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "texrepair/ast.hpp"
#include "texrepair/log.hpp"
#include "texrepair/package_db.hpp"
#include "texrepair/source.hpp"

namespace texrepair {

enum class ErrorCategory { UndefinedControl, MathMode, PackageConflict, TableFigure, ReferenceError, EncodingFont };

inline constexpr std::array<ErrorCategory, 6> kAllCategories = {
    ErrorCategory::UndefinedControl, ErrorCategory::MathMode,       ErrorCategory::PackageConflict,
    ErrorCategory::TableFigure,      ErrorCategory::ReferenceError, ErrorCategory::EncodingFont,
};

std::string_view to_string(ErrorCategory c);
std::optional<ErrorCategory> category_from_string(std::string_view s);

enum class Confidence { High, Medium, Low };
std::string_view to_string(Confidence c);

/// What went wrong at a location, finer than the category. Fix rules and
/// explanation templates key off it.
namespace cause {
inline constexpr std::string_view MissingPackage = "missing-package";
inline constexpr std::string_view UnknownCommand = "unknown-command";
inline constexpr std::string_view UnknownEnvironment = "unknown-environment";
inline constexpr std::string_view MathToken = "math-token";
inline constexpr std::string_view UnterminatedMath = "unterminated-math";
inline constexpr std::string_view MathDelimiter = "math-delimiter";
inline constexpr std::string_view UnclosedEnvironment = "unclosed-environment";
inline constexpr std::string_view OrphanEnd = "orphan-end";
inline constexpr std::string_view UnmatchedBrace = "unmatched-brace";
inline constexpr std::string_view UnclosedGroup = "unclosed-group";
inline constexpr std::string_view ExtraCell = "extra-cell";
inline constexpr std::string_view StrayAmpersand = "stray-ampersand";
inline constexpr std::string_view ColumnSpec = "column-spec";
inline constexpr std::string_view FloatPlacement = "float-placement";
inline constexpr std::string_view FloatNesting = "float-nesting";
inline constexpr std::string_view CaptionPlacement = "caption-placement";
inline constexpr std::string_view MissingFile = "missing-file";
inline constexpr std::string_view Incompatible = "incompatible";
inline constexpr std::string_view LoadOrder = "load-order";
inline constexpr std::string_view OptionClash = "option-clash";
inline constexpr std::string_view UndefinedKey = "undefined-key";
inline constexpr std::string_view Glyph = "glyph";
inline constexpr std::string_view InvalidBytes = "invalid-bytes";
inline constexpr std::string_view FontEncoding = "font-encoding";
inline constexpr std::string_view Other = "other";
}  // namespace cause

struct Diagnostic {
    std::string id;
    /// Empty for errors no rule recognises; those still get reported.
    std::optional<ErrorCategory> category;
    LogPattern pattern = LogPattern::Unclassified;
    std::string cause = std::string(cause::Other);
    /// True source location.
    Span span;
    std::optional<std::size_t> reported_line;
    std::string message;
    /// Indices into LogReport::records.
    std::vector<std::size_t> evidence_records;
    /// Node paths like "Root > Environment(document) > Environment(algorithm)".
    std::vector<std::string> evidence_nodes;
    Confidence confidence = Confidence::Low;

    /// Offending name: command, environment, key, character or package.
    std::string token;
    /// Second name when there is one: the `\end` of a mismatch, the other package of a conflict.
    std::string detail;
    /// Package a fix would load, with its default options.
    std::string provider;
    std::string provider_options;
    std::string log_message;

    bool classified() const { return category.has_value(); }
    std::size_t line() const { return span.line; }
};

struct Localization {
    Span span;
    Confidence confidence = Confidence::Low;
    std::vector<std::string> nodes;
    std::string cause = std::string(cause::Other);
    /// Name the location was matched on, when it differs from the record's token.
    std::string subject;
};

/// Category of one record; nullopt when no rule matches.
std::optional<ErrorCategory> classify(const LogRecord& record, const Ast& ast, const PackageDb& db);

/// Most plausible causal span for a record. Searches the reported line, then
/// +-5 and +-20 lines around it; falls back to the reported line (Low).
Localization localize(const LogRecord& record, const Ast& ast, const SourceDocument& doc);

/// One diagnostic per actionable error and per undefined citation/reference,
/// cascades merged, ordered by span start then category.
std::vector<Diagnostic> diagnose(const SourceDocument& doc, const LogReport& log, const PackageDb& db);
std::vector<Diagnostic> diagnose(const SourceDocument& doc, const Ast& ast, const LogReport& log, const PackageDb& db);

/// Box warnings; reported separately and never fixed.
std::vector<LogRecord> advisories(const LogReport& log);

std::string describe_path(const NodePath& path);

/// Every (category, pattern) pair classify can produce.
std::vector<std::pair<ErrorCategory, LogPattern>> classification_table();

}  // namespace texrepair
