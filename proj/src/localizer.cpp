#include "texrepair/localizer.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <regex>
#include <set>

#include "texrepair/checker.hpp"
#include "texrepair/encoding.hpp"
#include "texrepair/explain.hpp"
#include "texrepair/parser.hpp"

namespace texrepair {

std::string_view to_string(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::UndefinedControl: return "UndefinedControl";
    case ErrorCategory::MathMode: return "MathMode";
    case ErrorCategory::PackageConflict: return "PackageConflict";
    case ErrorCategory::TableFigure: return "TableFigure";
    case ErrorCategory::ReferenceError: return "ReferenceError";
    case ErrorCategory::EncodingFont: return "EncodingFont";
    }
    return "?";
}

std::optional<ErrorCategory> category_from_string(std::string_view s)
{
    for (auto c : kAllCategories)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::string_view to_string(Confidence c)
{
    switch (c) {
    case Confidence::High: return "high";
    case Confidence::Medium: return "medium";
    case Confidence::Low: return "low";
    }
    return "?";
}

std::string describe_path(const NodePath& path)
{
    std::string out;
    for (const AstNode* n : path) {
        if (!out.empty()) out += " > ";
        out += to_string(n->kind);
        if (!n->name.empty() && n->kind != NodeKind::Text && n->kind != NodeKind::Comment)
            out += "(" + n->name + ")";
    }
    return out;
}

namespace {

const std::set<std::string, std::less<>> kTabular = {"tabular", "tabular*", "tabularx", "longtable", "array",
                                                     "tabulary", "supertabular", "xltabular"};
const std::set<std::string, std::less<>> kFloatEnvs = {"figure", "figure*", "table", "table*", "wrapfigure",
                                                       "wraptable", "sidewaysfigure", "sidewaystable", "algorithm",
                                                       "subfigure", "subtable"};

bool tabular_or_float(std::string_view name)
{
    return kTabular.count(name) || kFloatEnvs.count(name);
}

/// Names quoted as `x' or 'x' in a message.
std::vector<std::string> quoted_names(const std::string& s)
{
    static const std::regex re(R"([`']([A-Za-z0-9@_.-]+)')");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it)
        out.push_back((*it)[1].str());
    return out;
}

bool ends_with(std::string_view s, std::string_view suf)
{
    return s.size() >= suf.size() && s.substr(s.size() - suf.size()) == suf;
}

bool image_file(std::string_view f)
{
    for (auto ext : {".png", ".jpg", ".jpeg", ".pdf", ".eps", ".svg", ".gif", ".tif", ".tiff", ".bmp"})
        if (ends_with(f, ext)) return true;
    return false;
}

std::string stem(std::string f)
{
    auto slash = f.find_last_of('/');
    if (slash != std::string::npos) f = f.substr(slash + 1);
    auto dot = f.rfind('.');
    if (dot != std::string::npos && dot > 0) f.resize(dot);
    return f;
}

std::vector<const PackageRecord*> providers(const LogRecord& r, const PackageDb& db)
{
    if (!r.token) return {};
    if (r.pattern == LogPattern::UndefinedControlSequence) return db.provider_of(SymbolKind::Command, *r.token);
    if (r.pattern == LogPattern::EnvironmentUndefined) return db.provider_of(SymbolKind::Environment, *r.token);
    return {};
}

std::optional<ErrorCategory> classify_with(const LogRecord& r, const DocSymbols& syms)
{
    const PackageDb& db = syms.db();
    std::string token = r.token.value_or("");
    std::string detail = r.detail.value_or("");
    switch (r.pattern) {
    case LogPattern::UndefinedControlSequence: {
        auto ps = providers(r, db);
        bool unloaded = !ps.empty() &&
                        std::none_of(ps.begin(), ps.end(), [&](const PackageRecord* p) { return syms.loaded(p->name); });
        return unloaded ? ErrorCategory::PackageConflict : ErrorCategory::UndefinedControl;
    }
    case LogPattern::EnvironmentUndefined: return ErrorCategory::PackageConflict;
    case LogPattern::FileNotFound:
        if (ends_with(token, ".sty") || ends_with(token, ".cls")) return ErrorCategory::PackageConflict;
        if (image_file(token)) return ErrorCategory::TableFigure;
        return std::nullopt;
    case LogPattern::PackageError: {
        std::string pkg = r.package.value_or("");
        if (r.message.find("Option clash") != std::string::npos) return ErrorCategory::PackageConflict;
        auto names = quoted_names(r.message);
        for (const auto& rule : db.conflicts()) {
            bool has_pkg = rule.a == pkg || rule.b == pkg;
            const std::string& other = rule.a == pkg ? rule.b : rule.a;
            if (has_pkg && std::find(names.begin(), names.end(), other) != names.end())
                return ErrorCategory::PackageConflict;
        }
        if (pkg == "inputenc" || pkg == "fontenc" || pkg == "fontspec") return ErrorCategory::EncodingFont;
        if (pkg == "amsmath" || pkg == "mathtools") return ErrorCategory::MathMode;
        return std::nullopt;
    }
    case LogPattern::MissingDollar:
    case LogPattern::DisplayMathEnd:
    case LogPattern::BadMathDelimiter:
    case LogPattern::ExtraBraceOrDollar:
    case LogPattern::MissingBrace: return ErrorCategory::MathMode;
    case LogPattern::EnvironmentMismatch:
        if (tabular_or_float(token) || tabular_or_float(detail)) return ErrorCategory::TableFigure;
        return ErrorCategory::MathMode;
    case LogPattern::ExtraAlignmentTab:
    case LogPattern::MisplacedAlignmentTab:
    case LogPattern::IllegalArrayArg:
    case LogPattern::NotInOuterPar:
    case LogPattern::CaptionOutsideFloat:
    case LogPattern::FloatError: return ErrorCategory::TableFigure;
    case LogPattern::CitationUndefined:
    case LogPattern::ReferenceUndefined: return ErrorCategory::ReferenceError;
    case LogPattern::UnicodeCharacter:
    case LogPattern::InvalidUtf8:
    case LogPattern::FontNotLoadable:
    case LogPattern::EncodingUnknown: return ErrorCategory::EncodingFont;
    default: return std::nullopt;
    }
}

// ---- localization ----

struct Entry {
    const AstNode* node;
    NodePath path;
};

class Index {
public:
    Index(const Ast& ast, const SourceDocument& doc) : doc_(doc)
    {
        walk(ast.root, [&](const AstNode& n, const NodePath& p) {
            entries_.push_back({&n, p});
            return true;
        });
    }

    const std::vector<Entry>& entries() const { return entries_; }
    const SourceDocument& doc() const { return doc_; }

    /// Deepest node whose span contains `offset`.
    const Entry* deepest_at(std::size_t offset) const
    {
        const Entry* best = nullptr;
        for (const auto& e : entries_) {
            const Span& s = e.node->span;
            if (s.start <= offset && offset < s.end && (!best || e.path.size() >= best->path.size())) best = &e;
        }
        return best;
    }

private:
    const SourceDocument& doc_;
    std::vector<Entry> entries_;
};

struct Candidate {
    Span span;
    std::size_t line = 1;
    const NodePath* path = nullptr;
    std::string cause;
    int rank = 0;  // lower wins before distance
    std::string subject;
};

std::size_t distance(std::size_t a, std::size_t b)
{
    return a > b ? a - b : b - a;
}

bool is_invalid_at(const std::string& s, std::size_t i, std::size_t end)
{
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) return false;
    std::size_t len = c >= 0xF0 ? 4 : c >= 0xE0 ? 3 : c >= 0xC2 ? 2 : 0;
    if (len == 0 || c > 0xF4 || i + len > end) return true;
    for (std::size_t k = 1; k < len; ++k)
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return true;
    return false;
}

class Localizer {
public:
    Localizer(const Index& index, const LogRecord& rec) : idx_(index), doc_(index.doc()), rec_(rec)
    {
        token_ = rec.token.value_or("");
        detail_ = rec.detail.value_or("");
        if (rec.reported_line && *rec.reported_line >= 1 && *rec.reported_line <= doc_.line_count())
            line_ = *rec.reported_line;
        if (line_ && rec.column) offset_ = std::min(doc_.line_start(*line_) + *rec.column, doc_.line_end(*line_));
    }

    Localization run()
    {
        if (rec_.pattern == LogPattern::EnvironmentMismatch) return mismatch();
        gather(rec_.pattern);
        if (auto l = choose(line_, true)) return *l;
        return fallback();
    }

private:
    const Index& idx_;
    const SourceDocument& doc_;
    const LogRecord& rec_;
    std::string token_, detail_;
    std::optional<std::size_t> line_;
    std::optional<std::size_t> offset_;
    std::vector<Candidate> cands_;

    void add(const Span& span, const Entry* e, std::string_view cause, int rank = 0, std::string subject = {})
    {
        Candidate c;
        c.span = span;
        c.line = doc_.line_of(span.start);
        c.path = e ? &e->path : nullptr;
        c.cause = std::string(cause);
        c.rank = rank;
        c.subject = std::move(subject);
        cands_.push_back(std::move(c));
    }

    // Rank by how well the node lines up with the column TeX stopped at.
    int column_rank(const Span& s) const
    {
        if (!offset_) return 1;
        if (s.end == *offset_) return 0;
        if (s.start < *offset_ && *offset_ <= s.end) return 0;
        return 1;
    }

    static bool math_only_token(std::string_view t)
    {
        return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) != 0);
    }

    void gather(LogPattern p)
    {
        const auto& es = idx_.entries();
        const std::string& s = doc_.text();
        switch (p) {
        case LogPattern::UndefinedControlSequence:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                bool match = (n.kind == NodeKind::Command && n.name == token_) ||
                             ((n.kind == NodeKind::CiteRef || n.kind == NodeKind::LabelRef) && n.macro == token_);
                if (match) add(n.head, &e, cause::UnknownCommand, column_rank(n.head));
            }
            break;
        case LogPattern::EnvironmentUndefined:
            for (const auto& e : es)
                if (e.node->kind == NodeKind::Environment && e.node->name == token_)
                    add(e.node->head, &e, cause::UnknownEnvironment);
            break;
        case LogPattern::FileNotFound: {
            std::string st = stem(token_);
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.kind == NodeKind::PackageDecl || n.kind == NodeKind::DocumentClassDecl) {
                    if (std::find(n.keys.begin(), n.keys.end(), st) != n.keys.end())
                        add(n.span, &e, cause::MissingFile);
                } else if (n.kind == NodeKind::Command && !st.empty()) {
                    auto arg = n.mandatory_arg_text();
                    if (arg && arg->find(st) != std::string::npos) add(n.head, &e, cause::MissingFile);
                }
            }
            break;
        }
        case LogPattern::CommandAlreadyDefined:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.kind != NodeKind::Command) continue;
                std::string_view h = doc_.slice(n.head);
                if (h.find("\\" + token_) != std::string_view::npos && n.name != token_) add(n.head, &e, cause::Other);
            }
            break;
        case LogPattern::PackageError:
        case LogPattern::EncodingUnknown:
        case LogPattern::FontNotLoadable: {
            std::string pkg = rec_.package.value_or(token_);
            std::string_view c = cause::Other;
            if (rec_.message.find("Option clash") != std::string::npos) {
                c = cause::OptionClash;
                pkg = token_;
            } else if (rec_.message.find("Incompatible") != std::string::npos) {
                c = cause::Incompatible;
            } else if (rec_.message.find("must be loaded") != std::string::npos) {
                c = cause::LoadOrder;
            } else if (p != LogPattern::PackageError) {
                c = cause::FontEncoding;
                pkg = "fontenc";
            }
            bool any = false;
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.kind == NodeKind::PackageDecl && std::find(n.keys.begin(), n.keys.end(), pkg) != n.keys.end()) {
                    add(n.span, &e, c);
                    any = true;
                }
            }
            if (!any) column_node(c);
            break;
        }
        case LogPattern::MissingDollar:
            if (token_ == "^" || token_ == "_") {
                scripts();
            } else if (math_only_token(token_)) {
                for (const auto& e : es)
                    if (e.node->kind == NodeKind::Command && e.node->name == token_)
                        add(e.node->head, &e, cause::MathToken, column_rank(e.node->head));
                math_env_heads();
            } else {
                math_env_heads();
                unbalanced_math(2);
            }
            break;
        case LogPattern::DisplayMathEnd:
        case LogPattern::BadMathDelimiter:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                bool bad = n.error == ErrorKind::DisplayMathMismatch || n.error == ErrorKind::MathDelimiterMismatch ||
                           n.error == ErrorKind::StrayMathClose;
                if (bad) add(n.span, &e, cause::MathDelimiter, column_rank(n.span));
                else if (n.kind == NodeKind::MathDisplay || n.math_env)
                    add(n.span, &e, cause::MathDelimiter, 1 + column_rank(n.span));
            }
            break;
        case LogPattern::ExtraBraceOrDollar:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.error == ErrorKind::UnmatchedBrace) add(n.span, &e, cause::UnmatchedBrace, column_rank(n.span));
                else if (n.error == ErrorKind::StrayMathClose)
                    add(n.span, &e, cause::MathDelimiter, column_rank(n.span));
            }
            unbalanced_math(1);
            break;
        case LogPattern::MissingBrace:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.error == ErrorKind::UnclosedGroup)
                    add(doc_.make_span(n.span.start, std::min(n.span.start + 1, n.span.end)), &e, cause::UnclosedGroup);
            }
            unbalanced_math(1);
            break;
        case LogPattern::ExtraAlignmentTab:
        case LogPattern::MisplacedAlignmentTab: {
            auto c = p == LogPattern::ExtraAlignmentTab ? cause::ExtraCell : cause::StrayAmpersand;
            if (offset_ && *offset_ > 0 && s[*offset_ - 1] == '&') {
                add(doc_.make_span(*offset_ - 1, *offset_), idx_.deepest_at(*offset_ - 1), c);
                break;
            }
            if (!line_) break;
            std::size_t lo = doc_.line_start(*line_ > 20 ? *line_ - 20 : 1);
            std::size_t hi = doc_.line_end(std::min(doc_.line_count(), *line_ + 20));
            for (std::size_t i = lo; i < hi; ++i)
                if (s[i] == '&' && (i == 0 || s[i - 1] != '\\')) add(doc_.make_span(i, i + 1), idx_.deepest_at(i), c);
            break;
        }
        case LogPattern::IllegalArrayArg:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.kind != NodeKind::Environment || !kTabular.count(n.name)) continue;
                const AstNode* spec = nullptr;
                for (const auto& a : n.args)
                    if (!a.optional && a.kind == NodeKind::Group) spec = &a;
                add(spec ? spec->span : n.head, &e, cause::ColumnSpec, column_rank(n.head));
            }
            break;
        case LogPattern::NotInOuterPar:
            for (const auto& e : es)
                if (e.node->kind == NodeKind::Environment && kFloatEnvs.count(e.node->name))
                    add(e.node->head, &e, cause::FloatNesting, column_rank(e.node->head));
            break;
        case LogPattern::FloatError:
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.kind != NodeKind::Environment || !kFloatEnvs.count(n.name)) continue;
                const AstNode* opt = nullptr;
                for (const auto& a : n.args)
                    if (a.optional) {
                        opt = &a;
                        break;
                    }
                if (opt) add(opt->span, &e, cause::FloatPlacement, column_rank(n.head));
            }
            break;
        case LogPattern::CaptionOutsideFloat:
            for (const auto& e : es)
                if (e.node->kind == NodeKind::Command && e.node->name == "caption")
                    add(e.node->head, &e, cause::CaptionPlacement, column_rank(e.node->head));
            break;
        case LogPattern::CitationUndefined:
        case LogPattern::ReferenceUndefined: {
            auto kind = p == LogPattern::CitationUndefined ? NodeKind::CiteRef : NodeKind::LabelRef;
            for (const auto& e : es) {
                const AstNode& n = *e.node;
                if (n.kind == kind && std::find(n.keys.begin(), n.keys.end(), token_) != n.keys.end())
                    add(n.span, &e, cause::UndefinedKey);
            }
            break;
        }
        case LogPattern::UnicodeCharacter: glyphs(); break;
        case LogPattern::InvalidUtf8: invalid_bytes(); break;
        default: column_node(cause::Other); break;
        }
    }

    void column_node(std::string_view c)
    {
        if (!offset_ || *offset_ == 0) return;
        if (const Entry* e = idx_.deepest_at(*offset_ - 1)) {
            const AstNode& n = *e->node;
            add(n.kind == NodeKind::Text ? doc_.make_span(*offset_ - 1, *offset_) : n.head, e, c);
        }
    }

    // Environments that only work in math mode opened from text, e.g. a bare aligned.
    void math_env_heads()
    {
        if (!offset_) return;
        for (const auto& e : idx_.entries()) {
            const AstNode& n = *e.node;
            if (n.kind == NodeKind::Environment && n.math_env && n.head.end == *offset_)
                add(n.head, &e, cause::MathToken);
        }
    }

    void scripts()
    {
        const std::string& s = doc_.text();
        for (const auto& e : idx_.entries()) {
            const AstNode& n = *e.node;
            if (n.kind != NodeKind::Text) continue;
            bool in_math = std::any_of(e.path.begin(), e.path.end(), [](const AstNode* a) { return a->is_math(); });
            if (in_math) continue;
            for (std::size_t i = n.span.start; i < n.span.end; ++i) {
                if (s[i] != token_[0]) continue;
                // the run of non-space text around the script
                std::size_t a = i, b = i + 1;
                while (a > n.span.start && !std::isspace(static_cast<unsigned char>(s[a - 1])) && s[a - 1] != '$') --a;
                while (b < n.span.end && !std::isspace(static_cast<unsigned char>(s[b])) && s[b] != '$') ++b;
                add(doc_.make_span(a, b), &e, cause::MathToken, offset_ && *offset_ == i + 1 ? 0 : 1);
            }
        }
    }

    // Math left open: an unterminated $...$ or a math environment without its \end.
    void unbalanced_math(int rank)
    {
        for (const auto& e : idx_.entries()) {
            const AstNode& n = *e.node;
            if ((n.kind == NodeKind::MathInline || n.kind == NodeKind::MathDisplay) &&
                n.error == ErrorKind::UnterminatedMath) {
                std::size_t open_len = n.kind == NodeKind::MathDisplay ? 2 : 1;
                add(doc_.make_span(n.span.start, std::min(n.span.end, n.span.start + open_len)), &e,
                    cause::UnterminatedMath, rank);
            } else if (n.kind == NodeKind::Environment && n.math_env && n.error == ErrorKind::UnclosedEnvironment) {
                add(n.head, &e, cause::UnclosedEnvironment, rank, n.name);
            }
        }
    }

    void glyphs()
    {
        const std::string& s = doc_.text();
        if (token_.empty()) return column_node(cause::Glyph);
        for (std::size_t i = s.find(token_); i != std::string::npos; i = s.find(token_, i + 1)) {
            int rank = offset_ && *offset_ >= i && *offset_ <= i + token_.size() ? 0 : 1;
            add(doc_.make_span(i, i + token_.size()), idx_.deepest_at(i), cause::Glyph, rank);
        }
    }

    void invalid_bytes()
    {
        const std::string& s = doc_.text();
        for (std::size_t line = 1; line <= doc_.line_count(); ++line) {
            std::size_t a = doc_.line_start(line), b = doc_.line_end(line);
            for (std::size_t i = a; i < b;) {
                if (is_invalid_at(s, i, b)) {
                    add(doc_.make_span(i, i + 1), idx_.deepest_at(i), cause::InvalidBytes);
                    break;
                }
                unsigned char c = static_cast<unsigned char>(s[i]);
                i += c < 0x80 ? 1 : c >= 0xF0 ? 4 : c >= 0xE0 ? 3 : 2;
            }
        }
    }

    Localization make(const Candidate& c, Confidence conf) const
    {
        Localization l;
        l.span = c.span;
        l.confidence = conf;
        if (c.path) l.nodes.push_back(describe_path(*c.path));
        l.cause = c.cause;
        l.subject = c.subject;
        return l;
    }

    /// Window search around `anchor`; without an anchor the first candidate in the document wins.
    std::optional<Localization> choose(std::optional<std::size_t> anchor, bool exact_token)
    {
        if (cands_.empty()) return std::nullopt;
        if (!anchor) {
            auto it = std::min_element(cands_.begin(), cands_.end(), [](const Candidate& a, const Candidate& b) {
                return std::tie(a.rank, a.span.start) < std::tie(b.rank, b.span.start);
            });
            return make(*it, Confidence::Medium);
        }
        for (std::size_t w : {0, 5, 20}) {
            const Candidate* best = nullptr;
            auto key = [&](const Candidate& c) {
                // preceding lines before following ones: causes come before symptoms
                return std::make_tuple(c.rank, distance(c.line, *anchor), c.line > *anchor, c.span.start);
            };
            for (const auto& c : cands_) {
                if (distance(c.line, *anchor) > w) continue;
                if (!best || key(c) < key(*best)) best = &c;
            }
            if (best) return make(*best, w == 0 && exact_token ? Confidence::High : Confidence::Medium);
        }
        return std::nullopt;
    }

    Localization fallback() const
    {
        Localization l;
        l.confidence = Confidence::Low;
        if (!line_) {
            l.span = doc_.make_span(0, doc_.size() == 0 ? 0 : doc_.line_end(1));
            return l;
        }
        Span s = doc_.line_span(*line_);
        if (s.empty() && s.end < doc_.size()) s.end += 1;  // blank line: take its newline
        l.span = s;
        if (const Entry* e = idx_.deepest_at(s.start)) l.nodes.push_back(describe_path(e->path));
        return l;
    }

    std::size_t indent_at(std::size_t offset) const { return offset - doc_.line_start(doc_.line_of(offset)); }

    /// With nested same-name environments the parser pairs the last \end with the
    /// innermost \begin. When that \end lines up with the outer \begin instead,
    /// the inner one is the environment really left open.
    const Entry* indentation_owner(const AstNode& open) const
    {
        const Entry* self = nullptr;
        for (const auto& e : idx_.entries())
            if (e.node == &open) self = &e;
        for (const auto& e : idx_.entries()) {
            const AstNode& n = *e.node;
            if (&n == &open || n.kind != NodeKind::Environment || n.name != open.name || !n.tail) continue;
            if (!open.span.contains(n.span)) continue;
            std::size_t tail_indent = indent_at(n.tail->start);
            std::string_view before = std::string_view(doc_.text()).substr(n.tail->start - tail_indent, tail_indent);
            if (before.find_first_not_of(" \t") != std::string_view::npos) continue;
            if (tail_indent == indent_at(open.head.start) && tail_indent != indent_at(n.head.start)) return &e;
        }
        return self;
    }

    Localization mismatch()
    {
        const auto& es = idx_.entries();
        // An \end with no matching \begin.
        for (const auto& e : es) {
            const AstNode& n = *e.node;
            if (n.error == ErrorKind::OrphanEnd && n.name == detail_)
                add(n.span, &e, cause::OrphanEnd, 0, detail_);
        }
        if (auto l = choose(line_, true)) return *l;
        cands_.clear();

        // The \begin the message names, left open.
        for (const auto& e : es) {
            const AstNode& n = *e.node;
            if (n.kind == NodeKind::Environment && n.name == token_ && n.error == ErrorKind::UnclosedEnvironment) {
                const Entry* owner = indentation_owner(n);
                if (!owner) owner = &e;
                add(owner->node->head, owner, cause::UnclosedEnvironment, 0, token_);
            }
        }
        std::optional<std::size_t> ref = rec_.referenced_line;
        if (ref && (*ref < 1 || *ref > doc_.line_count())) ref.reset();
        if (auto l = choose(ref ? ref : line_, true)) return *l;
        cands_.clear();

        // Otherwise the \end closes something TeX never opened as an environment
        // (undefined, so its \begin failed): blame that \begin.
        for (const auto& e : es) {
            const AstNode& n = *e.node;
            if (n.kind == NodeKind::Environment && n.name == detail_ && n.tail && line_ &&
                doc_.line_of(n.tail->start) == *line_) {
                add(n.head, &e, "cascade", 0, detail_);
            }
        }
        if (!cands_.empty()) return make(cands_.front(), Confidence::Medium);
        // Any environment left open, nearest the claimed \begin.
        for (const auto& e : es)
            if (e.node->kind == NodeKind::Environment && e.node->error == ErrorKind::UnclosedEnvironment) {
                const Entry* owner = indentation_owner(*e.node);
                if (!owner) owner = &e;
                add(owner->node->head, owner, cause::UnclosedEnvironment, 0, e.node->name);
            }
        if (auto l = choose(ref ? ref : line_, false)) {
            l->confidence = Confidence::Medium;
            return *l;
        }
        return fallback();
    }
};

struct Pending {
    Diagnostic diag;
    std::set<std::string> providers;
    bool cascade = false;
    bool dropped = false;
};

std::string diagnostic_id(const Diagnostic& d, const SourceDocument& doc)
{
    std::string cat = d.category ? std::string(to_string(*d.category)) : "Unclassified";
    std::size_t col = d.span.start - doc.line_start(d.span.line) + 1;
    return cat + "@" + std::to_string(d.span.line) + ":" + std::to_string(col);
}

void absorb(Diagnostic& into, const Diagnostic& from)
{
    for (auto r : from.evidence_records)
        if (std::find(into.evidence_records.begin(), into.evidence_records.end(), r) == into.evidence_records.end())
            into.evidence_records.push_back(r);
    for (const auto& n : from.evidence_nodes)
        if (std::find(into.evidence_nodes.begin(), into.evidence_nodes.end(), n) == into.evidence_nodes.end())
            into.evidence_nodes.push_back(n);
}

bool wanted(const LogRecord& r)
{
    if (r.severity == Severity::Error) return true;
    return r.severity == Severity::Warning &&
           (r.pattern == LogPattern::CitationUndefined || r.pattern == LogPattern::ReferenceUndefined);
}

}  // namespace

std::optional<ErrorCategory> classify(const LogRecord& record, const Ast& ast, const PackageDb& db)
{
    DocSymbols syms(ast, db);
    return classify_with(record, syms);
}

Localization localize(const LogRecord& record, const Ast& ast, const SourceDocument& doc)
{
    Index idx(ast, doc);
    return Localizer(idx, record).run();
}

std::vector<Diagnostic> diagnose(const SourceDocument& doc, const LogReport& log, const PackageDb& db)
{
    Ast ast = parse(doc);
    return diagnose(doc, ast, log, db);
}

std::vector<Diagnostic> diagnose(const SourceDocument& doc, const Ast& ast, const LogReport& log, const PackageDb& db)
{
    DocSymbols syms(ast, db);
    Index idx(ast, doc);
    std::vector<Pending> pend;

    for (std::size_t i = 0; i < log.records.size(); ++i) {
        const LogRecord& r = log.records[i];
        if (!wanted(r)) continue;
        Pending p;
        Diagnostic& d = p.diag;
        d.category = classify_with(r, syms);
        d.pattern = r.pattern;
        d.reported_line = r.reported_line;
        d.token = r.token.value_or("");
        d.detail = r.detail.value_or("");
        d.log_message = r.message;
        d.evidence_records.push_back(i);

        Localization loc = Localizer(idx, r).run();
        d.span = loc.span;
        d.confidence = loc.confidence;
        d.evidence_nodes = loc.nodes;
        d.cause = loc.cause;
        p.cascade = loc.cause == "cascade";
        if (p.cascade) d.cause = std::string(cause::UnknownEnvironment);
        if (!loc.subject.empty()) d.token = loc.subject;
        if (d.cause == cause::MathToken) d.token = std::string(doc.slice(d.span));

        if (d.category == ErrorCategory::PackageConflict &&
            (r.pattern == LogPattern::UndefinedControlSequence || r.pattern == LogPattern::EnvironmentUndefined)) {
            auto ps = providers(r, db);
            for (const auto* pr : ps) p.providers.insert(pr->name);
            if (!ps.empty()) {
                d.cause = std::string(cause::MissingPackage);
                d.provider = ps.front()->name;
                d.provider_options = ps.front()->default_options.value_or("");
            }
        }
        if (r.pattern == LogPattern::FileNotFound && d.category == ErrorCategory::PackageConflict) {
            d.provider = stem(d.token);
        }
        if (r.pattern == LogPattern::PackageError) {
            d.token = r.package.value_or(d.token);
            if (d.cause == cause::OptionClash) d.token = r.token.value_or("");
            auto names = quoted_names(r.message);
            for (const auto& n : names)
                if (n != d.token) {
                    d.detail = n;
                    break;
                }
        }
        pend.push_back(std::move(p));
    }

    // A missing package explains every later symbol it would have provided.
    for (std::size_t a = 0; a < pend.size(); ++a) {
        if (pend[a].dropped || pend[a].diag.cause != cause::MissingPackage) continue;
        for (std::size_t b = a + 1; b < pend.size(); ++b) {
            if (pend[b].dropped || pend[b].diag.cause != cause::MissingPackage) continue;
            bool shared = std::any_of(pend[b].providers.begin(), pend[b].providers.end(),
                                      [&](const std::string& n) { return pend[a].providers.count(n) > 0; });
            if (!shared) continue;
            absorb(pend[a].diag, pend[b].diag);
            pend[b].dropped = true;
        }
    }
    // TeX repeats "Missing $" where the paragraph ends after leaving math mode open.
    for (std::size_t a = 0; a + 1 < pend.size(); ++a) {
        Pending& first = pend[a];
        Pending& echo = pend[a + 1];
        if (first.dropped || echo.dropped || first.diag.cause != cause::MathToken) continue;
        if (echo.diag.pattern != LogPattern::MissingDollar || echo.diag.cause != cause::Other) continue;
        if (!echo.diag.reported_line || *echo.diag.reported_line < first.diag.span.line) continue;
        std::size_t stop = doc.line_start(std::min(*echo.diag.reported_line, doc.line_count()));
        std::string_view between = std::string_view(doc.text()).substr(first.diag.span.end,
                                                                       stop > first.diag.span.end ? stop - first.diag.span.end : 0);
        if (between.find("\n\n") != std::string_view::npos) continue;
        absorb(first.diag, echo.diag);
        echo.dropped = true;
    }
    // The \end of an environment that never started is noise from the \begin.
    for (auto& p : pend) {
        if (p.dropped || !p.cascade) continue;
        for (auto& q : pend) {
            if (q.dropped || &q == &p || q.diag.pattern != LogPattern::EnvironmentUndefined) continue;
            if (q.diag.token != p.diag.detail && q.diag.token != p.diag.token) continue;
            absorb(q.diag, p.diag);
            p.dropped = true;
            break;
        }
    }

    std::vector<Diagnostic> out;
    for (auto& p : pend) {
        if (p.dropped) continue;
        auto dup = std::find_if(out.begin(), out.end(), [&](const Diagnostic& d) {
            return d.category == p.diag.category && d.span == p.diag.span;
        });
        if (dup != out.end()) {
            absorb(*dup, p.diag);
            continue;
        }
        out.push_back(std::move(p.diag));
    }
    auto cat_key = [](const Diagnostic& d) { return d.category ? static_cast<int>(*d.category) : 99; };
    std::stable_sort(out.begin(), out.end(), [&](const Diagnostic& a, const Diagnostic& b) {
        return std::make_pair(a.span.start, cat_key(a)) < std::make_pair(b.span.start, cat_key(b));
    });
    for (auto& d : out) {
        d.id = diagnostic_id(d, doc);
        d.message = explain(d);
        if (d.evidence_nodes.empty()) d.evidence_nodes.push_back("Root");
    }
    return out;
}

std::vector<LogRecord> advisories(const LogReport& log)
{
    std::vector<LogRecord> out;
    for (const auto& r : log.records)
        if (r.severity == Severity::BadBox) out.push_back(r);
    return out;
}

std::vector<std::pair<ErrorCategory, LogPattern>> classification_table()
{
    using C = ErrorCategory;
    using P = LogPattern;
    return {
        {C::UndefinedControl, P::UndefinedControlSequence},
        {C::PackageConflict, P::UndefinedControlSequence},
        {C::PackageConflict, P::EnvironmentUndefined},
        {C::PackageConflict, P::FileNotFound},
        {C::TableFigure, P::FileNotFound},
        {C::PackageConflict, P::PackageError},
        {C::EncodingFont, P::PackageError},
        {C::MathMode, P::PackageError},
        {C::MathMode, P::MissingDollar},
        {C::MathMode, P::DisplayMathEnd},
        {C::MathMode, P::BadMathDelimiter},
        {C::MathMode, P::ExtraBraceOrDollar},
        {C::MathMode, P::MissingBrace},
        {C::MathMode, P::EnvironmentMismatch},
        {C::TableFigure, P::EnvironmentMismatch},
        {C::TableFigure, P::ExtraAlignmentTab},
        {C::TableFigure, P::MisplacedAlignmentTab},
        {C::TableFigure, P::IllegalArrayArg},
        {C::TableFigure, P::NotInOuterPar},
        {C::TableFigure, P::CaptionOutsideFloat},
        {C::TableFigure, P::FloatError},
        {C::ReferenceError, P::CitationUndefined},
        {C::ReferenceError, P::ReferenceUndefined},
        {C::EncodingFont, P::UnicodeCharacter},
        {C::EncodingFont, P::InvalidUtf8},
        {C::EncodingFont, P::FontNotLoadable},
        {C::EncodingFont, P::EncodingUnknown},
    };
}

}  // namespace texrepair
