#include "texrepair/fix_engine.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "texrepair/checker.hpp"
#include "texrepair/encoding.hpp"
#include "texrepair/parser.hpp"
#include "texrepair/text_util.hpp"

namespace texrepair {

std::string_view to_string(InvalidReason r)
{
    switch (r) {
    case InvalidReason::ParseRegression: return "ParseRegression";
    case InvalidReason::DiagnosticPersists: return "DiagnosticPersists";
    case InvalidReason::OutOfScopeEdit: return "OutOfScopeEdit";
    case InvalidReason::MalformedPatch: return "MalformedPatch";
    }
    return "?";
}

std::string_view to_string(RepairStatus s)
{
    switch (s) {
    case RepairStatus::Fixed: return "fixed";
    case RepairStatus::Unfixable: return "unfixable";
    case RepairStatus::NoCandidates: return "no-candidates";
    }
    return "?";
}

std::vector<Diagnostic> proxy_diagnose(const SourceDocument& doc, const Ast& ast, const PackageDb& db)
{
    return diagnose(doc, ast, proxy_compile(doc, ast, db), db);
}

namespace {

const std::set<std::string, std::less<>> kListEnvs = {"itemize", "enumerate", "description", "compactitem",
                                                      "compactenum", "thebibliography", "list"};
const std::set<std::string, std::less<>> kTabularEnvs = {"tabular", "tabular*", "tabularx", "longtable", "array",
                                                         "tabulary", "xltabular"};
const std::set<std::string, std::less<>> kFloats = {"figure", "figure*", "table", "table*", "wrapfigure",
                                                    "wraptable", "sidewaysfigure", "sidewaystable", "algorithm"};
const std::set<std::string, std::less<>> kBoxEnvs = {"minipage", "center", "flushleft", "flushright"};

struct Found {
    const AstNode* node = nullptr;
    NodePath path;  // includes the node
    explicit operator bool() const { return node != nullptr; }
    const AstNode* parent() const { return path.size() >= 2 ? path[path.size() - 2] : nullptr; }
};

Found find_node(const Ast& ast, const std::function<bool(const AstNode&)>& pred)
{
    Found f;
    walk(ast.root, [&](const AstNode& n, const NodePath& p) {
        if (f) return false;
        if (pred(n)) {
            f.node = &n;
            f.path = p;
            return false;
        }
        return true;
    });
    return f;
}

std::vector<Found> find_all(const Ast& ast, const std::function<bool(const AstNode&)>& pred)
{
    std::vector<Found> out;
    walk(ast.root, [&](const AstNode& n, const NodePath& p) {
        if (pred(n)) out.push_back({&n, p});
        return true;
    });
    return out;
}

/// Deepest node whose span contains `s`.
Found containing(const Ast& ast, const Span& s)
{
    Found f;
    walk(ast.root, [&](const AstNode& n, const NodePath& p) {
        bool inside = n.span.start <= s.start && s.end <= n.span.end;
        if (!inside) return false;
        f.node = &n;
        f.path = p;
        return true;
    });
    return f;
}

bool in_math(const NodePath& path)
{
    return std::any_of(path.begin(), path.end(), [](const AstNode* n) { return n->is_math(); });
}

bool blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

class Builder {
public:
    Builder(const SourceDocument& doc, std::string rule) : doc_(doc), rule_(std::move(rule)) {}

    Builder& insert(std::size_t pos, std::string text)
    {
        patch_.edits.push_back({doc_.make_span(pos, pos), std::move(text)});
        return *this;
    }
    Builder& replace(const Span& s, std::string text)
    {
        patch_.edits.push_back({doc_.make_span(s.start, s.end), std::move(text)});
        return *this;
    }
    Builder& erase(const Span& s) { return replace(s, ""); }

    FixCandidate done(std::string description, std::string rationale)
    {
        FixCandidate c;
        patch_.description = std::move(description);
        c.patch = std::move(patch_);
        c.provider_id = "rules";
        c.rule_id = rule_;
        c.rationale = std::move(rationale);
        return c;
    }

private:
    const SourceDocument& doc_;
    std::string rule_;
    Patch patch_;
};

/// Span of a whole line including its newline, or just `s` when the line holds more.
Span line_or_node(const SourceDocument& doc, const Span& s)
{
    std::size_t line = doc.line_of(s.start);
    std::size_t ls = doc.line_start(line), le = doc.line_end(line);
    std::string_view before = std::string_view(doc.text()).substr(ls, s.start - ls);
    std::string_view after = std::string_view(doc.text()).substr(s.end, le > s.end ? le - s.end : 0);
    if (s.end <= le && blank(before) && blank(after)) {
        std::size_t end = le < doc.size() ? le + 1 : le;
        return doc.make_span(ls, end);
    }
    return s;
}

/// Offset just after the line holding `s`, where a new line can go.
std::size_t after_line(const SourceDocument& doc, std::size_t offset)
{
    std::size_t le = doc.line_end(doc.line_of(offset));
    return le < doc.size() ? le + 1 : le;
}

std::size_t trim_back(const std::string& s, std::size_t from, std::size_t floor, std::string_view chars)
{
    while (from > floor && chars.find(s[from - 1]) != std::string_view::npos) --from;
    return from;
}

/// A whitespace-delimited word that reads as formula rather than prose.
bool mathy_word(std::string_view w)
{
    while (!w.empty() && std::string_view(".,;:").find(w.back()) != std::string_view::npos) w.remove_suffix(1);
    if (w.empty() || w.find('$') != std::string_view::npos) return false;
    if (w.find_first_of("\\_^=+-<>()|/*[]0123456789") != std::string_view::npos) return true;
    return w.size() == 1 && std::isalpha(static_cast<unsigned char>(w[0])) && w != "a" && w != "A" && w != "I";
}

/// Start of the run of formula-like words that ends with the word holding `pos`.
std::size_t math_run_start(const std::string& s, std::size_t pos, std::size_t floor)
{
    std::size_t a = pos;
    while (a > floor && !std::isspace(static_cast<unsigned char>(s[a - 1])) && s[a - 1] != '$') --a;
    while (a > floor && (s[a - 1] == ' ' || s[a - 1] == '\t')) {
        std::size_t e = a;
        while (e > floor && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
        std::size_t b = e;
        while (b > floor && !std::isspace(static_cast<unsigned char>(s[b - 1])) && s[b - 1] != '$') --b;
        if (b == e || !mathy_word(std::string_view(s).substr(b, e - b))) break;
        a = b;
    }
    return a;
}

/// End (before trailing punctuation) of the run of formula-like words starting at `pos`.
std::size_t math_run_end(const std::string& s, std::size_t pos, std::size_t limit)
{
    std::size_t end = pos;
    std::size_t i = pos;
    while (i < limit) {
        while (i < limit && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t b = i;
        while (i < limit && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '$') ++i;
        if (b == i) break;
        std::string_view w = std::string_view(s).substr(b, i - b);
        if (b != pos && !mathy_word(w)) break;
        end = trim_back(s, i, b, ".,;:");
        if (end < i) break;  // a sentence ends here
    }
    return end;
}

/// First paragraph break at or after `from`, before `limit`; returns the offset of its first newline.
std::optional<std::size_t> paragraph_break(const std::string& s, std::size_t from, std::size_t limit)
{
    for (std::size_t i = from; i < limit; ++i) {
        if (s[i] != '\n') continue;
        std::size_t j = i + 1;
        while (j < limit && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
        if (j < limit && s[j] == '\n') return i;
    }
    return std::nullopt;
}

std::string usepackage(const std::string& pkg, const std::string& options)
{
    return "\\usepackage" + (options.empty() ? std::string{} : "[" + options + "]") + "{" + pkg + "}";
}

/// Where a new \usepackage line goes: after the last package, else after the class.
std::size_t preamble_insertion(const SourceDocument& doc, const Ast& ast)
{
    const AstNode* last = nullptr;
    const AstNode* cls = nullptr;
    for (const AstNode* n : ast.preamble()) {
        if (n->kind == NodeKind::PackageDecl) last = n;
        if (n->kind == NodeKind::DocumentClassDecl) cls = n;
    }
    if (last) return after_line(doc, last->span.end == 0 ? 0 : last->span.end - 1);
    if (cls) return after_line(doc, cls->span.end == 0 ? 0 : cls->span.end - 1);
    return 0;
}

FixCandidate add_package(const SourceDocument& doc, const Ast& ast, const std::string& rule, const std::string& pkg,
                         const std::string& options, const std::string& why)
{
    std::size_t at = preamble_insertion(doc, ast);
    std::string line = usepackage(pkg, options);
    std::string text = line + "\n";
    if (at == doc.size() && !doc.text().empty() && doc.text().back() != '\n') text = "\n" + line;
    return Builder(doc, rule).insert(at, text).done("Add " + line + " to the preamble", why);
}

/// Ranked names within edit distance 2 of `word`; ties alphabetical.
std::vector<std::string> nearest(const std::string& word, const std::set<std::string>& pool)
{
    std::vector<std::pair<std::size_t, std::string>> hits;
    for (const auto& cand : pool) {
        if (cand == word) continue;
        std::size_t d = edit_distance(word, cand, 2);
        if (d <= 2) hits.emplace_back(d, cand);
    }
    std::sort(hits.begin(), hits.end());
    std::vector<std::string> out;
    for (auto& h : hits) out.push_back(std::move(h.second));
    return out;
}

template <class T>
const T* nth(const std::vector<T>& v, int attempt)
{
    return attempt >= 1 && static_cast<std::size_t>(attempt) <= v.size() ? &v[attempt - 1] : nullptr;
}

std::vector<std::string> loaded_in_order(const Ast& ast)
{
    std::vector<std::string> out;
    for (const auto& p : ast.packages) out.push_back(p.name);
    return out;
}

bool incompatible_with_loaded(const std::string& pkg, const Ast& ast, const PackageDb& db)
{
    auto order = loaded_in_order(ast);
    order.push_back(pkg);
    for (const auto* rule : db.conflicts_in(order))
        if (rule->kind == ConflictKind::Incompatible && (rule->a == pkg || rule->b == pkg)) return true;
    return false;
}

// ---- the rules ----

class Rules {
public:
    Rules(const Diagnostic& d, const SourceDocument& doc, const Ast& ast, const PackageDb& db, int attempt)
        : d_(d), doc_(doc), s_(doc.text()), ast_(ast), db_(db), k_(attempt)
    {
    }

    std::vector<FixCandidate> run()
    {
        const std::string& c = d_.cause;
        if (c == cause::MissingPackage) return missing_package();
        if (c == cause::MissingFile) return package_typo();
        if (c == cause::UnknownCommand) return command_typo();
        if (c == cause::UnknownEnvironment) return environment_typo();
        if (c == cause::MathToken) return math_wrap();
        if (c == cause::UnterminatedMath) return close_math();
        if (c == cause::MathDelimiter) return fix_delimiter();
        if (c == cause::UnmatchedBrace) return stray_brace();
        if (c == cause::UnclosedGroup) return close_group();
        if (c == cause::UnclosedEnvironment) return close_environment();
        if (c == cause::OrphanEnd) return open_environment();
        if (c == cause::UndefinedKey) return reference();
        if (c == cause::Glyph) return glyph();
        if (c == cause::InvalidBytes) return invalid_bytes();
        if (c == cause::FontEncoding) return font_encoding();
        if (c == cause::Incompatible) return incompatible();
        if (c == cause::LoadOrder) return load_order();
        if (c == cause::OptionClash) return option_clash();
        if (c == cause::ExtraCell) return extra_cell();
        if (c == cause::StrayAmpersand) return stray_ampersand();
        if (c == cause::ColumnSpec) return column_spec();
        if (c == cause::FloatPlacement) return float_placement();
        if (c == cause::FloatNesting) return float_nesting();
        if (c == cause::CaptionPlacement) return caption_placement();
        return {};
    }

private:
    const Diagnostic& d_;
    const SourceDocument& doc_;
    const std::string& s_;
    const Ast& ast_;
    const PackageDb& db_;
    int k_;

    using Out = std::vector<FixCandidate>;

    Out one(FixCandidate c) { return Out{std::move(c)}; }

    Found at_head()
    {
        return find_node(ast_, [&](const AstNode& n) { return n.head == d_.span || n.span == d_.span; });
    }

    // R1
    Out missing_package()
    {
        SymbolKind kind = d_.pattern == LogPattern::EnvironmentUndefined ? SymbolKind::Environment : SymbolKind::Command;
        std::vector<const PackageRecord*> ranked;
        for (const auto* p : db_.provider_of(kind, d_.token))
            if (!incompatible_with_loaded(p->name, ast_, db_)) ranked.push_back(p);
        const PackageRecord* const* p = nth(ranked, k_);
        if (!p) return {};
        std::string what = kind == SymbolKind::Environment ? d_.token + " environment" : "\\" + d_.token;
        return one(add_package(doc_, ast_, "R1", (*p)->name, (*p)->default_options.value_or(""),
                               what + " is provided by " + (*p)->name + "."));
    }

    // R1, misspelt package name
    Out package_typo()
    {
        std::string name = d_.token;
        auto dot = name.rfind('.');
        if (dot != std::string::npos) name.resize(dot);
        std::set<std::string> pool;
        for (const auto& [n, _] : db_.records()) pool.insert(n);
        auto ranked = nearest(name, pool);
        const std::string* pick = nth(ranked, k_);
        if (!pick) return {};
        auto decl = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::PackageDecl && std::find(n.keys.begin(), n.keys.end(), name) != n.keys.end();
        });
        if (!decl) return {};
        auto pos = replace_key(*decl.node, name, *pick);
        if (!pos) return {};
        return one(Builder(doc_, "R1").replace(*pos, *pick).done("Load " + *pick + " instead of " + name,
                                                                    name + " is not a known package; " + *pick +
                                                                        " is the closest name."));
    }

    /// Span of `key` inside a node's braces.
    std::optional<Span> replace_key(const AstNode& n, const std::string& key, const std::string&)
    {
        std::string_view text = doc_.slice(n.span);
        std::size_t from = 0;
        if (n.options) from = text.find(']');
        if (from == std::string_view::npos) from = 0;
        while (true) {
            std::size_t i = text.find(key, from);
            if (i == std::string_view::npos) return std::nullopt;
            char before = i > 0 ? text[i - 1] : '{';
            char after = i + key.size() < text.size() ? text[i + key.size()] : '}';
            bool left = before == '{' || before == ',' || before == ' ';
            bool right = after == '}' || after == ',' || after == ' ';
            if (left && right) return doc_.make_span(n.span.start + i, n.span.start + i + key.size());
            from = i + 1;
        }
    }

    std::set<std::string> available_commands()
    {
        DocSymbols syms(ast_, db_);
        std::set<std::string> pool = db_.kernel(SymbolKind::Command);
        for (const auto& p : syms.packages())
            if (const auto* r = db_.find(p)) pool.insert(r->provides_commands.begin(), r->provides_commands.end());
        for (const auto& m : ast_.macros) pool.insert(m.name);
        return pool;
    }

    // R4
    Out command_typo()
    {
        // a slip is small next to the name: \R is not a misspelt \L
        auto plausible = [&](std::vector<std::string> names) {
            std::erase_if(names, [&](const std::string& n) {
                return edit_distance(d_.token, n, 3) * 3 > d_.token.size() + 1;
            });
            return names;
        };
        auto ranked = plausible(nearest(d_.token, available_commands()));
        if (ranked.empty()) {
            std::set<std::string> all = db_.all_symbols(SymbolKind::Command);
            for (const auto& m : ast_.macros) all.insert(m.name);
            ranked = plausible(nearest(d_.token, all));
        }
        const std::string* pick = nth(ranked, k_);
        if (!pick) return {};
        if (d_.span.size() < d_.token.size() + 1 || s_[d_.span.start] != '\\' ||
            s_.compare(d_.span.start + 1, d_.token.size(), d_.token) != 0)
            return {};
        Span name = doc_.make_span(d_.span.start + 1, d_.span.start + 1 + d_.token.size());
        return one(Builder(doc_, "R4").replace(name, *pick).done(
            "Replace \\" + d_.token + " with \\" + *pick, "\\" + *pick + " is the closest known command."));
    }

    Out environment_typo()
    {
        auto env = at_head();
        if (!env || env.node->kind != NodeKind::Environment) return {};
        DocSymbols syms(ast_, db_);
        std::set<std::string> pool = db_.kernel(SymbolKind::Environment);
        for (const auto& p : syms.packages())
            if (const auto* r = db_.find(p))
                pool.insert(r->provides_environments.begin(), r->provides_environments.end());
        for (const auto& e : ast_.environments) pool.insert(e.name);
        auto ranked = nearest(env.node->name, pool);
        const std::string* pick = nth(ranked, k_);
        if (!pick) return {};
        Builder b(doc_, "R4");
        const std::string& name = env.node->name;
        auto rename = [&](const Span& part) {
            std::size_t i = std::string_view(doc_.slice(part)).find("{" + name + "}");
            if (i != std::string_view::npos) b.replace(doc_.make_span(part.start + i + 1, part.start + i + 1 + name.size()), *pick);
        };
        rename(env.node->head);
        if (env.node->tail) rename(*env.node->tail);
        return one(b.done("Rename environment " + name + " to " + *pick, *pick + " is the closest known environment."));
    }

    // R2
    Out math_wrap()
    {
        auto node = at_head();
        if (node && node.node->kind == NodeKind::Environment) {
            if (k_ != 1) return {};
            std::size_t end = node.node->tail ? node.node->tail->end : node.node->span.end;
            return one(Builder(doc_, "R2")
                           .insert(node.node->span.start, "\\[")
                           .insert(end, "\\]")
                           .done("Put " + node.node->name + " inside display math",
                                 node.node->name + " only works inside math mode."));
        }
        Span run = d_.span;
        if (k_ == 1) {
            if (auto at = lost_opener(run)) {
                // the opening $ of this formula went missing
                return one(Builder(doc_, "R2").insert(*at, "$").done("Reopen the formula with $",
                                                                     "The formula is closed but never opened."));
            }
        }
        if (k_ == 2) {
            std::size_t a = run.start, b = run.end;
            auto stop = [&](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '$'; };
            while (a > 0 && !stop(s_[a - 1])) --a;
            while (b < s_.size() && !stop(s_[b])) ++b;
            b = trim_back(s_, b, run.end, ".,;:");
            if (a == run.start && b == run.end) return {};
            run = doc_.make_span(a, b);
        } else if (k_ != 1) {
            return {};
        }
        std::string text(doc_.slice(run));
        return one(Builder(doc_, "R2").insert(run.start, "$").insert(run.end, "$").done(
            "Wrap " + text + " in $...$", "Math-only material has to be typeset in math mode."));
    }

    /// Where a `$` went missing when math-only `run` is followed, through
    /// formula-like words, by a lone `$` the parser took for an opener.
    std::optional<std::size_t> lost_opener(const Span& run)
    {
        std::size_t i = run.end;
        auto para_end = paragraph_break(s_, run.end, s_.size()).value_or(s_.size());
        while (i < para_end && s_[i] != '$') ++i;
        if (i >= para_end || (i + 1 < s_.size() && s_[i + 1] == '$')) return std::nullopt;
        auto lone = find_node(ast_, [&](const AstNode& n) { return n.kind == NodeKind::MathInline && n.span.start == i; });
        if (!lone) return std::nullopt;
        if (lone.node->error != ErrorKind::UnterminatedMath) {
            // paired with the next formula's opener: what it encloses reads as prose
            std::string_view inner = std::string_view(s_).substr(i + 1, lone.node->span.end - i - 1);
            auto words = split(trim(inner), ' ');
            if (words.empty() || mathy_word(words.front())) return std::nullopt;
        }
        std::string_view between = std::string_view(s_).substr(run.end, i - run.end);
        for (const auto& w : split(between, ' '))
            if (!trim(w).empty() && !mathy_word(trim(w))) return std::nullopt;
        std::size_t floor = doc_.line_start(doc_.line_of(run.start));
        return math_run_start(s_, run.start, floor);
    }

    static std::string closer_for(std::string_view opener)
    {
        if (opener == "$$") return "$$";
        if (opener == "\\[") return "\\]";
        if (opener == "\\(") return "\\)";
        return "$";
    }

    static std::string opener_of(const AstNode& n)
    {
        for (const auto& p : n.pieces)
            if (p.type == Piece::Type::Literal) return p.text;
        return "$";
    }

    Out close_math()
    {
        auto node = find_node(ast_, [&](const AstNode& n) {
            return n.is_math() && n.error == ErrorKind::UnterminatedMath && n.span.start == d_.span.start;
        });
        if (!node) return {};
        std::string open = opener_of(*node.node);
        std::string close = closer_for(open);
        std::size_t open_end = node.node->span.start + open.size();
        std::size_t limit = std::min(doc_.line_end(doc_.line_of(open_end)), node.node->span.end);
        limit = std::max(limit, open_end);
        std::size_t pos = trim_back(s_, limit, open_end, " \t\r");
        // candidate closing points, best first: after the formula-like words,
        // at the end of the line before punctuation, at the very end of the line
        std::vector<std::pair<std::size_t, std::string>> spots;
        if (open == "$" || open == "\\(") {
            std::size_t run = math_run_end(s_, open_end, limit);
            if (run > open_end && run < trim_back(s_, pos, open_end, ".,;:"))
                spots.emplace_back(run, "Close the formula after its last term");
        }
        spots.emplace_back(trim_back(s_, pos, open_end, ".,;:"), "Close the formula with " + close);
        if (spots.back().first != pos) spots.emplace_back(pos, "Close the formula at the end of the line");
        if (k_ >= 1 && static_cast<std::size_t>(k_) <= spots.size()) {
            const auto& [at, what] = spots[k_ - 1];
            return one(Builder(doc_, "R2").insert(at, close).done(what, "The formula opened with " + open + " never ends."));
        }
        if (static_cast<std::size_t>(k_) == spots.size() + 1)
            return one(Builder(doc_, "R2")
                           .erase(doc_.make_span(node.node->span.start, open_end))
                           .done("Remove the stray " + open, "The " + open + " does not start a real formula."));
        return {};
    }

    Out fix_delimiter()
    {
        if (k_ != 1) return {};
        auto where = containing(ast_, d_.span);
        if (!where) return {};
        // wrong closer inside a formula
        for (auto it = where.path.rbegin(); it != where.path.rend(); ++it) {
            const AstNode* n = *it;
            if (n->error == ErrorKind::MathDelimiterMismatch && n->kind == NodeKind::Error) {
                const AstNode* math = nullptr;
                for (auto up = it + 1; up != where.path.rend(); ++up)
                    if ((*up)->kind == NodeKind::MathInline || (*up)->kind == NodeKind::MathDisplay) {
                        math = *up;
                        break;
                    }
                if (!math) break;
                std::string close = closer_for(opener_of(*math));
                return one(Builder(doc_, "R2").replace(n->span, close).done(
                    "Close the formula with " + close, "The closing delimiter must match " + opener_of(*math) + "."));
            }
            if (n->error == ErrorKind::DisplayMathMismatch) {
                std::string open = opener_of(*n), close = closer_for(open);
                const Piece* last = nullptr;
                for (const auto& p : n->pieces)
                    if (p.type == Piece::Type::Literal) last = &p;
                if (!last || (last->text == open && n->pieces.size() == 1)) break;
                std::size_t end = n->span.end, start = end - last->text.size();
                return one(Builder(doc_, "R2").replace(doc_.make_span(start, end), close).done(
                    "Close the formula with " + close, "The closing delimiter must match " + open + "."));
            }
            if (n->error == ErrorKind::StrayMathClose)
                return one(Builder(doc_, "R2").erase(n->span).done("Remove the unmatched math delimiter",
                                                                   "Nothing opened this formula."));
        }
        return {};
    }

    Out stray_brace()
    {
        if (k_ != 1) return {};
        auto node = find_node(ast_, [&](const AstNode& n) { return n.error == ErrorKind::UnmatchedBrace && n.span == d_.span; });
        if (!node) return {};
        return one(Builder(doc_, "R2").erase(node.node->span).done("Remove the unmatched }", "Nothing opened this group."));
    }

    Out close_group()
    {
        auto node = find_node(ast_, [&](const AstNode& n) {
            return n.error == ErrorKind::UnclosedGroup && n.span.start == d_.span.start;
        });
        if (!node) return {};
        std::size_t open_end = node.node->span.start + 1;
        std::size_t limit = std::min(doc_.line_end(doc_.line_of(open_end)), node.node->span.end);
        limit = std::max(limit, open_end);
        std::size_t eol = trim_back(s_, limit, open_end, " \t\r");
        std::size_t pos = 0;
        if (k_ == 1) pos = trim_back(s_, eol, open_end, ".,;:");
        else if (k_ == 2) pos = eol;
        else if (k_ == 3) pos = trim_back(s_, node.node->span.end, open_end, " \t\r\n");
        else return {};
        if (k_ > 1 && pos == (k_ == 2 ? trim_back(s_, eol, open_end, ".,;:") : eol)) return {};
        return one(Builder(doc_, "R2").insert(pos, "}").done("Close the group with }", "This { is never closed."));
    }

    // R3
    Out close_environment()
    {
        std::string name = d_.token;
        auto env = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::Environment && n.error == ErrorKind::UnclosedEnvironment && n.head == d_.span;
        });
        if (!env) return close_inner();
        const AstNode& e = *env.node;
        name = e.name;
        std::size_t limit = e.span.end;
        std::size_t fallback = trim_back(s_, limit, e.head.end, " \t\r\n");

        std::size_t anchor = e.head.end;
        if (kListEnvs.count(name))
            for (const auto& c : e.children)
                if (c.kind == NodeKind::Command && c.name == "item") anchor = c.span.end;

        auto textual = paragraph_break(s_, anchor, limit);
        std::size_t p1 = textual.value_or(fallback);

        // the same search, stepping over nested structures
        std::optional<std::size_t> p2;
        for (const auto& c : e.children) {
            if (c.span.end <= anchor || c.kind != NodeKind::Text) continue;
            if (auto b = paragraph_break(s_, std::max(anchor, c.span.start), c.span.end)) {
                p2 = b;
                break;
            }
        }
        std::size_t pos;
        if (k_ == 1) pos = p1;
        else if (k_ == 2) {
            pos = p2.value_or(fallback);
            if (pos == p1) return {};
        } else if (k_ == 3) {
            pos = fallback;
            if (pos == p1 || pos == p2.value_or(fallback + 1)) return {};
        } else return {};

        std::string text = "\\end{" + name + "}";
        std::size_t line_start = doc_.line_start(doc_.line_of(pos));
        if (!blank(std::string_view(s_).substr(line_start, pos - line_start))) text = "\n" + text;
        return one(Builder(doc_, "R3").insert(pos, text).done("Close " + name + " with \\end{" + name + "}",
                                                              "\\begin{" + name + "} is never closed."));
    }

    /// The diagnostic names a nested environment the parser saw as closed: its
    /// \end really belongs to the enclosing one of the same name, by indentation.
    Out close_inner()
    {
        auto inner = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::Environment && n.head == d_.span && n.tail.has_value();
        });
        if (!inner || k_ > 2) return {};
        const AstNode& e = *inner.node;
        std::size_t head_line = doc_.line_start(doc_.line_of(e.head.start));
        std::string pad(e.head.start - head_line, ' ');
        std::size_t pos;
        if (k_ == 1) {
            pos = doc_.line_start(doc_.line_of(e.tail->start));
        } else {
            std::size_t anchor = e.head.end;
            for (const auto& c : e.children)
                if (c.kind == NodeKind::Command && c.name == "item") anchor = c.span.end;
            auto brk = paragraph_break(s_, anchor, e.tail->start);
            if (!brk) return {};
            pos = *brk + 1;
        }
        std::string text = pad + "\\end{" + e.name + "}\n";
        return one(Builder(doc_, "R3").insert(pos, text).done("Close the inner " + e.name + " with \\end{" + e.name + "}",
                                                              "The nested \\begin{" + e.name + "} is never closed."));
    }

    std::string begin_args(const std::string& name, std::size_t from, std::size_t to)
    {
        if (kTabularEnvs.count(name)) {
            std::size_t cols = 1;
            std::string_view body = std::string_view(s_).substr(from, to - from);
            std::size_t row_start = 0;
            while (row_start <= body.size()) {
                std::size_t row_end = body.find("\\\\", row_start);
                std::string_view row = body.substr(row_start, row_end == std::string_view::npos ? body.size() - row_start
                                                                                              : row_end - row_start);
                cols = std::max<std::size_t>(cols, std::count(row.begin(), row.end(), '&') + 1);
                if (row_end == std::string_view::npos) break;
                row_start = row_end + 2;
            }
            std::string spec = "{" + std::string(cols, 'l') + "}";
            if (name == "tabular*" || name == "tabularx" || name == "xltabular") return "{\\linewidth}" + spec;
            return spec;
        }
        if (name == "minipage") return "{\\linewidth}";
        if (name == "thebibliography") return "{99}";
        return "";
    }

    Out open_environment()
    {
        auto orphan = find_node(ast_, [&](const AstNode& n) { return n.error == ErrorKind::OrphanEnd && n.span == d_.span; });
        if (!orphan) return {};
        const std::string& name = orphan.node->name;
        int k = k_;
        // \end{alignd} closing an open align: the name is wrong, not the structure
        const AstNode* open = nullptr;
        for (auto it = orphan.path.rbegin() + 1; it != orphan.path.rend(); ++it)
            if ((*it)->kind == NodeKind::Environment && (*it)->error == ErrorKind::UnclosedEnvironment) {
                open = *it;
                break;
            }
        if (open && (edit_distance(open->name, name, 3) <= 3 || starts_with(name, open->name) ||
                     starts_with(open->name, name))) {
            if (k == 1) {
                std::size_t i = std::string_view(doc_.slice(orphan.node->span)).find("{" + name + "}");
                if (i == std::string_view::npos) return {};
                std::size_t at = orphan.node->span.start + i + 1;
                return one(Builder(doc_, "R3")
                               .replace(doc_.make_span(at, at + name.size()), open->name)
                               .done("Close " + open->name + " with \\end{" + open->name + "}",
                                     "\\begin{" + open->name + "} is closed by \\end{" + name + "}."));
            }
            --k;
        }
        if (k == 1) {
            const AstNode* parent = orphan.parent();
            std::size_t floor = parent ? parent->head.end : 0;
            // start of the paragraph that ends at the orphan
            std::size_t pos = floor;
            for (std::size_t i = orphan.node->span.start; i > floor; --i) {
                if (s_[i - 1] != '\n') continue;
                std::size_t j = i - 1;
                while (j > floor && (s_[j - 1] == ' ' || s_[j - 1] == '\t' || s_[j - 1] == '\r')) --j;
                if (j > floor && s_[j - 1] == '\n' && i < orphan.node->span.start) {
                    pos = i;
                    break;
                }
            }
            while (pos < orphan.node->span.start && (s_[pos] == '\n' || s_[pos] == ' ' || s_[pos] == '\t')) {
                if (s_[pos] == '\n') {
                    ++pos;
                    continue;
                }
                std::size_t le = doc_.line_end(doc_.line_of(pos));
                if (!blank(std::string_view(s_).substr(pos, le - pos))) break;
                pos = le;
            }
            pos = doc_.line_start(doc_.line_of(pos));
            std::string text = "\\begin{" + name + "}" + begin_args(name, pos, orphan.node->span.start) + "\n";
            return one(Builder(doc_, "R3").insert(pos, text).done("Open " + name + " with \\begin{" + name + "}",
                                                                  "\\end{" + name + "} has no \\begin."));
        }
        if (k == 2)
            return one(Builder(doc_, "R3").erase(line_or_node(doc_, orphan.node->span)).done(
                "Remove the unmatched \\end{" + name + "}", "\\end{" + name + "} has no \\begin."));
        return {};
    }

    // R5
    Out reference()
    {
        bool cite = d_.pattern == LogPattern::CitationUndefined;
        DefinedKeys keys = defined_keys(doc_, ast_);
        auto ranked = nearest(d_.token, cite ? keys.citations : keys.labels);
        const std::string* pick = nth(ranked, k_);
        if (!pick) return {};
        auto node = find_node(ast_, [&](const AstNode& n) {
            return (n.kind == NodeKind::CiteRef || n.kind == NodeKind::LabelRef) && n.span == d_.span;
        });
        if (!node) return {};
        auto pos = replace_key(*node.node, d_.token, *pick);
        if (!pos) return {};
        return one(Builder(doc_, "R5").replace(*pos, *pick).done("Replace key " + d_.token + " with " + *pick,
                                                                 *pick + " is the closest defined key."));
    }

    // R6
    Out glyph()
    {
        Utf8Char ch = decode_utf8(s_, d_.span.start);
        if (!ch.valid) return invalid_bytes();
        Span span = doc_.make_span(d_.span.start, d_.span.start + ch.length);
        auto where = containing(ast_, span);
        auto escape = latex_escape(ch.cp, where && in_math(where.path));
        bool t1 = glyph_support(ch.cp) == GlyphSupport::NeedsT1 && !ast_.loads("fontenc");
        std::vector<FixCandidate> options;
        if (escape)
            options.push_back(Builder(doc_, "R6").replace(span, *escape).done(
                "Replace " + codepoint_label(ch.cp) + " with " + *escape, "The character has a standard LaTeX spelling."));
        if (t1)
            options.push_back(add_package(doc_, ast_, "R6", "fontenc", "T1",
                                          "The character needs the T1 font encoding."));
        if (auto* c = nth(options, k_)) return one(*c);
        return {};
    }

    Out invalid_bytes()
    {
        std::size_t a = d_.span.start, b = a;
        while (b < s_.size() && !decode_utf8(s_, b).valid) ++b;
        if (b == a) return {};
        Span span = doc_.make_span(a, b);
        if (k_ == 1) {
            // most stray bytes are Latin-1 text
            std::string text;
            for (std::size_t i = a; i < b; ++i) {
                char32_t cp = static_cast<unsigned char>(s_[i]);
                auto esc = latex_escape(cp, false);
                if (esc) text += *esc;
                else if (glyph_support(cp) == GlyphSupport::Ascii || glyph_support(cp) == GlyphSupport::Builtin)
                    text += encode_utf8(cp);
                else return {};
            }
            return one(Builder(doc_, "R6").replace(span, text).done("Re-encode the bytes as " + text,
                                                                    "The bytes look like Latin-1 text."));
        }
        if (k_ == 2)
            return one(Builder(doc_, "R6").erase(span).done("Remove the invalid bytes", "The bytes are not UTF-8."));
        return {};
    }

    Out font_encoding()
    {
        auto decl = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::PackageDecl && std::find(n.keys.begin(), n.keys.end(), "fontenc") != n.keys.end() &&
                   n.span.intersects(d_.span);
        });
        if (!decl || !decl.node->options) return {};
        const AstNode* opt = nullptr;
        for (const auto& a : decl.node->args)
            if (a.optional) {
                opt = &a;
                break;
            }
        if (!opt || opt->span.size() < 2) return {};
        std::vector<std::string> fixed;
        bool changed = false;
        for (const auto& o : split(*decl.node->options, ',')) {
            std::string t = trim(o);
            if (t.empty() || known_font_encoding(t)) {
                if (!t.empty()) fixed.push_back(t);
                continue;
            }
            changed = true;
            if (k_ == 1) {
                auto near = nearest_font_encoding(t);
                if (!near) return {};
                fixed.push_back(*near);
            } else if (k_ == 2) {
                fixed.push_back("T1");
            } else {
                return {};
            }
        }
        if (!changed) return {};
        std::string text;
        for (const auto& f : fixed) text += (text.empty() ? "" : ",") + f;
        Span inner = doc_.make_span(opt->span.start + 1, opt->span.end - 1);
        return one(Builder(doc_, "R6").replace(inner, text).done("Use font encoding " + text,
                                                                 "The requested encoding does not exist."));
    }

    // R7
    std::optional<Span> removal(const std::string& pkg)
    {
        auto decl = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::PackageDecl && std::find(n.keys.begin(), n.keys.end(), pkg) != n.keys.end();
        });
        if (!decl) return std::nullopt;
        if (decl.node->keys.size() == 1) return line_or_node(doc_, decl.node->span);
        auto pos = replace_key(*decl.node, pkg, "");
        if (!pos) return std::nullopt;
        // take the comma with it
        Span s = *pos;
        if (s.end < s_.size() && s_[s.end] == ',') ++s.end;
        else if (s.start > 0 && s_[s.start - 1] == ',') --s.start;
        return doc_.make_span(s.start, s.end);
    }

    Out incompatible()
    {
        const ConflictRule* rule = nullptr;
        for (const auto& r : db_.conflicts())
            if (r.kind == ConflictKind::Incompatible &&
                ((r.a == d_.token && r.b == d_.detail) || (r.b == d_.token && r.a == d_.detail)))
                rule = &r;
        if (!rule) return {};
        std::string first = rule->remove.value_or(d_.token);
        std::string second = first == rule->a ? rule->b : rule->a;
        const std::string& drop = k_ == 1 ? first : second;
        if (k_ > 2) return {};
        auto span = removal(drop);
        if (!span) return {};
        return one(Builder(doc_, "R7").erase(*span).done("Remove \\usepackage{" + drop + "}",
                                                         rule->resolution_hint.empty() ? drop + " conflicts with " +
                                                                                             (drop == rule->a ? rule->b : rule->a) + "."
                                                                                       : rule->resolution_hint));
    }

    Out load_order()
    {
        // token must come before detail but was loaded after it
        auto decl_of = [&](const std::string& pkg) {
            return find_node(ast_, [&](const AstNode& n) {
                return n.kind == NodeKind::PackageDecl && std::find(n.keys.begin(), n.keys.end(), pkg) != n.keys.end();
            });
        };
        auto early = decl_of(d_.token), late = decl_of(d_.detail);
        if (!early || !late || k_ > 2) return {};
        Span move = line_or_node(doc_, early.node->span);
        Span target = line_or_node(doc_, late.node->span);
        if (move.intersects(target)) return {};
        std::string text(doc_.slice(move));
        if (text.empty() || text.back() != '\n') text += "\n";
        if (k_ == 1)
            return one(Builder(doc_, "R7").insert(target.start, text).erase(move).done(
                "Load " + d_.token + " before " + d_.detail, d_.token + " has to be loaded before " + d_.detail + "."));
        std::string other(doc_.slice(target));
        if (other.empty() || other.back() != '\n') other += "\n";
        std::size_t after = move.end;
        return one(Builder(doc_, "R7").erase(target).insert(after, other).done(
            "Load " + d_.detail + " after " + d_.token, d_.token + " has to be loaded before " + d_.detail + "."));
    }

    Out option_clash()
    {
        auto decls = find_all(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::PackageDecl && std::find(n.keys.begin(), n.keys.end(), d_.token) != n.keys.end();
        });
        if (decls.size() < 2 || k_ > 2) return {};
        const AstNode& first = *decls.front().node;
        const AstNode& second = *decls.back().node;
        auto second_span = removal_of(second);
        if (!second_span) return {};
        if (k_ == 2)
            return one(Builder(doc_, "R7").erase(*second_span).done("Remove the second \\usepackage{" + d_.token + "}",
                                                                    "The package is already loaded."));
        std::vector<std::string> merged;
        for (const auto* n : {&first, &second})
            if (n->options)
                for (const auto& o : split(*n->options, ',')) {
                    std::string t = trim(o);
                    if (!t.empty() && std::find(merged.begin(), merged.end(), t) == merged.end()) merged.push_back(t);
                }
        std::string opts;
        for (const auto& m : merged) opts += (opts.empty() ? "" : ",") + m;
        if (first.keys.size() != 1) return {};
        Builder b(doc_, "R7");
        b.replace(first.span, std::string(doc_.slice(first.span).substr(0, 0)) + "\\" + first.macro +
                                  (opts.empty() ? "" : "[" + opts + "]") + "{" + d_.token + "}");
        b.erase(*second_span);
        return one(b.done("Load " + d_.token + " once with options [" + opts + "]",
                          "Loading a package twice with different options is an error."));
    }

    std::optional<Span> removal_of(const AstNode& decl)
    {
        if (decl.keys.size() == 1) return line_or_node(doc_, decl.span);
        auto pos = replace_key(decl, d_.token, "");
        if (!pos) return std::nullopt;
        Span s = *pos;
        if (s.end < s_.size() && s_[s.end] == ',') ++s.end;
        else if (s.start > 0 && s_[s.start - 1] == ',') --s.start;
        return doc_.make_span(s.start, s.end);
    }

    // R8
    Found enclosing_tabular(const Span& at)
    {
        auto where = containing(ast_, at);
        for (auto it = where.path.rbegin(); it != where.path.rend(); ++it)
            if ((*it)->kind == NodeKind::Environment && kTabularEnvs.count((*it)->name)) {
                Found f;
                f.node = *it;
                f.path.assign(where.path.begin(), it.base());
                return f;
            }
        return {};
    }

    const AstNode* spec_arg(const AstNode& env)
    {
        const AstNode* spec = nullptr;
        for (const auto& a : env.args)
            if (!a.optional && a.kind == NodeKind::Group) spec = &a;
        return spec;
    }

    Out extra_cell()
    {
        if (k_ == 1)
            return one(Builder(doc_, "R8").erase(d_.span).done("Remove the extra &", "The row has one cell too many."));
        if (k_ == 2) {
            auto tab = enclosing_tabular(d_.span);
            if (!tab) return {};
            const AstNode* spec = spec_arg(*tab.node);
            if (!spec || spec->span.size() < 2) return {};
            return one(Builder(doc_, "R8").insert(spec->span.end - 1, "l").done(
                "Add a column to the tabular", "The row has more cells than the column specification."));
        }
        return {};
    }

    Out stray_ampersand()
    {
        if (k_ != 1) return {};
        return one(Builder(doc_, "R8").replace(d_.span, "\\&").done("Escape the & as \\&",
                                                                    "A literal ampersand needs a backslash."));
    }

    // R9
    Out column_spec()
    {
        auto tab = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::Environment && kTabularEnvs.count(n.name) &&
                   (n.head.contains(d_.span) || n.head == d_.span);
        });
        if (!tab) return {};
        const AstNode* spec = spec_arg(*tab.node);
        if (!spec || spec->span.size() < 2) return {};
        DocSymbols syms(ast_, db_);
        std::set<char> custom;
        for (const auto& c : ast_.root.children) (void)c;
        walk(ast_.root, [&](const AstNode& n, const NodePath&) {
            if (n.kind == NodeKind::Command && n.name == "newcolumntype")
                if (auto t = n.mandatory_arg_text(); t && trim(*t).size() == 1) custom.insert(trim(*t)[0]);
            return true;
        });
        auto package_for = [](char c) -> std::string {
            if (c == 'm' || c == 'b' || c == '>' || c == '<') return "array";
            if (c == 'X') return "tabularx";
            if (c == 'S') return "siunitx";
            return "";
        };
        auto legal = [&](char c) {
            if (std::string_view("lcr|p@!*").find(c) != std::string_view::npos) return true;
            if (custom.count(c)) return true;
            std::string pkg = package_for(c);
            return !pkg.empty() && syms.loaded(pkg);
        };
        std::size_t a = spec->span.start + 1, b = spec->span.end - 1;
        std::string fixed;
        std::string needs;
        bool changed = false;
        for (std::size_t i = a; i < b; ++i) {
            char c = s_[i];
            if (c == '{') {
                // argument of p{..}, @{..}, *{n}{..}: copy verbatim
                int depth = 0;
                std::size_t j = i;
                for (; j < b; ++j) {
                    if (s_[j] == '{') ++depth;
                    if (s_[j] == '}' && --depth == 0) break;
                }
                fixed.append(s_, i, j - i + 1);
                i = j;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || legal(c)) {
                fixed += c;
                continue;
            }
            if (needs.empty()) needs = package_for(c);
            fixed += 'l';
            changed = true;
        }
        if (!changed) return {};
        std::vector<FixCandidate> options;
        if (!needs.empty() && db_.find(needs))
            options.push_back(add_package(doc_, ast_, "R1", needs, db_.find(needs)->default_options.value_or(""),
                                          "The column type comes from " + needs + "."));
        options.push_back(Builder(doc_, "R9").replace(doc_.make_span(a, b), fixed).done(
            "Use column specification {" + fixed + "}", "The column specification has characters LaTeX rejects."));
        if (auto* c = nth(options, k_)) return one(*c);
        return {};
    }

    Out float_placement()
    {
        if (d_.span.size() < 2 || s_[d_.span.start] != '[' || s_[d_.span.end - 1] != ']') return {};
        std::string keep;
        bool h_ok = ast_.loads("float");
        for (std::size_t i = d_.span.start + 1; i + 1 < d_.span.end; ++i) {
            char c = s_[i];
            if (std::string_view("htbp!").find(c) != std::string_view::npos || (c == 'H' && h_ok)) keep += c;
        }
        if (k_ == 1 && !keep.empty())
            return one(Builder(doc_, "R9").replace(d_.span, "[" + keep + "]").done(
                "Use placement [" + keep + "]", "Only h, t, b, p and ! are placement options."));
        if (k_ == (keep.empty() ? 1 : 2))
            return one(Builder(doc_, "R9").erase(d_.span).done("Drop the placement option",
                                                               "The placement option is not valid."));
        return {};
    }

    Out float_nesting()
    {
        if (k_ != 1) return {};
        auto env = at_head();
        if (!env || env.node->kind != NodeKind::Environment || !env.node->tail) return {};
        const AstNode& e = *env.node;
        return one(Builder(doc_, "R9")
                       .erase(line_or_node(doc_, e.head))
                       .erase(line_or_node(doc_, *e.tail))
                       .done("Unwrap the nested " + e.name, "A float cannot sit inside another float or a box."));
    }

    Out caption_placement()
    {
        auto cap = find_node(ast_, [&](const AstNode& n) {
            return n.kind == NodeKind::Command && n.name == "caption" && n.head == d_.span;
        });
        if (!cap) return {};
        Span cut = line_or_node(doc_, cap.node->span);
        if (k_ == 1) {
            const AstNode* parent = cap.parent();
            if (!parent) return {};
            const AstNode* before = nullptr;
            const AstNode* after = nullptr;
            for (const auto* sib : parent->subnodes()) {
                if (sib->kind != NodeKind::Environment || !kFloats.count(sib->name) || !sib->tail) continue;
                if (sib->span.end <= cap.node->span.start) before = sib;
                else if (!after && sib->span.start >= cap.node->span.end) after = sib;
            }
            std::size_t line = cap.node->span.line;
            std::string text(doc_.slice(cap.node->span));
            if (before && line - doc_.line_of(before->tail->start) <= 3) {
                std::size_t at = doc_.line_start(doc_.line_of(before->tail->start));
                return one(Builder(doc_, "R9").insert(at, text + "\n").erase(cut).done(
                    "Move the caption into the " + before->name, "\\caption only works inside a float."));
            }
            if (after && after->span.line - line <= 3) {
                std::size_t at = after_line(doc_, after->head.end - 1);
                return one(Builder(doc_, "R9").erase(cut).insert(at, text + "\n").done(
                    "Move the caption into the " + after->name, "\\caption only works inside a float."));
            }
            return {};
        }
        if (k_ == 2)
            return one(Builder(doc_, "R9").erase(cut).done("Remove the caption", "\\caption only works inside a float."));
        return {};
    }
};

// ---- validation helpers ----

bool structural(const AstNode& n)
{
    return n.kind == NodeKind::Environment || n.kind == NodeKind::Group || n.kind == NodeKind::MathInline ||
           n.kind == NodeKind::MathDisplay || n.kind == NodeKind::Command || n.kind == NodeKind::Error ||
           n.kind == NodeKind::PackageDecl || n.kind == NodeKind::CiteRef || n.kind == NodeKind::LabelRef ||
           n.kind == NodeKind::DocumentClassDecl;
}

/// Start of the paragraph `steps` paragraphs before `offset` (0: the current one).
std::size_t paragraphs_back(const std::string& s, std::size_t offset, int steps)
{
    std::size_t i = std::min(offset, s.size());
    for (int k = 0; k <= steps; ++k) {
        // skip blank lines directly above
        while (i > 0 && (s[i - 1] == '\n' || s[i - 1] == ' ' || s[i - 1] == '\t' || s[i - 1] == '\r') && k > 0) --i;
        bool found = false;
        while (i > 0) {
            if (s[i - 1] == '\n') {
                std::size_t j = i - 1;
                while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '\t' || s[j - 1] == '\r')) --j;
                if (j == 0 || s[j - 1] == '\n') {
                    found = true;
                    break;
                }
            }
            --i;
        }
        if (!found) return 0;
    }
    return i;
}

std::size_t paragraphs_forward(const std::string& s, std::size_t offset, int steps)
{
    std::size_t i = std::min(offset, s.size());
    for (int k = 0; k <= steps; ++k) {
        while (k > 0 && i < s.size() && (s[i] == '\n' || s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        auto b = paragraph_break(s, i, s.size());
        if (!b) return s.size();
        i = *b + 1;
    }
    return i;
}

/// Region a body edit may touch: the parent of the innermost structure around
/// the diagnostic, or the neighbouring paragraphs when that parent is the document.
Span edit_scope(const SourceDocument& doc, const Ast& ast, const Diagnostic& d, bool environment_rule)
{
    auto where = containing(ast, d.span);
    std::vector<const AstNode*> chain;
    for (const AstNode* n : where.path)
        if (n->kind == NodeKind::Root || structural(*n)) chain.push_back(n);
    const AstNode* doc_env = ast.document_environment();
    auto outer = [&](const AstNode* n) { return n->kind == NodeKind::Root || n == doc_env; };

    const AstNode* inner = chain.empty() ? nullptr : chain.back();
    const AstNode* parent = chain.size() >= 2 ? chain[chain.size() - 2] : nullptr;
    if (inner && !outer(inner) && parent && (!outer(parent) || environment_rule)) return parent->span;

    const std::string& s = doc.text();
    Span base = inner && !outer(inner) ? inner->span : d.span;
    std::size_t a = paragraphs_back(s, base.start, 1);
    std::size_t b = paragraphs_forward(s, base.end, 1);
    return doc.make_span(a, std::max(b, base.end));
}

bool preamble_rule(const std::optional<std::string>& rule)
{
    return rule && (*rule == "R1" || *rule == "R6" || *rule == "R7");
}

Span mapped(const Patch& p, const Span& s, const SourceDocument& doc)
{
    std::size_t a = map_offset(p, s.start), b = map_offset(p, s.end);
    if (b < a) b = a;
    return doc.make_span(std::min(a, doc.size()), std::min(b, doc.size()));
}

bool overlaps(const Span& a, const Span& b)
{
    if (a.intersects(b)) return true;
    // an empty span sitting on the boundary still counts
    if (a.empty()) return b.start <= a.start && a.start <= b.end;
    if (b.empty()) return a.start <= b.start && b.start <= a.end;
    return false;
}

bool structural_cause(const std::string& c)
{
    return c == cause::UnclosedEnvironment || c == cause::OrphanEnd || c == cause::UnterminatedMath ||
           c == cause::UnclosedGroup || c == cause::UnmatchedBrace || c == cause::MathDelimiter;
}

}  // namespace

std::vector<FixCandidate> suggest_rule_based(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast,
                                             const PackageDb& db, int attempt)
{
    if (attempt < 1 || attempt > kMaxAttempts || !diag.category) return {};
    if (diag.span.end > doc.size()) return {};
    return Rules(diag, doc, ast, db, attempt).run();
}

Validation validate(const FixCandidate& candidate, const SourceDocument& doc, const Diagnostic& diag,
                    const PackageDb& db)
{
    Validation v;
    const Patch& patch = candidate.patch;
    if (patch.edits.empty() || patch.description.empty()) {
        v.reason = InvalidReason::MalformedPatch;
        v.detail = patch.edits.empty() ? "patch has no edits" : "patch has no description";
        return v;
    }
    try {
        check_patch(doc, patch);
    } catch (const PatchError& e) {
        v.reason = InvalidReason::MalformedPatch;
        v.detail = e.what();
        return v;
    }

    Ast before = parse(doc);
    SourceDocument patched = apply_patch(doc, patch);
    Ast after = parse(patched);
    if (after.recovery_count > before.recovery_count) {
        v.reason = InvalidReason::ParseRegression;
        v.detail = "recovery count " + std::to_string(before.recovery_count) + " -> " +
                   std::to_string(after.recovery_count);
        return v;
    }

    bool env_rule = candidate.rule_id == "R3";
    Span scope = edit_scope(doc, before, diag, env_rule);
    std::size_t preamble_end = before.document_begin.value_or(doc.size());
    for (const auto& e : patch.edits) {
        bool in_scope = scope.start <= e.span.start && e.span.end <= scope.end;
        bool in_preamble = e.span.end <= preamble_end;
        if (in_scope || (in_preamble && preamble_rule(candidate.rule_id))) continue;
        v.reason = InvalidReason::OutOfScopeEdit;
        v.detail = "edit at line " + std::to_string(doc.line_of(e.span.start)) + " is outside lines " +
                   std::to_string(scope.line) + "-" + std::to_string(doc.line_of(scope.end == 0 ? 0 : scope.end - 1));
        return v;
    }

    Span target = mapped(patch, diag.span, patched);
    for (const auto& d : proxy_diagnose(patched, after, db)) {
        if (d.category != diag.category || !overlaps(d.span, target)) continue;
        v.reason = InvalidReason::DiagnosticPersists;
        v.detail = d.id + ": " + d.message;
        return v;
    }
    return v;
}

RepairResult repair(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast, const PackageDb& db,
                    const std::vector<SuggestionProvider*>& providers)
{
    RepairResult result;
    bool any = false;
    for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
        result.attempts = attempt;
        for (SuggestionProvider* p : providers) {
            if (!p) continue;
            for (auto& cand : p->suggest(diag, doc, ast, db, attempt)) {
                any = true;
                AttemptOutcome o;
                o.attempt = attempt;
                o.provider_id = cand.provider_id.empty() ? p->id() : cand.provider_id;
                o.rule_id = cand.rule_id;
                o.description = cand.patch.description;
                o.validation = validate(cand, doc, diag, db);
                bool ok = o.validation.valid();
                result.validation_log.push_back(std::move(o));
                if (ok) {
                    result.status = RepairStatus::Fixed;
                    result.applied = std::move(cand);
                    return result;
                }
            }
        }
    }
    result.status = any ? RepairStatus::Unfixable : RepairStatus::NoCandidates;
    return result;
}

DocumentRepair repair_document(const SourceDocument& doc, const PackageDb& db,
                               const std::vector<SuggestionProvider*>& providers, std::size_t max_rounds)
{
    RepairOptions options;
    options.max_rounds = max_rounds;
    return repair_document(doc, db, providers, options);
}

DocumentRepair repair_document(const SourceDocument& doc, const PackageDb& db,
                               const std::vector<SuggestionProvider*>& providers, const RepairOptions& options)
{
    DocumentRepair out;
    out.document = doc;
    std::set<std::string> given_up;
    auto key = [&](const Diagnostic& d, const SourceDocument& cur) {
        return std::string(d.category ? to_string(*d.category) : "none") + "|" + d.cause + "|" + d.token + "|" +
               std::string(cur.slice(d.span));
    };
    auto diagnose_now = [&](const Ast& ast, std::size_t round) {
        return options.diagnose ? options.diagnose(out.document, ast, round) : proxy_diagnose(out.document, ast, db);
    };
    for (std::size_t round = 0; round < options.max_rounds; ++round) {
        Ast ast = parse(out.document);
        auto diags = diagnose_now(ast, round);
        // broken structure first: stray & and friends are often its echo
        const Diagnostic* next = nullptr;
        for (bool structure : {true, false}) {
            for (const auto& d : diags)
                if (d.classified() && structural_cause(d.cause) == structure && !given_up.count(key(d, out.document))) {
                    next = &d;
                    break;
                }
            if (next) break;
        }
        if (!next) {
            out.remaining = diags;
            return out;
        }
        RepairResult r = repair(*next, out.document, ast, db, providers);
        bool take = r.status == RepairStatus::Fixed && (!options.accept || options.accept(*next, r, out.document));
        if (take) out.document = apply_patch(out.document, r.applied->patch);
        else given_up.insert(key(*next, out.document));
        out.fixes.push_back({*next, std::move(r)});
    }
    Ast ast = parse(out.document);
    out.remaining = diagnose_now(ast, options.max_rounds);
    return out;
}

}  // namespace texrepair
