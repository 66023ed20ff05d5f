#include "texrepair/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <mutex>
#include <thread>

#include "texrepair/checker.hpp"
#include "texrepair/encoding.hpp"
#include "texrepair/engine.hpp"
#include "texrepair/parser.hpp"
#include "texrepair/text_util.hpp"

namespace texrepair {

namespace fs = std::filesystem;

std::string_view to_string(CompileMode m)
{
    return m == CompileMode::Engine ? "engine" : "proxy";
}

namespace {

/// A candidate mutation: replace `span` of the seed, and where the error should be found.
struct Mutation {
    std::string rule;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string replacement;
    /// Offset in the *broken* document on the truth line.
    std::function<std::size_t(const SourceDocument& broken)> truth;
};

std::size_t at(std::size_t offset)
{
    return offset;
}

struct Walked {
    const AstNode* node;
    NodePath path;
};

std::vector<Walked> all_nodes(const Ast& ast)
{
    std::vector<Walked> out;
    walk(ast.root, [&](const AstNode& n, const NodePath& p) {
        out.push_back({&n, p});
        return true;
    });
    return out;
}

bool in_body(const Ast& ast, const AstNode& n)
{
    return ast.document_begin && n.span.start > *ast.document_begin;
}

bool inside_math(const NodePath& p)
{
    return std::any_of(p.begin(), p.end(), [](const AstNode* n) { return n->is_math(); });
}

bool inside(const NodePath& p, std::initializer_list<std::string_view> envs)
{
    for (const AstNode* n : p)
        if (n->kind == NodeKind::Environment && std::find(envs.begin(), envs.end(), n->name) != envs.end()) return true;
    return false;
}

/// Whole line (with newline) when the node is alone on it.
std::optional<std::pair<std::size_t, std::size_t>> own_line(const SourceDocument& doc, const Span& s)
{
    std::size_t line = doc.line_of(s.start);
    std::size_t ls = doc.line_start(line), le = doc.line_end(line);
    if (doc.line_of(s.end == 0 ? 0 : s.end - 1) != line) return std::nullopt;
    if (!trim(doc.text().substr(ls, s.start - ls)).empty()) return std::nullopt;
    std::string rest = doc.text().substr(s.end, le - s.end);
    auto pct = rest.find('%');
    if (!trim(pct == std::string::npos ? rest : rest.substr(0, pct)).empty()) return std::nullopt;
    return std::make_pair(ls, line < doc.line_count() ? doc.line_start(line + 1) : doc.size());
}

/// A spelling slip that keeps the name alphabetic: drop, double, swap or replace a letter.
std::string misspell(const std::string& word, std::mt19937_64& rng)
{
    static const std::string keys = "qwertyuiopasdfghjklzxcvbnm";
    std::string w = word;
    if (w.size() < 2) return w + "x";
    std::size_t i = 1 + rng() % (w.size() - 1);
    switch (rng() % 4) {
    case 0: w.erase(i, 1); break;
    case 1: w.insert(i, 1, w[i]); break;
    case 2: std::swap(w[i - 1], w[i]); break;
    default: {
        char c = keys[rng() % keys.size()];
        if (c == w[i]) c = c == 'z' ? 'q' : static_cast<char>(c + 1);
        w[i] = c;
    }
    }
    return w;
}

bool alpha_word(const std::string& s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
}

const std::set<std::string, std::less<>> kStructuralCommands = {
    "begin", "end", "item", "usepackage", "RequirePackage", "documentclass", "newcommand", "renewcommand",
    "providecommand", "newenvironment", "newtheorem", "label", "ref", "cite", "maketitle", "centering",
    "DeclareMathOperator", "bibitem", "caption", "input", "include", "verb", "hline", "par",
};

class Injector {
public:
    Injector(const SourceDocument& seed, const Ast& ast, const PackageDb& db, std::mt19937_64& rng)
        : doc_(seed), s_(seed.text()), ast_(ast), db_(db), syms_(ast, db), nodes_(all_nodes(ast)), rng_(rng)
    {
    }

    std::vector<Mutation> candidates(ErrorCategory c)
    {
        switch (c) {
        case ErrorCategory::UndefinedControl: return undefined_control();
        case ErrorCategory::MathMode: return math_mode();
        case ErrorCategory::PackageConflict: return package_conflict();
        case ErrorCategory::TableFigure: return table_figure();
        case ErrorCategory::ReferenceError: return reference();
        case ErrorCategory::EncodingFont: return encoding();
        }
        return {};
    }

private:
    const SourceDocument& doc_;
    const std::string& s_;
    const Ast& ast_;
    const PackageDb& db_;
    DocSymbols syms_;
    std::vector<Walked> nodes_;
    std::mt19937_64& rng_;

    static Mutation replace(std::string rule, std::size_t a, std::size_t b, std::string text)
    {
        Mutation m;
        m.rule = std::move(rule);
        m.start = a;
        m.end = b;
        m.replacement = std::move(text);
        m.truth = [a](const SourceDocument&) { return at(a); };
        return m;
    }

    bool known_anywhere(const std::string& name) const
    {
        if (syms_.command_known(name) || ast_.defines_macro(name)) return true;
        return !db_.provider_of(SymbolKind::Command, name).empty() || db_.is_kernel(SymbolKind::Command, name);
    }

    std::vector<Mutation> undefined_control()
    {
        std::vector<Mutation> out;
        for (const auto& w : nodes_) {
            const AstNode& n = *w.node;
            if (n.kind != NodeKind::Command || !in_body(ast_, n) || n.name.size() < 3 || !alpha_word(n.name)) continue;
            if (kStructuralCommands.count(n.name) || !syms_.command_known(n.name)) continue;
            if (s_.compare(n.span.start, n.name.size() + 1, "\\" + n.name) != 0) continue;
            std::string typo;
            for (int tries = 0; tries < 8; ++tries) {
                typo = misspell(n.name, rng_);
                if (alpha_word(typo) && !known_anywhere(typo)) break;
                typo.clear();
            }
            if (typo.empty()) continue;
            out.push_back(replace("rename-command", n.span.start + 1, n.span.start + 1 + n.name.size(), typo));
        }
        // a local macro whose definition disappears
        for (const auto& m : ast_.macros) {
            auto line = own_line(doc_, m.span);
            if (!line) continue;
            std::size_t use = find_use(m.name, line->second);
            if (use == std::string::npos) continue;
            Mutation mu = replace("delete-newcommand", line->first, line->second, "");
            std::size_t removed = line->second - line->first;
            mu.truth = [use, removed](const SourceDocument&) { return use - removed; };
            out.push_back(std::move(mu));
        }
        return out;
    }

    /// First use of \name as a command after `from`.
    std::size_t find_use(const std::string& name, std::size_t from) const
    {
        for (const auto& w : nodes_)
            if (w.node->kind == NodeKind::Command && w.node->name == name && w.node->span.start >= from)
                return w.node->span.start;
        return std::string::npos;
    }

    std::vector<Mutation> math_mode()
    {
        std::vector<Mutation> out;
        for (const auto& w : nodes_) {
            const AstNode& n = *w.node;
            if (!in_body(ast_, n)) continue;
            if (n.kind == NodeKind::MathInline && s_[n.span.start] == '$' && s_[n.span.start + 1] != '$' &&
                n.span.size() >= 3 && s_[n.span.end - 1] == '$' && doc_.line_of(n.span.start) == doc_.line_of(n.span.end - 1)) {
                if (rng_() % 2) out.push_back(replace("delete-open-dollar", n.span.start, n.span.start + 1, ""));
                else out.push_back(replace("delete-close-dollar", n.span.end - 1, n.span.end, ""));
            }
            if (n.kind != NodeKind::Environment || !n.tail) continue;
            static const std::map<std::string, std::string> swaps = {
                {"align", "aligned"}, {"align*", "aligned"}, {"gather", "gathered"}, {"gather*", "gathered"},
                {"equation", "equation*"}, {"multline", "multlined"},
            };
            if (auto it = swaps.find(n.name); it != swaps.end()) {
                std::size_t i = std::string_view(doc_.slice(*n.tail)).find("{" + n.name + "}");
                if (i != std::string_view::npos)
                    out.push_back(replace("swap-end", n.tail->start + i + 1, n.tail->start + i + 1 + n.name.size(),
                                          it->second));
            }
            if (auto m = delete_end(n)) out.push_back(std::move(*m));
        }
        return out;
    }

public:
    std::optional<Mutation> delete_end(const AstNode& n)
    {
        static const std::set<std::string, std::less<>> lists = {"itemize", "enumerate", "description", "equation",
                                                                 "align", "align*", "gather", "proof", "quote"};
        bool theorem_like = ast_.defines_environment(n.name);
        if (!lists.count(n.name) && !theorem_like) return std::nullopt;
        auto line = own_line(doc_, *n.tail);
        if (!line) return std::nullopt;
        Mutation m = replace("delete-end", line->first, line->second, "");
        std::size_t head = n.head.start;
        m.truth = [head](const SourceDocument&) { return head; };
        return m;
    }

    std::vector<Mutation> unclosed_environments()
    {
        std::vector<Mutation> out;
        for (const auto& w : nodes_)
            if (w.node->kind == NodeKind::Environment && w.node->tail && in_body(ast_, *w.node))
                if (auto m = delete_end(*w.node)) out.push_back(std::move(*m));
        return out;
    }

private:
    const AstNode* decl_of(const std::string& pkg) const
    {
        for (const auto& w : nodes_)
            if (w.node->kind == NodeKind::PackageDecl &&
                std::find(w.node->keys.begin(), w.node->keys.end(), pkg) != w.node->keys.end())
                return w.node;
        return nullptr;
    }

    std::vector<Mutation> package_conflict()
    {
        std::vector<Mutation> out;
        // drop a package the body depends on
        for (const auto& p : ast_.packages) {
            const AstNode* decl = decl_of(p.name);
            if (!decl || decl->keys.size() != 1) continue;
            auto line = own_line(doc_, decl->span);
            if (!line) continue;
            const auto* rec = db_.find(p.name);
            if (!rec) continue;
            std::vector<std::string> others;
            for (const auto& q : ast_.packages)
                if (q.name != p.name) others.push_back(q.name);
            std::set<std::string> still = db_.closure(others);
            if (still.count(p.name)) continue;
            std::size_t use = std::string::npos;
            for (const auto& w : nodes_) {
                const AstNode& n = *w.node;
                if (!in_body(ast_, n)) continue;
                bool cmd = n.kind == NodeKind::Command && rec->provides_commands.count(n.name);
                bool env = n.kind == NodeKind::Environment && rec->provides_environments.count(n.name);
                if (!cmd && !env) continue;
                bool elsewhere = false;
                SymbolKind kind = cmd ? SymbolKind::Command : SymbolKind::Environment;
                if (db_.is_kernel(kind, n.name) || (cmd ? ast_.defines_macro(n.name) : ast_.defines_environment(n.name)))
                    elsewhere = true;
                for (const auto& o : still) {
                    const auto* r = db_.find(o);
                    if (r && (cmd ? r->provides_commands.count(n.name) : r->provides_environments.count(n.name)))
                        elsewhere = true;
                }
                if (elsewhere) continue;
                use = n.span.start;
                break;
            }
            if (use == std::string::npos) continue;
            Mutation m = replace("delete-usepackage", line->first, line->second, "");
            std::size_t removed = line->second - line->first;
            m.truth = [use, removed](const SourceDocument&) { return use - removed; };
            out.push_back(std::move(m));
        }
        // load a package the db says clashes with one already present
        for (const auto& rule : db_.conflicts()) {
            if (rule.kind != ConflictKind::Incompatible || !rule.remove) continue;
            const std::string& drop = *rule.remove;
            const std::string& keep = drop == rule.a ? rule.b : rule.a;
            if (!ast_.loads(keep) || ast_.loads(drop)) continue;
            const AstNode* decl = decl_of(keep);
            if (!decl) continue;
            auto line = own_line(doc_, decl->span);
            if (!line) continue;
            out.push_back(replace("insert-conflict", line->second, line->second, "\\usepackage{" + drop + "}\n"));
        }
        // load two order-sensitive packages the wrong way round
        for (const auto& rule : db_.conflicts()) {
            if (rule.kind != ConflictKind::OrderSensitive) continue;
            const std::string& first = rule.a_before_b ? rule.a : rule.b;
            const std::string& second = rule.a_before_b ? rule.b : rule.a;
            const AstNode* d1 = decl_of(first);
            const AstNode* d2 = decl_of(second);
            if (!d1 || !d2 || d1->keys.size() != 1 || d2->keys.size() != 1 || d1->span.start > d2->span.start) continue;
            auto l1 = own_line(doc_, d1->span);
            auto l2 = own_line(doc_, d2->span);
            if (!l1 || !l2) continue;
            std::string moved = s_.substr(l1->first, l1->second - l1->first);
            std::string between = s_.substr(l1->second, l2->second - l1->second);
            Mutation m = replace("swap-order", l1->first, l2->second, between + moved);
            std::size_t new_pos = l1->first + between.size();
            m.truth = [new_pos](const SourceDocument&) { return new_pos; };
            out.push_back(std::move(m));
        }
        return out;
    }

    std::vector<Mutation> table_figure()
    {
        std::vector<Mutation> out;
        for (const auto& w : nodes_) {
            const AstNode& n = *w.node;
            if (n.kind != NodeKind::Environment || !n.tail || (n.name != "tabular" && n.name != "tabular*")) continue;
            // a cell too many in some row
            std::size_t body = n.head.end, stop = n.tail->start;
            for (std::size_t i = s_.find("\\\\", body); i != std::string::npos && i < stop; i = s_.find("\\\\", i + 2)) {
                std::size_t ls = doc_.line_start(doc_.line_of(i));
                if (ls < body) continue;
                std::string_view row(s_.data() + ls, i - ls);
                if (row.find('&') == std::string_view::npos || row.find("\\multicolumn") != std::string_view::npos) continue;
                std::size_t pos = i;
                while (pos > ls && s_[pos - 1] == ' ') --pos;
                out.push_back(replace("extra-cell", pos, pos, " & extra"));
            }
            // an illegal column type
            const AstNode* spec = nullptr;
            for (const auto& a : n.args)
                if (!a.optional) spec = &a;
            if (!spec) continue;
            std::vector<std::size_t> letters;
            int depth = 0;
            for (std::size_t i = spec->span.start + 1; i + 1 < spec->span.end; ++i) {
                char c = s_[i];
                if (c == '{') ++depth;
                else if (c == '}') --depth;
                else if (depth == 0 && (c == 'l' || c == 'c' || c == 'r')) letters.push_back(i);
            }
            if (letters.empty()) continue;
            std::size_t i = letters[rng_() % letters.size()];
            static const char bad[] = {'q', 'y', 'k', 'z'};
            out.push_back(replace("corrupt-colspec", i, i + 1, std::string(1, bad[rng_() % 4])));
        }
        return out;
    }

    std::vector<Mutation> reference()
    {
        std::vector<Mutation> out;
        DefinedKeys keys = defined_keys(doc_, ast_, ProxyOptions{false});
        for (const auto& w : nodes_) {
            const AstNode& n = *w.node;
            bool cite = n.kind == NodeKind::CiteRef;
            bool ref = n.kind == NodeKind::LabelRef && n.macro != "label";
            if ((!cite && !ref) || n.keys.size() != 1 || !in_body(ast_, n)) continue;
            const std::string& key = n.keys[0];
            if (key.size() < 3) continue;
            std::size_t i = std::string_view(doc_.slice(n.span)).rfind("{" + key + "}");
            if (i == std::string_view::npos) continue;
            const auto& pool = cite ? keys.citations : keys.labels;
            if (!pool.count(key)) continue;
            std::string typo;
            for (int tries = 0; tries < 8; ++tries) {
                typo = misspell(key, rng_);
                if (typo != key && !pool.count(typo) && typo.find_first_of("{},% \\") == std::string::npos) break;
                typo.clear();
            }
            if (typo.empty()) continue;
            std::size_t a = n.span.start + i + 1;
            out.push_back(replace(cite ? "corrupt-cite" : "corrupt-ref", a, a + key.size(), typo));
        }
        return out;
    }

    std::vector<Mutation> encoding()
    {
        std::vector<Mutation> out;
        // characters pdfLaTeX cannot set without help, each with a known spelling
        static const char32_t glyphs[] = {0x2264, 0x2192, 0x03B1, 0x20AC, 0x00B1, 0x2022, 0x00D7, 0x2026, 0x0151};
        std::vector<char32_t> usable;
        for (char32_t cp : glyphs) {
            GlyphSupport g = glyph_support(cp);
            bool fails = g == GlyphSupport::Unsupported || (g == GlyphSupport::NeedsT1 && !ast_.loads("fontenc"));
            if (fails && latex_escape(cp, false)) usable.push_back(cp);
        }
        std::vector<std::size_t> spots;
        for (const auto& w : nodes_) {
            const AstNode& n = *w.node;
            if (n.kind != NodeKind::Text || !in_body(ast_, n) || inside_math(w.path)) continue;
            if (inside(w.path, {"tabular", "verbatim", "lstlisting", "tikzpicture", "algorithm", "thebibliography"}))
                continue;
            for (std::size_t i = n.span.start + 1; i + 1 < n.span.end; ++i)
                if (s_[i] == ' ' && std::isalpha(static_cast<unsigned char>(s_[i + 1])) &&
                    std::isalpha(static_cast<unsigned char>(s_[i - 1])))
                    spots.push_back(i + 1);
        }
        if (!spots.empty() && !usable.empty()) {
            for (int k = 0; k < 3; ++k) {
                std::size_t pos = spots[rng_() % spots.size()];
                char32_t cp = usable[rng_() % usable.size()];
                out.push_back(replace("insert-glyph", pos, pos, encode_utf8(cp) + " "));
            }
            std::size_t pos = spots[rng_() % spots.size()];
            static const char latin1[] = {'\xE9', '\xE8', '\xFC', '\xF6', '\xE7'};
            out.push_back(replace("insert-latin1-byte", pos, pos, std::string(1, latin1[rng_() % 5]) + " "));
        }
        if (const AstNode* decl = decl_of("fontenc"); decl && decl->options && decl->keys.size() == 1) {
            std::size_t i = std::string_view(doc_.slice(decl->span)).find("[" + *decl->options + "]");
            if (i != std::string_view::npos) {
                static const char* bad[] = {"TI", "T11", "Tl", "1T"};
                std::size_t a = decl->span.start + i + 1;
                out.push_back(replace("corrupt-fontenc", a, a + decl->options->size(), bad[rng_() % 4]));
            }
        }
        return out;
    }
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
    // splitmix64 step; enough to decorrelate neighbouring seeds
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

BenchCase realise(const SourceDocument& seed, ErrorCategory category, std::uint64_t rng_seed,
                  std::vector<Mutation> options, std::mt19937_64& rng, const PackageDb& db)
{
    if (options.empty())
        throw NotInjectable("seed has nothing to mutate for " + std::string(to_string(category)));
    std::size_t first = rng() % options.size();
    for (std::size_t k = 0; k < options.size(); ++k) {
        const Mutation& m = options[(first + k) % options.size()];
        Patch p;
        p.edits.push_back({seed.make_span(m.start, m.end), m.replacement});
        p.description = m.rule;
        SourceDocument broken = apply_patch(seed, p);
        Ast ast = parse(broken);
        LogReport log = proxy_compile(broken, ast, db);
        bool fails = std::any_of(log.records.begin(), log.records.end(),
                                 [](const LogRecord& r) { return r.severity == Severity::Error || r.pattern == LogPattern::CitationUndefined || r.pattern == LogPattern::ReferenceUndefined; });
        if (!fails) continue;
        BenchCase c;
        c.seed_doc = seed;
        c.broken_doc = broken;
        c.category = category;
        c.injection_span = broken.make_span(m.start, m.start + m.replacement.size());
        c.truth_line = broken.line_of(std::min(m.truth(broken), broken.size()));
        c.injection_rule = m.rule;
        c.rng_seed = rng_seed;
        return c;
    }
    throw NotInjectable("no mutation for " + std::string(to_string(category)) + " breaks this seed");
}

}  // namespace

BenchCase inject(const SourceDocument& seed, ErrorCategory category, std::uint64_t rng_seed, const PackageDb& db)
{
    Ast ast = parse(seed);
    if (ast.recovery_count != 0) throw NotInjectable("seed does not parse cleanly");
    std::mt19937_64 rng(mix(rng_seed, static_cast<std::uint64_t>(category)));
    Injector inj(seed, ast, db, rng);
    return realise(seed, category, rng_seed, inj.candidates(category), rng, db);
}

BenchCase inject_unclosed_environment(const SourceDocument& seed, std::uint64_t rng_seed, const PackageDb& db)
{
    Ast ast = parse(seed);
    if (ast.recovery_count != 0) throw NotInjectable("seed does not parse cleanly");
    std::mt19937_64 rng(mix(rng_seed, 99));
    Injector inj(seed, ast, db, rng);
    return realise(seed, ErrorCategory::MathMode, rng_seed, inj.unclosed_environments(), rng, db);
}

std::map<ErrorCategory, std::size_t> default_distribution(std::size_t total)
{
    static const std::size_t table[] = {112, 98, 74, 86, 79, 51};
    const std::size_t sum = 500;
    std::map<ErrorCategory, std::size_t> out;
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder, -index) ordering below
    std::size_t given = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        std::size_t exact = table[i] * total;
        out[kAllCategories[i]] = exact / sum;
        given += exact / sum;
        remainders.emplace_back(exact % sum, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t k = 0; given < total; ++k, ++given) out[kAllCategories[remainders[k % 6].second]]++;
    return out;
}

std::vector<std::string> corpus_seeds(const std::string& corpus_dir)
{
    fs::path dir = corpus_dir;
    if (fs::is_directory(dir / "seeds")) dir /= "seeds";
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".tex") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<BenchCase> build_suite(const std::string& corpus_dir, const std::map<ErrorCategory, std::size_t>& counts,
                                   std::uint64_t rng_seed, const PackageDb& db)
{
    std::size_t wanted = 0;
    for (const auto& [_, n] : counts) wanted += n;
    if (wanted == 0) return {};
    auto files = corpus_seeds(corpus_dir);
    if (files.empty()) throw InsufficientCorpus("no .tex seeds under " + corpus_dir);

    std::vector<SourceDocument> seeds;
    std::vector<std::string> names;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        seeds.emplace_back(ss.str(), f);
        names.push_back(fs::path(f).stem().string());
    }

    std::vector<BenchCase> suite;
    for (ErrorCategory cat : kAllCategories) {
        auto it = counts.find(cat);
        if (it == counts.end()) continue;
        std::set<std::size_t> dead;  // seeds that cannot host this category
        for (std::size_t i = 0; i < it->second; ++i) {
            std::uint64_t case_seed = mix(mix(rng_seed, static_cast<std::uint64_t>(cat) + 1), i);
            std::size_t start = case_seed % seeds.size();
            bool made = false;
            for (std::size_t k = 0; k < seeds.size() && !made; ++k) {
                std::size_t s = (start + k) % seeds.size();
                if (dead.count(s)) continue;
                try {
                    BenchCase c = inject(seeds[s], cat, case_seed, db);
                    std::ostringstream id;
                    id << to_string(cat) << "-" << std::setw(3) << std::setfill('0') << i << "-" << names[s];
                    c.id = id.str();
                    c.seed_name = names[s];
                    suite.push_back(std::move(c));
                    made = true;
                } catch (const NotInjectable&) {
                    dead.insert(s);
                }
            }
            if (!made)
                throw InsufficientCorpus("no seed in " + corpus_dir + " can host a " + std::string(to_string(cat)) +
                                         " error");
        }
    }
    return suite;
}

namespace {

bool span_on_line(const SourceDocument& doc, const Span& s, std::size_t line)
{
    std::size_t first = doc.line_of(s.start);
    std::size_t last = doc.line_of(s.end > s.start ? s.end - 1 : s.start);
    return first <= line && line <= last;
}

void flatten(const AstNode& n, std::vector<std::string>& out, std::multiset<std::string>& packages)
{
    if (n.kind == NodeKind::PackageDecl) {
        for (const auto& k : n.keys) packages.insert(k + "[" + n.options.value_or("") + "]");
        return;
    }
    if (n.kind != NodeKind::Text && n.kind != NodeKind::Comment && n.kind != NodeKind::Root && n.kind != NodeKind::Group)
        out.push_back(std::string(to_string(n.kind)) + ":" + n.name);
    for (const AstNode* c : n.subnodes()) flatten(*c, out, packages);
}

std::size_t sequence_distance(const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t cap)
{
    // trim the common ends first; the middle is small for local edits
    std::size_t p = 0;
    while (p < a.size() && p < b.size() && a[p] == b[p]) ++p;
    std::size_t q = 0;
    while (q < a.size() - p && q < b.size() - p && a[a.size() - 1 - q] == b[b.size() - 1 - q]) ++q;
    std::size_t n = a.size() - p - q, m = b.size() - p - q;
    if (std::max(n, m) > 4 * cap + 8) return cap + 1;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[p + i - 1] == b[p + j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[m];
}

/// The repaired document stays close to the seed: at most two structural
/// changes (the loaded packages count as a set, their order is not content)
/// and a body byte difference confined to a few lines.
bool confined(const SourceDocument& seed, const SourceDocument& fixed)
{
    Ast a = parse(seed), b = parse(fixed);
    std::vector<std::string> fa, fb;
    std::multiset<std::string> pa, pb;
    flatten(a.root, fa, pa);
    flatten(b.root, fb, pb);
    std::vector<std::string> only;
    std::set_symmetric_difference(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(only));
    if (only.size() + sequence_distance(fa, fb, 2) > 2) return false;
    std::string x = seed.text().substr(std::min(a.document_begin.value_or(0), seed.size()));
    std::string y = fixed.text().substr(std::min(b.document_begin.value_or(0), fixed.size()));
    std::size_t p = 0;
    while (p < x.size() && p < y.size() && x[p] == y[p]) ++p;
    std::size_t q = 0;
    while (q < x.size() - p && q < y.size() - p && x[x.size() - 1 - q] == y[y.size() - 1 - q]) ++q;
    auto lines = [](const std::string& t, std::size_t from, std::size_t to) {
        return static_cast<std::size_t>(std::count(t.begin() + from, t.begin() + to, '\n'));
    };
    return lines(x, p, x.size() - q) <= 12 && lines(y, p, y.size() - q) <= 12;
}

bool compiles(const SourceDocument& doc, const EvalConfig& config, const PackageDb& db, bool& timed_out)
{
    if (config.mode == CompileMode::Engine) {
        EngineRun run = run_engine(config.engine_path, doc, config.timeout_seconds);
        timed_out = timed_out || run.timed_out;
        return run.started && !run.timed_out && run.log.clean;
    }
    Ast ast = parse(doc);
    LogReport log = proxy_compile(doc, ast, db);
    bool errors = std::any_of(log.records.begin(), log.records.end(), [](const LogRecord& r) {
        return r.severity == Severity::Error || r.pattern == LogPattern::CitationUndefined ||
               r.pattern == LogPattern::ReferenceUndefined;
    });
    return ast.recovery_count == 0 && !errors;
}

}  // namespace

CaseResult evaluate_case(const BenchCase& c, const EvalConfig& config, const PackageDb& db)
{
    auto t0 = std::chrono::steady_clock::now();
    CaseResult r;
    r.case_id = c.id;
    r.category = c.category;
    r.injection_rule = c.injection_rule;

    Ast ast = parse(c.broken_doc);
    LogReport log;
    if (config.mode == CompileMode::Engine) {
        EngineRun run = run_engine(config.engine_path, c.broken_doc, config.timeout_seconds);
        if (run.timed_out) {
            r.timed_out = true;
            r.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
            return r;
        }
        log = run.log;
    } else {
        log = proxy_compile(c.broken_doc, ast, db);
    }
    auto diags = diagnose(c.broken_doc, ast, log, db);
    r.detected = !diags.empty();

    const Diagnostic* primary = nullptr;
    for (const auto& d : diags) {
        if (d.category != c.category) continue;
        r.type_match = true;
        if (!primary) primary = &d;
        if (span_on_line(c.broken_doc, d.span, c.truth_line)) {
            r.loc_match = true;
            primary = &d;
            break;
        }
    }
    if (!primary && !diags.empty()) primary = &diags.front();

    if (primary) {
        RuleProvider rules;
        std::vector<SuggestionProvider*> providers = config.providers;
        if (providers.empty()) providers.push_back(&rules);
        r.fix_attempted = true;
        RepairResult rep = repair(*primary, c.broken_doc, ast, db, providers);
        r.attempts = rep.attempts;
        r.fix_valid = rep.status == RepairStatus::Fixed;
        r.regenerated = r.fix_valid && !rep.validation_log.empty() && rep.validation_log.front().attempt == 1 &&
                        rep.validation_log.front().validation.reason == InvalidReason::ParseRegression &&
                        rep.validation_log.back().attempt > 1;
        if (r.fix_valid) {
            // mop up what the first fix leaves behind, then judge the whole document
            SourceDocument fixed = apply_patch(c.broken_doc, rep.applied->patch);
            DocumentRepair rest = repair_document(fixed, db, providers, 10);
            bool timed_out = false;
            r.fix_compiles = compiles(rest.document, config, db, timed_out) && confined(c.seed_doc, rest.document);
            r.timed_out = timed_out;
        } else {
            r.fix_compiles = false;
        }
    }
    r.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<CaseResult> run_suite(const std::vector<BenchCase>& suite, const EvalConfig& config, const PackageDb& db,
                                  unsigned jobs)
{
    std::vector<CaseResult> out(suite.size());
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, suite.size())));
    std::atomic<std::size_t> next{0};
    std::mutex failed_mu;
    std::exception_ptr failed;
    auto work = [&] {
        try {
            for (std::size_t i = next++; i < suite.size(); i = next++) out[i] = evaluate_case(suite[i], config, db);
        } catch (...) {
            std::lock_guard lock(failed_mu);
            if (!failed) failed = std::current_exception();
            next = suite.size();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failed) std::rethrow_exception(failed);
    return out;
}

namespace {

std::optional<double> percent(std::size_t hits, std::size_t n)
{
    if (n == 0) return std::nullopt;
    return std::round(1000.0 * static_cast<double>(hits) / static_cast<double>(n)) / 10.0;
}

void finish(Metrics& m)
{
    m.da = percent(m.da_hits, m.n);
    m.fa = percent(m.fa_hits, m.n);
}

std::string cell(const std::optional<double>& v)
{
    if (!v) return "---";
    std::ostringstream o;
    o << std::fixed << std::setprecision(1) << *v;
    return o.str();
}

const char* short_name(ErrorCategory c)
{
    switch (c) {
    case ErrorCategory::UndefinedControl: return "Undef. ctrl.";
    case ErrorCategory::MathMode: return "Math mode";
    case ErrorCategory::PackageConflict: return "Pkg.";
    case ErrorCategory::TableFigure: return "Table/fig.";
    case ErrorCategory::ReferenceError: return "Refs.";
    case ErrorCategory::EncodingFont: return "Enc./font";
    }
    return "?";
}

nlohmann::json metrics_json(const Metrics& m)
{
    nlohmann::json j;
    j["n"] = m.n;
    j["da_hits"] = m.da_hits;
    j["fa_hits"] = m.fa_hits;
    j["da"] = m.da ? nlohmann::json(*m.da) : nlohmann::json(nullptr);
    j["fa"] = m.fa ? nlohmann::json(*m.fa) : nlohmann::json(nullptr);
    return j;
}

Metrics metrics_from(const nlohmann::json& j)
{
    Metrics m;
    m.n = j.at("n").get<std::size_t>();
    m.da_hits = j.at("da_hits").get<std::size_t>();
    m.fa_hits = j.at("fa_hits").get<std::size_t>();
    if (!j.at("da").is_null()) m.da = j.at("da").get<double>();
    if (!j.at("fa").is_null()) m.fa = j.at("fa").get<double>();
    return m;
}

}  // namespace

BenchReport score(const std::vector<CaseResult>& results, std::map<std::string, std::string> config)
{
    BenchReport rep;
    rep.config = std::move(config);
    for (ErrorCategory c : kAllCategories) rep.per_category[c];
    for (const auto& r : results) {
        for (Metrics* m : {&rep.per_category[r.category], &rep.overall}) {
            ++m->n;
            m->da_hits += r.type_match && r.loc_match;
            m->fa_hits += r.fix_success();
        }
    }
    for (auto& [_, m] : rep.per_category) finish(m);
    finish(rep.overall);
    return rep;
}

std::string emit_report(const BenchReport& report, ReportFormat format, const std::vector<BaselineRow>& baselines,
                        const std::string& system_name)
{
    std::ostringstream out;
    if (format == ReportFormat::Json) {
        nlohmann::json j;
        j["version"] = 1;
        j["config"] = report.config;
        j["overall"] = metrics_json(report.overall);
        nlohmann::json cats = nlohmann::json::array();
        for (ErrorCategory c : kAllCategories) {
            auto it = report.per_category.find(c);
            nlohmann::json row = metrics_json(it == report.per_category.end() ? Metrics{} : it->second);
            row["category"] = std::string(to_string(c));
            cats.push_back(row);
        }
        j["categories"] = cats;
        out << j.dump(2) << "\n";
        return out.str();
    }
    auto metrics_of = [](const BenchReport& r, ErrorCategory c) {
        auto it = r.per_category.find(c);
        return it == r.per_category.end() ? Metrics{} : it->second;
    };
    if (format == ReportFormat::Csv) {
        out << "category,n,da,fa\n";
        out << "Overall," << report.overall.n << "," << cell(report.overall.da) << "," << cell(report.overall.fa) << "\n";
        for (ErrorCategory c : kAllCategories) {
            Metrics m = metrics_of(report, c);
            out << to_string(c) << "," << m.n << "," << cell(m.da) << "," << cell(m.fa) << "\n";
        }
        return out.str();
    }

    std::vector<std::pair<std::string, const BenchReport*>> rows;
    for (const auto& b : baselines) rows.emplace_back(b.system, &b.report);
    rows.emplace_back(system_name, &report);
    std::size_t first = 6;
    for (const auto& [name, _] : rows) first = std::max(first, name.size());
    const int w = 13;
    out << std::left << std::setw(static_cast<int>(first) + 2) << "";
    out << std::setw(w) << "Overall";
    for (ErrorCategory c : kAllCategories) out << std::setw(w) << short_name(c);
    out << "\n" << std::setw(static_cast<int>(first) + 2) << "System";
    for (int k = 0; k < 7; ++k) out << std::setw(6) << "DA" << std::setw(w - 6) << "FA";
    out << "\n";
    for (const auto& [name, r] : rows) {
        out << std::setw(static_cast<int>(first) + 2) << name;
        out << std::setw(6) << cell(r->overall.da) << std::setw(w - 6) << cell(r->overall.fa);
        for (ErrorCategory c : kAllCategories) {
            Metrics m = metrics_of(*r, c);
            out << std::setw(6) << cell(m.da) << std::setw(w - 6) << cell(m.fa);
        }
        out << "\n";
    }
    out << std::setw(static_cast<int>(first) + 2) << "n";
    out << std::setw(w) << report.overall.n;
    for (ErrorCategory c : kAllCategories) out << std::setw(w) << metrics_of(report, c).n;
    out << "\n";
    // trailing blanks from the fixed-width columns are noise
    std::string text = out.str(), trimmed;
    for (const auto& line : split(text, '\n')) {
        std::string l = line;
        while (!l.empty() && l.back() == ' ') l.pop_back();
        if (!l.empty()) trimmed += l + "\n";
    }
    return trimmed;
}

BenchReport parse_report_json(const std::string& json_text)
{
    auto j = nlohmann::json::parse(json_text);
    BenchReport r;
    r.config = j.at("config").get<std::map<std::string, std::string>>();
    r.overall = metrics_from(j.at("overall"));
    for (const auto& row : j.at("categories")) {
        auto c = category_from_string(row.at("category").get<std::string>());
        if (c) r.per_category[*c] = metrics_from(row);
    }
    return r;
}

}  // namespace texrepair
