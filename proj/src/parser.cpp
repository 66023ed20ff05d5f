#include "texrepair/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace texrepair {

namespace {

constexpr std::array kMathEnvironments = {
    "equation", "equation*", "align", "align*", "gather", "gather*", "multline", "multline*",
    "flalign", "flalign*", "alignat", "alignat*", "eqnarray", "eqnarray*", "displaymath", "math",
    "split", "aligned", "gathered", "alignedat", "cases", "dcases", "matrix", "pmatrix", "bmatrix",
    "Bmatrix", "vmatrix", "Vmatrix", "smallmatrix", "array", "subarray", "multlined",
};

constexpr std::array kVerbatimEnvironments = {
    "verbatim", "verbatim*", "Verbatim", "lstlisting", "minted", "comment", "filecontents", "filecontents*",
};

constexpr std::array kTextSwitchCommands = {
    "text", "textrm", "textbf", "textit", "textsf", "texttt", "textsc", "textup", "textnormal", "textsl",
    "emph", "mbox", "hbox", "fbox", "intertext", "shortintertext", "parbox", "makebox", "framebox",
};

constexpr std::array kNoArgCommands = {
    "left", "right", "big", "Big", "bigg", "Bigg", "bigl", "bigr", "Bigl", "Bigr", "biggl", "biggr",
    "Biggl", "Biggr", "middle", "item",
};

constexpr std::array kRawArgCommands = {"url", "path", "href", "nolinkurl"};

constexpr std::array kCiteCommands = {
    "cite", "citep", "citet", "citealp", "citealt", "citeauthor", "citeyear", "citeyearpar", "nocite",
    "parencite", "textcite", "autocite", "footcite", "fullcite", "Cite", "Citep", "Citet", "Parencite",
    "Textcite", "Autocite", "supercite", "smartcite",
};

constexpr std::array kRefCommands = {
    "label", "ref", "eqref", "pageref", "autoref", "cref", "Cref", "crefrange", "Crefrange", "nameref",
    "vref", "Vref", "cpageref", "Autoref",
};

constexpr std::array kDefiningCommands = {
    "newcommand", "renewcommand", "providecommand", "DeclareRobustCommand", "def", "gdef", "edef", "xdef",
    "let", "newlength", "newif", "DeclareMathOperator", "NewDocumentCommand", "RenewDocumentCommand",
    "ProvideDocumentCommand", "DeclareDocumentCommand", "newsavebox", "DeclarePairedDelimiter",
    "newtoks", "newcount", "newdimen", "newskip", "chardef", "mathchardef",
};

template <std::size_t N>
bool contains(const std::array<const char*, N>& set, std::string_view name)
{
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return name == s; });
}

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_keys(std::string_view raw)
{
    // Comments inside a key list end at the newline.
    std::string cleaned;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '%' && (i == 0 || raw[i - 1] != '\\')) {
            while (i < raw.size() && raw[i] != '\n') ++i;
            continue;
        }
        cleaned += raw[i];
    }
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= cleaned.size(); ++i) {
        if (i == cleaned.size() || cleaned[i] == ',') {
            auto k = trim(std::string_view(cleaned).substr(start, i - start));
            if (!k.empty()) out.push_back(std::move(k));
            start = i + 1;
        }
    }
    return out;
}

enum class FrameType { Root, Group, OptArg, Env, Dollar, DoubleDollar, Paren, Bracket };

struct Frame {
    FrameType type;
    std::string env;
    bool math = false;
};

struct BodyEnd {
    bool closed = false;
    std::string closer;
    ErrorKind error = ErrorKind::None;
};

class Parser {
public:
    explicit Parser(const SourceDocument& doc) : doc_(doc), src_(doc.text()), limit_(src_.size()) {}

    AstNode parse_root()
    {
        AstNode root;
        root.kind = NodeKind::Root;
        frames_.push_back({FrameType::Root, {}, false});
        parse_body(root);
        frames_.pop_back();
        // Anything left past a limit cannot happen at the root; the root always reaches EOF.
        root.span = doc_.make_span(0, src_.size());
        root.head = root.span;
        return root;
    }

private:
    const SourceDocument& doc_;
    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t limit_;
    std::vector<Frame> frames_;

    bool at_end() const { return pos_ >= limit_; }
    char peek(std::size_t ahead = 0) const { return pos_ + ahead < limit_ ? src_[pos_ + ahead] : '\0'; }
    bool in_math() const { return frames_.back().math; }

    static void add_literal(AstNode& node, std::string_view text)
    {
        if (text.empty()) return;
        if (!node.pieces.empty() && node.pieces.back().type == Piece::Type::Literal) {
            node.pieces.back().text += text;
        } else {
            node.pieces.push_back({Piece::Type::Literal, std::string(text), 0});
        }
    }

    static void add_child(AstNode& node, AstNode child)
    {
        node.pieces.push_back({Piece::Type::Child, {}, node.children.size()});
        node.children.push_back(std::move(child));
    }

    static void add_arg(AstNode& node, AstNode arg)
    {
        node.pieces.push_back({Piece::Type::Arg, {}, node.args.size()});
        node.args.push_back(std::move(arg));
    }

    AstNode leaf(NodeKind kind, std::size_t start, std::size_t end) const
    {
        AstNode n;
        n.kind = kind;
        n.span = doc_.make_span(start, end);
        n.head = n.span;
        add_literal(n, src_.substr(start, end - start));
        return n;
    }

    void flush_text(AstNode& parent, std::size_t& text_start)
    {
        if (text_start != std::string::npos && text_start < pos_) {
            auto t = leaf(NodeKind::Text, text_start, pos_);
            t.name.clear();
            add_child(parent, std::move(t));
        }
        text_start = std::string::npos;
    }

    bool frame_open(FrameType type) const
    {
        return std::any_of(frames_.begin(), frames_.end(), [&](const Frame& f) { return f.type == type; });
    }

    bool env_open(std::string_view name) const
    {
        return std::any_of(frames_.begin(), frames_.end(),
                           [&](const Frame& f) { return f.type == FrameType::Env && f.env == name; });
    }

    /// A `$`-delimited frame reachable without leaving the current math context.
    bool dollar_reachable() const
    {
        for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
            if (!it->math) return false;
            if (it->type == FrameType::Dollar || it->type == FrameType::DoubleDollar) return true;
        }
        return false;
    }

    bool paragraph_break_at(std::size_t p) const
    {
        if (p >= limit_ || src_[p] != '\n') return false;
        ++p;
        while (p < limit_ && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\r')) ++p;
        return p < limit_ && src_[p] == '\n';
    }

    /// `{name}` after `\begin`/`\end`, allowing intervening spaces.
    struct EnvName {
        std::string name;
        std::size_t brace = 0;
        std::size_t end = 0;
    };

    std::optional<EnvName> peek_env_name(std::size_t p) const
    {
        while (p < limit_ && (src_[p] == ' ' || src_[p] == '\t')) ++p;
        if (p >= limit_ || src_[p] != '{') return std::nullopt;
        std::size_t q = p + 1;
        while (q < limit_ && src_[q] != '}' && src_[q] != '{' && src_[q] != '\n' && src_[q] != '\\') ++q;
        if (q >= limit_ || src_[q] != '}') return std::nullopt;
        auto name = trim(src_.substr(p + 1, q - p - 1));
        if (name.empty()) return std::nullopt;
        return EnvName{name, p, q + 1};
    }

    std::string read_control_name(std::size_t p, std::size_t& end) const
    {
        // p points just past the backslash.
        if (p >= limit_) {
            end = p;
            return {};
        }
        if (is_letter(src_[p])) {
            std::size_t q = p;
            while (q < limit_ && is_letter(src_[q])) ++q;
            end = q;
            return std::string(src_.substr(p, q - p));
        }
        end = p + 1;
        return std::string(1, src_[p]);
    }

    BodyEnd parse_body(AstNode& node)
    {
        std::size_t text_start = std::string::npos;
        auto start_text = [&] {
            if (text_start == std::string::npos) text_start = pos_;
        };

        while (!at_end()) {
            const Frame& top = frames_.back();
            char c = src_[pos_];
            switch (c) {
            case '%': {
                flush_text(node, text_start);
                std::size_t e = pos_;
                while (e < limit_ && src_[e] != '\n') ++e;
                add_child(node, leaf(NodeKind::Comment, pos_, e));
                pos_ = e;
                continue;
            }
            case '{':
                flush_text(node, text_start);
                add_child(node, parse_group(false, in_math()));
                continue;
            case '}':
                flush_text(node, text_start);
                if (top.type == FrameType::Group) {
                    ++pos_;
                    return {true, "}", ErrorKind::None};
                }
                if (frame_open(FrameType::Group)) return {};
                {
                    auto err = leaf(NodeKind::Error, pos_, pos_ + 1);
                    err.error = ErrorKind::UnmatchedBrace;
                    err.name = "}";
                    ++pos_;
                    add_child(node, std::move(err));
                }
                continue;
            case ']':
                if (top.type == FrameType::OptArg) {
                    flush_text(node, text_start);
                    ++pos_;
                    return {true, "]", ErrorKind::None};
                }
                start_text();
                ++pos_;
                continue;
            case '$': {
                flush_text(node, text_start);
                bool two = peek(1) == '$';
                if (top.type == FrameType::Dollar) {
                    ++pos_;
                    return {true, "$", ErrorKind::None};
                }
                if (top.type == FrameType::DoubleDollar) {
                    if (two) {
                        pos_ += 2;
                        return {true, "$$", ErrorKind::None};
                    }
                    ++pos_;
                    return {true, "$", ErrorKind::DisplayMathMismatch};
                }
                if (in_math()) {
                    if (dollar_reachable()) return {};
                    auto err = leaf(NodeKind::Error, pos_, pos_ + (two ? 2 : 1));
                    err.error = ErrorKind::MathDelimiterMismatch;
                    err.name = two ? "$$" : "$";
                    pos_ += two ? 2 : 1;
                    add_child(node, std::move(err));
                    continue;
                }
                add_child(node, parse_math(two ? FrameType::DoubleDollar : FrameType::Dollar));
                continue;
            }
            case '\n':
                if ((top.type == FrameType::Dollar || top.type == FrameType::Paren ||
                     top.type == FrameType::DoubleDollar || top.type == FrameType::Bracket) &&
                    paragraph_break_at(pos_)) {
                    flush_text(node, text_start);
                    return {};
                }
                start_text();
                ++pos_;
                continue;
            case '\\': {
                std::size_t name_end = 0;
                std::string name = read_control_name(pos_ + 1, name_end);
                if (name.empty()) {
                    // Lone backslash at end of input.
                    start_text();
                    ++pos_;
                    continue;
                }
                if (name == "(" || name == "[") {
                    flush_text(node, text_start);
                    if (in_math()) {
                        auto err = leaf(NodeKind::Error, pos_, name_end);
                        err.error = ErrorKind::MathDelimiterMismatch;
                        err.name = "\\" + name;
                        pos_ = name_end;
                        add_child(node, std::move(err));
                    } else {
                        add_child(node, parse_math(name == "(" ? FrameType::Paren : FrameType::Bracket));
                    }
                    continue;
                }
                if (name == ")" || name == "]") {
                    flush_text(node, text_start);
                    FrameType want = name == ")" ? FrameType::Paren : FrameType::Bracket;
                    if (top.type == want) {
                        pos_ = name_end;
                        return {true, "\\" + name, ErrorKind::None};
                    }
                    if (frame_open(want)) return {};
                    auto err = leaf(NodeKind::Error, pos_, name_end);
                    err.error = ErrorKind::StrayMathClose;
                    err.name = "\\" + name;
                    pos_ = name_end;
                    add_child(node, std::move(err));
                    continue;
                }
                if (name == "end") {
                    flush_text(node, text_start);
                    auto env = peek_env_name(name_end);
                    if (!env) {
                        auto cmd = leaf(NodeKind::Command, pos_, name_end);
                        cmd.name = "end";
                        cmd.error = ErrorKind::MissingEnvironmentName;
                        pos_ = name_end;
                        add_child(node, std::move(cmd));
                        continue;
                    }
                    if (top.type == FrameType::Env && top.env == env->name) {
                        std::string closer(src_.substr(pos_, env->end - pos_));
                        pos_ = env->end;
                        return {true, closer, ErrorKind::None};
                    }
                    if (env_open(env->name)) return {};
                    auto err = leaf(NodeKind::Error, pos_, env->end);
                    err.error = ErrorKind::OrphanEnd;
                    err.name = env->name;
                    err.macro = "end";
                    pos_ = env->end;
                    add_child(node, std::move(err));
                    continue;
                }
                flush_text(node, text_start);
                if (name == "begin") {
                    add_child(node, parse_environment(name_end));
                } else if (name == "verb") {
                    add_child(node, parse_verb(name_end));
                } else {
                    add_child(node, parse_command(name, name_end));
                }
                continue;
            }
            default:
                start_text();
                ++pos_;
                continue;
            }
        }
        flush_text(node, text_start);
        return {};
    }

    AstNode parse_group(bool optional, bool math, bool raw = false)
    {
        AstNode g;
        g.kind = NodeKind::Group;
        g.optional = optional;
        std::size_t start = pos_;
        add_literal(g, optional ? "[" : "{");
        ++pos_;
        if (raw) {
            // Brace-balanced raw text; no comments or commands inside.
            std::size_t depth = 0, p = pos_;
            while (p < limit_) {
                if (src_[p] == '\\' && p + 1 < limit_) {
                    p += 2;
                    continue;
                }
                if (src_[p] == '{') ++depth;
                if (src_[p] == '}') {
                    if (depth == 0) break;
                    --depth;
                }
                ++p;
            }
            if (p > pos_) add_child(g, leaf(NodeKind::Text, pos_, p));
            pos_ = p;
            if (pos_ < limit_) {
                add_literal(g, "}");
                ++pos_;
            } else {
                g.error = ErrorKind::UnclosedGroup;
            }
        } else {
            frames_.push_back({optional ? FrameType::OptArg : FrameType::Group, {}, math});
            auto end = parse_body(g);
            frames_.pop_back();
            if (end.closed) {
                add_literal(g, end.closer);
            } else {
                g.error = ErrorKind::UnclosedGroup;
            }
        }
        g.span = doc_.make_span(start, pos_);
        g.head = g.span;
        return g;
    }

    AstNode parse_math(FrameType type)
    {
        std::size_t start = pos_;
        std::string opener = type == FrameType::Dollar         ? "$"
                             : type == FrameType::DoubleDollar ? "$$"
                             : type == FrameType::Paren        ? "\\("
                                                               : "\\[";
        bool inline_math = type == FrameType::Dollar || type == FrameType::Paren;
        auto build = [&](std::size_t body_limit) {
            AstNode m;
            m.kind = inline_math ? NodeKind::MathInline : NodeKind::MathDisplay;
            m.name = opener;
            add_literal(m, opener);
            pos_ = start + opener.size();
            std::size_t saved_limit = limit_;
            limit_ = std::min(limit_, body_limit);
            frames_.push_back({type, {}, true});
            auto end = parse_body(m);
            frames_.pop_back();
            limit_ = saved_limit;
            if (end.closed) {
                add_literal(m, end.closer);
                m.error = end.error;
            } else {
                m.error = ErrorKind::UnterminatedMath;
            }
            m.span = doc_.make_span(start, pos_);
            m.head = m.span;
            return m;
        };
        AstNode m = build(limit_);
        if (m.error == ErrorKind::UnterminatedMath && inline_math) {
            // Unterminated inline math is confined to the line it opened on.
            std::size_t line_end = doc_.line_end(doc_.line_of(start));
            if (pos_ > line_end) m = build(line_end);
        }
        return m;
    }

    AstNode parse_verb(std::size_t name_end)
    {
        std::size_t start = pos_;
        std::size_t p = name_end;
        if (p < limit_ && src_[p] == '*') ++p;
        AstNode v;
        v.kind = NodeKind::Command;
        v.name = "verb";
        if (p >= limit_ || src_[p] == '\n' || is_letter(src_[p]) || src_[p] == ' ') {
            v.error = ErrorKind::UnterminatedVerb;
            pos_ = p;
        } else {
            char delim = src_[p];
            std::size_t q = p + 1;
            while (q < limit_ && src_[q] != delim && src_[q] != '\n') ++q;
            if (q < limit_ && src_[q] == delim) {
                pos_ = q + 1;
            } else {
                v.error = ErrorKind::UnterminatedVerb;
                pos_ = q;
            }
        }
        add_literal(v, src_.substr(start, pos_ - start));
        v.span = doc_.make_span(start, pos_);
        v.head = v.span;
        return v;
    }

    static int env_arity(std::string_view env)
    {
        if (env == "tabular" || env == "array" || env == "thebibliography" || env == "alignat" ||
            env == "alignat*" || env == "alignedat" || env == "multicols" || env == "minipage" ||
            env == "longtable" || env == "subfigure" || env == "subtable" || env == "tabulary" ||
            env == "tabu" || env == "adjustbox" || env == "multicols*" || env == "supertabular")
            return 1;
        if (env == "tabularx" || env == "tabular*" || env == "wrapfigure" || env == "wraptable" ||
            env == "tabularray" || env == "tblr")
            return 2;
        return 0;
    }

    AstNode parse_environment(std::size_t name_end)
    {
        std::size_t start = pos_;
        auto env = peek_env_name(name_end);
        if (!env) {
            auto cmd = leaf(NodeKind::Command, pos_, name_end);
            cmd.name = "begin";
            cmd.error = ErrorKind::MissingEnvironmentName;
            pos_ = name_end;
            return cmd;
        }
        AstNode e;
        e.kind = NodeKind::Environment;
        e.name = env->name;
        e.math_env = is_math_environment(env->name);
        add_literal(e, src_.substr(start, env->brace - start));
        pos_ = env->brace;
        add_arg(e, parse_group(false, false, true));

        // Environment arguments: optional groups, then a fixed count of mandatory ones.
        int mandatory = env_arity(env->name);
        bool parent_math = in_math();
        while (!at_end()) {
            if (peek() == '[' && mandatory >= 0) {
                auto arg = parse_group(true, false);
                if (!e.options) e.options = render(arg).substr(1, arg.span.size() >= 2 ? arg.span.size() - 2 : 0);
                add_arg(e, std::move(arg));
            } else if (peek() == '{' && mandatory > 0) {
                add_arg(e, parse_group(false, false, true));
                --mandatory;
            } else {
                break;
            }
        }
        e.head = doc_.make_span(start, pos_);

        if (is_verbatim_environment(env->name)) {
            std::string closer = "\\end{" + env->name + "}";
            std::size_t found = src_.substr(0, limit_).find(closer, pos_);
            std::size_t body_end = found == std::string_view::npos ? limit_ : found;
            if (body_end > pos_) add_child(e, leaf(NodeKind::Text, pos_, body_end));
            pos_ = body_end;
            if (found != std::string_view::npos) {
                add_literal(e, closer);
                e.tail = doc_.make_span(pos_, pos_ + closer.size());
                pos_ += closer.size();
            } else {
                e.error = ErrorKind::UnclosedEnvironment;
            }
        } else {
            frames_.push_back({FrameType::Env, env->name, e.math_env || parent_math});
            std::size_t body_start = pos_;
            auto end = parse_body(e);
            frames_.pop_back();
            if (end.closed) {
                add_literal(e, end.closer);
                e.tail = doc_.make_span(pos_ - end.closer.size(), pos_);
            } else {
                e.error = ErrorKind::UnclosedEnvironment;
            }
            (void)body_start;
        }
        e.span = doc_.make_span(start, pos_);
        return e;
    }

    void capture_control_word_arg(AstNode& cmd)
    {
        if (peek() != '\\') return;
        std::size_t end = 0;
        std::string name = read_control_name(pos_ + 1, end);
        if (name.empty()) return;
        AstNode target = leaf(NodeKind::Command, pos_, end);
        target.name = name;
        pos_ = end;
        add_arg(cmd, std::move(target));
    }

    AstNode parse_command(const std::string& name, std::size_t name_end)
    {
        std::size_t start = pos_;
        AstNode cmd;
        cmd.kind = NodeKind::Command;
        cmd.name = name;
        pos_ = name_end;
        bool word = is_letter(name[0]);
        if ((word || name == "\\") && peek() == '*') {
            cmd.starred = true;
            ++pos_;
        }
        add_literal(cmd, src_.substr(start, pos_ - start));

        bool defining = contains(kDefiningCommands, name);
        if (defining) {
            capture_control_word_arg(cmd);
            if (name == "let") {
                std::size_t p = pos_;
                while (p < limit_ && (src_[p] == ' ' || src_[p] == '=')) ++p;
                if (p > pos_) {
                    auto t = leaf(NodeKind::Text, pos_, p);
                    pos_ = p;
                    add_arg(cmd, std::move(t));
                }
                if (peek() == '\\') {
                    capture_control_word_arg(cmd);
                } else if (!at_end() && peek() != '\n') {
                    add_arg(cmd, leaf(NodeKind::Text, pos_, pos_ + 1));
                    ++pos_;
                }
            } else if (name == "def" || name == "gdef" || name == "edef" || name == "xdef") {
                std::size_t p = pos_;
                while (p < limit_ && src_[p] != '{' && src_[p] != '\n' && src_[p] != '\\') ++p;
                if (p > pos_) {
                    auto t = leaf(NodeKind::Text, pos_, p);
                    pos_ = p;
                    add_arg(cmd, std::move(t));
                }
            }
        }

        bool no_args = (!word && name != "\\") || contains(kNoArgCommands, name);
        bool text_switch = contains(kTextSwitchCommands, name);
        bool raw = contains(kRawArgCommands, name);
        if (!no_args) {
            std::size_t mandatory_seen = 0;
            while (!at_end()) {
                if (peek() == '[' && !(name == "\\" && peek(1) == ']')) {
                    auto arg = parse_group(true, text_switch ? false : in_math());
                    if (!cmd.options) {
                        std::string r = render(arg);
                        cmd.options = r.size() >= 2 ? r.substr(1, r.size() - 2) : std::string{};
                    }
                    add_arg(cmd, std::move(arg));
                } else if (peek() == '{' && name != "\\") {
                    bool raw_here = raw && (name != "href" || mandatory_seen == 0);
                    add_arg(cmd, parse_group(false, text_switch ? false : in_math(), raw_here));
                    ++mandatory_seen;
                } else {
                    break;
                }
            }
        }
        cmd.span = doc_.make_span(start, pos_);
        cmd.head = cmd.span;
        classify_command(cmd);
        return cmd;
    }

    void classify_command(AstNode& cmd) const
    {
        const std::string name = cmd.name;
        if (name == "documentclass") {
            cmd.kind = NodeKind::DocumentClassDecl;
            cmd.macro = name;
            if (auto cls = cmd.mandatory_arg_text()) cmd.name = trim(*cls);
            else cmd.name.clear();
        } else if (name == "usepackage" || name == "RequirePackage") {
            cmd.kind = NodeKind::PackageDecl;
            cmd.macro = name;
            if (auto raw = cmd.mandatory_arg_text()) cmd.keys = split_keys(*raw);
            cmd.name = cmd.keys.empty() ? std::string{} : cmd.keys.front();
        } else if (contains(kCiteCommands, name)) {
            cmd.kind = NodeKind::CiteRef;
            cmd.macro = name;
            if (auto raw = cmd.mandatory_arg_text()) cmd.keys = split_keys(*raw);
            cmd.name = cmd.keys.empty() ? std::string{} : cmd.keys.front();
        } else if (contains(kRefCommands, name)) {
            cmd.kind = NodeKind::LabelRef;
            cmd.macro = name;
            if (auto raw = cmd.mandatory_arg_text()) cmd.keys = split_keys(*raw);
            cmd.name = cmd.keys.empty() ? std::string{} : cmd.keys.front();
        }
    }
};

std::string first_control_word(const AstNode& arg)
{
    if (arg.kind == NodeKind::Command) return arg.name;
    std::string raw = trim(render(arg));
    if (arg.kind == NodeKind::Group && raw.size() >= 2) raw = trim(raw.substr(1, raw.size() - 2));
    if (!raw.empty() && raw[0] == '\\') raw.erase(0, 1);
    return raw;
}

int arity_from_options(const AstNode& cmd)
{
    for (const auto& a : cmd.args) {
        if (a.optional) {
            std::string r = render(a);
            for (char ch : r)
                if (ch >= '0' && ch <= '9') return ch - '0';
            return 0;
        }
    }
    return 0;
}

void collect_definitions(const AstNode& node, Ast& ast)
{
    walk(node, [&](const AstNode& n, const NodePath&) {
        if (n.kind == NodeKind::PackageDecl) {
            for (const auto& k : n.keys) ast.packages.push_back({k, n.options.value_or(""), n.span});
        }
        if (n.kind != NodeKind::Command || n.args.empty()) return true;
        const std::string& name = n.name;
        if (contains(kDefiningCommands, name)) {
            std::string target = first_control_word(n.args.front());
            if (target.empty()) return true;
            int arity = arity_from_options(n);
            if (name == "def" || name == "gdef" || name == "edef" || name == "xdef") {
                arity = 0;
                if (n.args.size() > 1 && n.args[1].kind == NodeKind::Text) {
                    std::string params = render(n.args[1]);
                    arity = static_cast<int>(std::count(params.begin(), params.end(), '#'));
                }
            }
            if (name == "NewDocumentCommand" || name == "RenewDocumentCommand" ||
                name == "ProvideDocumentCommand" || name == "DeclareDocumentCommand") {
                if (n.args.size() > 1) {
                    std::string spec = render(n.args[1]);
                    arity = static_cast<int>(std::count_if(spec.begin(), spec.end(), [](char ch) {
                        return ch == 'm' || ch == 'o' || ch == 'O' || ch == 's' || ch == 'g';
                    }));
                }
            }
            ast.macros.push_back({target, arity, n.span});
            if (name == "newif" && target.size() > 2 && target.rfind("if", 0) == 0) {
                std::string base = target.substr(2);
                ast.macros.push_back({base + "true", 0, n.span});
                ast.macros.push_back({base + "false", 0, n.span});
            }
        } else if (name == "newenvironment" || name == "renewenvironment" || name == "newtheorem" ||
                   name == "NewDocumentEnvironment" || name == "RenewDocumentEnvironment" ||
                   name == "newfloat" || name == "DeclareFloatingEnvironment" || name == "lstnewenvironment") {
            std::string target = first_control_word(n.args.front());
            if (!target.empty()) ast.environments.push_back({target, n.span});
            if (name == "newtheorem" && !n.starred && !target.empty()) {
                // \newtheorem also creates the counter macro \the<name>.
                ast.macros.push_back({"the" + target, 0, n.span});
            }
        } else if (name == "newcounter") {
            std::string target = first_control_word(n.args.front());
            if (!target.empty()) ast.macros.push_back({"the" + target, 0, n.span});
        } else if (name == "newcolumntype") {
            // Recorded on the node itself; column types are checked downstream.
        }
        return true;
    });
}

}  // namespace

bool is_math_environment(std::string_view name) { return contains(kMathEnvironments, name); }
bool is_verbatim_environment(std::string_view name) { return contains(kVerbatimEnvironments, name); }

Ast parse(const SourceDocument& doc)
{
    Ast ast;
    Parser parser(doc);
    ast.root = parser.parse_root();
    collect_definitions(ast.root, ast);
    ast.recovery_count = count_errors(ast.root);
    for (const auto& child : ast.root.children) {
        if (child.kind == NodeKind::Environment && child.name == "document") {
            ast.document_begin = child.span.start;
            break;
        }
    }
    return ast;
}

}  // namespace texrepair
