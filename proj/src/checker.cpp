#include "texrepair/checker.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "texrepair/encoding.hpp"
#include "texrepair/parser.hpp"
#include "texrepair/text_util.hpp"

namespace texrepair {

namespace {

template <std::size_t N>
bool in(const std::array<const char*, N>& set, std::string_view name)
{
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return name == s; });
}

constexpr std::array kStandardClasses = {
    "article", "report", "book", "letter", "minimal", "proc", "slides", "amsart", "amsbook", "amsproc",
};

// Arguments that hold keys, file names, settings or code bodies rather than typeset material.
constexpr std::array kOpaqueArgCommands = {
    "includegraphics", "input", "include", "includeonly", "bibliography", "addbibresource", "bibliographystyle",
    "graphicspath", "lstinputlisting", "verbatiminput", "hypersetup", "lstset", "usetikzlibrary",
    "usepgfplotslibrary", "pgfplotsset", "tikzset", "url", "path", "nolinkurl", "newcolumntype",
    "newenvironment", "renewenvironment", "newtheorem", "newcounter", "setcounter", "addtocounter",
    "setlength", "addtolength", "DeclareUnicodeCharacter", "newunicodechar", "captionsetup", "setlist",
    "sisetup", "geometry", "definecolor", "colorlet", "newfloat", "floatname", "floatstyle", "restylefloat",
    "crefname", "Crefname", "theoremstyle", "pagestyle", "thispagestyle", "pagenumbering", "numberwithin",
    "selectlanguage", "hyphenation", "lstnewenvironment", "NewDocumentEnvironment", "RenewDocumentEnvironment",
    "DeclareFloatingEnvironment", "SetKwInOut", "SetKw", "SetKwFunction", "SetKwProg", "SetAlgoLined",
    "newcommand", "renewcommand", "providecommand", "DeclareRobustCommand", "def", "gdef", "edef", "xdef",
    "let", "newlength", "newif", "DeclareMathOperator", "NewDocumentCommand", "RenewDocumentCommand",
    "ProvideDocumentCommand", "DeclareDocumentCommand", "newsavebox", "DeclarePairedDelimiter", "newtoks",
    "newcount", "newdimen", "newskip", "chardef", "mathchardef", "bibitem", "color", "pagecolor",
    "setcitestyle", "bibpunct", "linenumbers", "setstretch", "titleformat", "titlespacing", "fancyhead",
    "fancyfoot", "fancyhf", "vspace", "hspace", "rule", "linespread", "fontsize", "setmainfont",
    "setsansfont", "setmonofont", "usefont", "fontfamily", "algrenewcommand", "algnewcommand",
    "DeclareCaptionFormat", "DeclareCaptionLabelFormat", "ExecuteBibliographyOptions",
};

constexpr std::array kTextArgCommands = {
    "text", "textrm", "textbf", "textit", "textsf", "texttt", "textsc", "textup", "textnormal", "textsl",
    "emph", "intertext", "shortintertext",
};

// Text-mode boxes: floats inside them are not in outer paragraph mode.
constexpr std::array kBoxCommands = {
    "mbox", "hbox", "vbox", "fbox", "parbox", "makebox", "framebox", "raisebox", "colorbox", "fcolorbox",
    "sbox", "savebox", "footnote", "marginpar", "footnotetext",
};

constexpr std::array kParCommands = {
    "par", "item", "section", "subsection", "subsubsection", "paragraph", "subparagraph", "chapter", "part",
    "maketitle", "newpage", "clearpage", "cleardoublepage", "bigskip", "medskip", "smallskip",
    "tableofcontents", "listoffigures", "listoftables", "printbibliography", "bibitem",
};

// Environments that begin and end a paragraph of their own.
constexpr std::array kParEnvironments = {
    "itemize", "enumerate", "description", "center", "flushleft", "flushright", "quote", "quotation",
    "verse", "abstract", "thebibliography", "list", "trivlist", "proof", "verbatim", "verbatim*",
    "Verbatim", "lstlisting", "minted", "tabbing", "titlepage", "theorem", "lemma", "definition",
    "corollary", "proposition", "remark", "example",
};

constexpr std::array kListEnvironments = {
    "itemize", "enumerate", "description", "list", "trivlist", "thebibliography", "compactitem",
    "compactenum", "inparaenum", "asparaenum",
};

constexpr std::array kDisplayMath = {
    "equation", "equation*", "align", "align*", "gather", "gather*", "multline", "multline*", "flalign",
    "flalign*", "alignat", "alignat*", "eqnarray", "eqnarray*", "displaymath",
};

constexpr std::array kFloats = {"figure", "figure*", "table", "table*", "algorithm", "algorithm*"};

constexpr std::array kCaptionHosts = {
    "figure", "figure*", "table", "table*", "wrapfigure", "wraptable", "subfigure", "subtable", "longtable",
    "algorithm", "algorithm*", "SCfigure", "SCtable", "sidewaysfigure", "sidewaystable", "lstlisting",
};

// Text-mode environments built from boxes.
constexpr std::array kBoxEnvironments = {
    "minipage", "tabular", "tabular*", "tabularx", "tabulary", "subfigure", "subtable", "wrapfigure",
    "wraptable", "lrbox",
};

constexpr std::array kTextAlignments = {"tabular", "tabular*", "tabularx", "tabulary", "longtable"};

constexpr std::array kMatrixEnvironments = {
    "matrix", "pmatrix", "bmatrix", "Bmatrix", "vmatrix", "Vmatrix", "smallmatrix",
};

// Bodies that are not scanned at all.
constexpr std::array kOpaqueEnvironments = {
    "tikzpicture", "axis", "pgfpicture", "picture", "comment", "filecontents", "filecontents*",
};

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string basename_of(const std::string& path)
{
    std::string b = std::filesystem::path(path).filename().string();
    return b.empty() ? "main.tex" : b;
}

std::string stem_of(const std::string& path)
{
    std::string s = std::filesystem::path(path).stem().string();
    return s.empty() ? "main" : s;
}

std::optional<std::string_view> read_group(std::string_view s, std::size_t& i)
{
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size() || s[i] != '{') return std::nullopt;
    std::size_t start = i + 1;
    int depth = 0;
    for (; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}' && --depth == 0) return s.substr(start, i++ - start);
    }
    return std::nullopt;
}

// Column count of a tabular preamble; 0 when unlimited, nullopt when illegal.
std::optional<std::size_t> count_columns(std::string_view spec, const DocSymbols& syms, const std::set<char>& custom)
{
    std::size_t n = 0, i = 0;
    bool array = syms.loaded("array");
    while (i < spec.size()) {
        char c = spec[i++];
        switch (c) {
        case ' ': case '\t': case '\n': case '\r': case '|':
            break;
        case 'l': case 'c': case 'r':
            ++n;
            break;
        case 'p':
            if (!read_group(spec, i)) return std::nullopt;
            ++n;
            break;
        case 'm': case 'b':
            if (!array || !read_group(spec, i)) return std::nullopt;
            ++n;
            break;
        case '@': case '!':
            if (!read_group(spec, i)) return std::nullopt;
            break;
        case '>': case '<':
            if (!array || !read_group(spec, i)) return std::nullopt;
            break;
        case 'X':
            if (!syms.loaded("tabularx")) return std::nullopt;
            ++n;
            break;
        case 'S':
            if (!syms.loaded("siunitx")) return std::nullopt;
            if (i < spec.size() && spec[i] == '[') {
                std::size_t close = spec.find(']', i);
                if (close == std::string_view::npos) return std::nullopt;
                i = close + 1;
            }
            ++n;
            break;
        case '*': {
            auto count = read_group(spec, i);
            auto sub = count ? read_group(spec, i) : std::nullopt;
            if (!sub) return std::nullopt;
            std::size_t k = 0;
            for (char d : trim(*count)) {
                if (!std::isdigit(static_cast<unsigned char>(d))) return std::nullopt;
                k = k * 10 + static_cast<std::size_t>(d - '0');
            }
            auto inner = count_columns(*sub, syms, custom);
            if (!inner) return std::nullopt;
            n += k * *inner;
            break;
        }
        default:
            if (custom.count(c) || syms.open_world()) {
                ++n;
                break;
            }
            return std::nullopt;
        }
    }
    return n;
}

std::vector<std::string> split_options(const std::optional<std::string>& raw)
{
    std::vector<std::string> out;
    if (!raw) return out;
    for (auto& o : split(*raw, ',')) {
        std::string t = trim(o);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string hex_byte(unsigned char b)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02X", b);
    return buf;
}

// Invalid bytes are shown the way pdfTeX prints them.
std::string printable(std::string_view s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
        auto ch = decode_utf8(s, i);
        if (!ch.valid) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "^^%02x", static_cast<unsigned char>(s[i]));
            out += buf;
            ++i;
            continue;
        }
        out.append(s.substr(i, ch.length));
        i += ch.length;
    }
    return out;
}

const std::vector<std::string> kHelpUndefined = {
    "The control sequence at the end of the top line",
    "of your error message was never \\def'ed. If you have",
    "misspelled it, type `I' and the correct",
    "spelling. Otherwise just continue,",
    "and I'll forget about whatever was undefined.",
};
const std::vector<std::string> kHelpMissingDollar = {
    "I've inserted a begin-math/end-math symbol since I think",
    "you left one out. Proceed, with fingers crossed.",
};
const std::vector<std::string> kHelpLatex = {
    "Your command was ignored.",
    "Type  I <command> <return>  to replace it with another command,",
    "or  <return>  to continue without it.",
};
const std::vector<std::string> kHelpExtraBrace = {
    "I've deleted a group-closing symbol because it seems to be",
    "spurious, as in `$x}$'. But perhaps the } is legitimate and",
    "you forgot something else, as in `\\hbox{$x}'.",
};
const std::vector<std::string> kHelpMissingBrace = {
    "I've inserted something that you may have forgotten.",
    "The paragraph or file ended before the group was closed.",
};
const std::vector<std::string> kHelpAlign = {
    "You have given more \\span or & marks than there were",
    "in the preamble to the \\halign or \\valign now in progress.",
    "So I'll assume that you meant to type \\cr instead.",
};
const std::vector<std::string> kHelpMisplaced = {
    "I can't figure out why you would want to use a tab mark",
    "here. If you just want an ampersand, the remedy is",
    "simple: Just type `I\\&' now. But if some right brace",
    "up above has ended a previous alignment prematurely,",
    "you're probably due for more error messages.",
};
const std::vector<std::string> kHelpDisplay = {
    "The `$' that I just saw supposedly matches a previous `$$'.",
    "So I shall assume that you typed `$$' both times.",
};
const std::vector<std::string> kHelpPackage = {
    "Check the package documentation for explanation.",
};

bool read_bib_keys(const std::filesystem::path& path, std::set<std::string>& keys)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    static const std::regex kEntry(R"(@\s*([A-Za-z]+)\s*[\{\(]\s*([^,\s]+)\s*,)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), kEntry); it != std::sregex_iterator(); ++it) {
        std::string type = (*it)[1].str();
        std::transform(type.begin(), type.end(), type.begin(), [](unsigned char c) { return std::tolower(c); });
        if (type == "string" || type == "comment" || type == "preamble") continue;
        keys.insert((*it)[2].str());
    }
    return true;
}

class Checker {
public:
    Checker(const SourceDocument& doc, const Ast& ast, const PackageDb& db, const ProxyOptions& options)
        : doc_(doc), ast_(ast), db_(db), opts_(options), syms_(ast, db)
    {
    }

    std::string run()
    {
        prepare();
        std::string file = basename_of(doc_.path());
        out_.push_back("This is texrepair, static proxy (no TeX engine)");
        out_.push_back("**" + file);
        out_.push_back("(./" + file);
        out_.push_back("LaTeX2e <2023-11-01>");
        preamble_ = has_class_ && ast_.document_begin.has_value();
        visit_children(ast_.root, nullptr, true);

        if (!finished_ && has_class_) {
            out_.push_back("! Emergency stop.");
            out_.push_back("<*> " + file);
            out_.push_back("    ");
            out_.push_back("*** (job aborted, no legal \\end found)");
            out_.push_back("");
        }
        for (const auto& [label, count] : label_count_)
            if (count > 1) warning("LaTeX Warning: Label `" + label + "' multiply defined.");
        out_.push_back(")");
        if (undefined_refs_) warning("LaTeX Warning: There were undefined references.");
        if (multiply_defined_) warning("LaTeX Warning: There were multiply-defined labels.");
        if (ast_.document_begin && finished_) out_.push_back("Output written on " + stem_of(doc_.path()) + ".pdf.");
        else out_.push_back("No pages of output.");
        out_.push_back("Transcript written on " + stem_of(doc_.path()) + ".log.");

        std::string log;
        for (std::string line : out_) {
            if (!line.empty() && line.size() % kMaxLine == 0) line += ' ';
            for (std::size_t i = 0; i < line.size(); i += kMaxLine) {
                log.append(line, i, kMaxLine);
                log += '\n';
            }
            if (line.empty()) log += '\n';
        }
        return log;
    }

private:
    static constexpr std::size_t kMaxLine = 79;

    enum class Mode { Text, Inline, Display };
    struct MathState {
        Mode mode = Mode::Text;
        std::size_t depth = 0;  // group depth the math opened at
        unsigned serial = 0;
        bool env = false;  // opened by a display environment
        bool env_par = false;
    };
    struct Frame {
        std::string name;
        std::size_t line;
    };
    struct Align {
        std::size_t limit = 0;
        std::size_t cells = 1;
    };
    struct Ctx {
        std::size_t line;
        std::string before;
        std::string after;
    };
    enum class Stub { None, Latex, Package };

    // ---- set-up ----

    void prepare()
    {
        natbib_ = syms_.loaded("natbib");
        unicode_checks_ = !syms_.loaded("fontspec");
        bool has_thebib = false, has_bibcmd = false, bib_unreadable = false;
        std::filesystem::path dir = std::filesystem::path(doc_.path()).parent_path();

        walk(ast_.root, [&](const AstNode& n, const NodePath&) {
            if (n.kind == NodeKind::DocumentClassDecl) has_class_ = true;
            if (n.kind == NodeKind::PackageDecl && n.macro == "usepackage") {
                for (const auto& k : n.keys)
                    if (k == "fontenc")
                        for (const auto& o : split_options(n.options))
                            if (o == "T1") t1_ = true;
            }
            if (n.kind == NodeKind::LabelRef && n.macro == "label") {
                for (const auto& k : n.keys) ++label_count_[k];
            }
            if (n.kind == NodeKind::Environment && n.name == "thebibliography") has_thebib = true;
            if (n.kind != NodeKind::Command) return true;
            if (n.name == "bibitem") {
                if (auto key = n.mandatory_arg_text()) bibkeys_.insert(trim(*key));
            } else if (n.name == "DeclareUnicodeCharacter") {
                if (auto hex = n.mandatory_arg_text()) {
                    try {
                        declared_.insert(static_cast<char32_t>(std::stoul(trim(*hex), nullptr, 16)));
                    } catch (...) {
                    }
                }
            } else if (n.name == "newunicodechar") {
                if (auto ch = n.mandatory_arg_text(); ch && !ch->empty()) declared_.insert(decode_utf8(*ch, 0).cp);
            } else if (n.name == "newcolumntype") {
                if (auto t = n.mandatory_arg_text(); t && trim(*t).size() == 1) custom_columns_.insert(trim(*t)[0]);
            } else if (n.name == "bibliography" || n.name == "addbibresource") {
                has_bibcmd = true;
                auto raw = n.mandatory_arg_text();
                if (!raw || !opts_.read_bib_files) {
                    bib_unreadable = true;
                    return false;
                }
                for (const auto& f : split(*raw, ',')) {
                    std::string name = trim(f);
                    if (name.empty()) continue;
                    if (!ends_with(name, ".bib")) name += ".bib";
                    if (!read_bib(dir / name)) bib_unreadable = true;
                }
                return false;
            }
            return true;
        });
        for (const auto& [_, c] : label_count_)
            if (c > 1) multiply_defined_ = true;
        // Without any bibliography every citation is undefined; an unreadable one tells us nothing.
        cite_checks_ = has_thebib || !(has_bibcmd && bib_unreadable);
    }

    bool read_bib(const std::filesystem::path& path) { return read_bib_keys(path, bibkeys_); }

    // ---- log output ----

    Ctx ctx_line(std::size_t line, std::size_t pos) const
    {
        std::size_t ls = doc_.line_start(line), le = doc_.line_end(line);
        pos = std::clamp(pos, ls, le);
        const std::string& t = doc_.text();
        return {line, t.substr(ls, pos - ls), t.substr(pos, le - pos)};
    }

    // Context just past a token ending at `end`.
    Ctx ctx_after(std::size_t end) const
    {
        end = std::min(end, doc_.size());
        std::size_t line = doc_.line_of(end == 0 ? 0 : end - 1);
        return ctx_line(line, end);
    }

    void error(const std::vector<std::string>& head, const Ctx& ctx, const std::vector<std::string>& help,
               Stub stub = Stub::None, const std::string& package = {})
    {
        out_.push_back("! " + head.front());
        for (std::size_t i = 1; i < head.size(); ++i) out_.push_back(head[i]);
        if (stub != Stub::None) {
            out_.push_back("");
            out_.push_back(stub == Stub::Latex ? "See the LaTeX manual or LaTeX Companion for explanation."
                                               : "See the " + package + " package documentation for explanation.");
            out_.push_back("Type  H <return>  for immediate help.");
            out_.push_back(" ...                                              ");
            out_.push_back("                                                  ");
        }
        std::string before = printable(ctx.before);
        std::string prefix = "l." + std::to_string(ctx.line) + " ";
        out_.push_back(prefix + before);
        std::string after = std::string(prefix.size() + before.size(), ' ') + printable(ctx.after);
        if (after.empty()) after = " ";
        out_.push_back(after);
        for (const auto& h : help) out_.push_back(h);
        out_.push_back("");
        ++errors_;
    }

    void warning(const std::string& text)
    {
        out_.push_back(text);
        out_.push_back("");
    }

    void latex_error(const std::string& msg, const Ctx& ctx, const std::vector<std::string>& help = kHelpLatex)
    {
        error({"LaTeX Error: " + msg}, ctx, help, Stub::Latex);
    }

    void package_error(const std::string& pkg, const std::vector<std::string>& lines, const Ctx& ctx)
    {
        std::vector<std::string> head = lines;
        head.front() = "Package " + pkg + " Error: " + head.front();
        std::string pad = "(" + pkg + ")";
        pad += std::string(std::max<std::size_t>(1, 26 - std::min<std::size_t>(25, pad.size())), ' ');
        for (std::size_t i = 1; i < head.size(); ++i) head[i] = pad + head[i];
        error(head, ctx, kHelpPackage, Stub::Package, pkg);
    }

    // ---- math mode machine ----

    void open_math(Mode m)
    {
        math_.mode = m;
        math_.depth = depth_;
        math_.serial = ++next_serial_;
        math_.env = false;
        math_.env_par = false;
    }

    void close_math() { math_ = MathState{}; }

    void missing_dollar(const Ctx& ctx) { error({"Missing $ inserted."}, ctx, kHelpMissingDollar); }

    void par_end(const Ctx& ctx)
    {
        if (math_.mode == Mode::Inline) {
            missing_dollar(ctx);
            close_math();
        } else if (math_.mode == Mode::Display) {
            if (math_.env) {
                if (!math_.env_par) missing_dollar(ctx);
                math_.env_par = true;
            } else {
                missing_dollar(ctx);
                close_math();
            }
        }
    }

    void bad_delimiter(std::size_t end) { latex_error("Bad math environment delimiter.", ctx_after(end)); }

    void display_end(std::size_t end) { error({"Display math should end with $$."}, ctx_after(end), kHelpDisplay); }

    void math_token(const std::string& tok, std::size_t end)
    {
        Mode m = math_.mode;
        if (tok == "$") {
            if (m == Mode::Text) open_math(Mode::Inline);
            else if (m == Mode::Inline) close_math();
            else {
                display_end(end);
                if (!math_.env) close_math();
            }
        } else if (tok == "$$") {
            if (m == Mode::Text) open_math(Mode::Display);
            else if (m == Mode::Display) {
                if (math_.env) display_end(end);
                else close_math();
            }
        } else if (tok == "\\(" || tok == "\\[") {
            if (m != Mode::Text) bad_delimiter(end);
            else open_math(tok == "\\(" ? Mode::Inline : Mode::Display);
        } else if (tok == "\\)" || tok == "\\]") {
            Mode want = tok == "\\)" ? Mode::Inline : Mode::Display;
            if (m == want && !math_.env) close_math();
            else bad_delimiter(end);
        }
    }

    // ---- environment stack ----

    void env_end(const std::string& name, std::size_t end)
    {
        if (frames_.empty()) return;
        const Frame top = frames_.back();
        if (top.name != name) {
            latex_error("\\begin{" + top.name + "} on input line " + std::to_string(top.line) + " ended by \\end{" +
                            name + "}.",
                        ctx_after(end));
        }
        frames_.pop_back();
    }

    bool env_defined(const std::string& name) const
    {
        return syms_.open_world() || syms_.environment_known(name);
    }

    bool caption_allowed() const
    {
        return std::any_of(env_chain_.begin(), env_chain_.end(), [&](const std::string& e) {
            return in(kCaptionHosts, e) || ast_.defines_environment(e);
        });
    }

    // ---- traversal ----

    void visit_children(const AstNode& node, Align* align, bool top = false)
    {
        for (const auto& child : node.children) {
            if (finished_) return;
            if (align && child.kind == NodeKind::Text) {
                scan_text(child, align, top);
                continue;
            }
            visit(child, top);
            if (align && child.kind == NodeKind::Command) {
                if (child.name == "\\" || child.name == "tabularnewline" || child.name == "cr" || child.name == "crcr") {
                    align->cells = 1;
                } else if (child.name == "multicolumn") {
                    std::size_t n = 1;
                    if (auto a = child.mandatory_arg_text()) {
                        try {
                            n = std::stoul(trim(*a));
                        } catch (...) {
                        }
                    }
                    if (n > 1) align->cells += n - 1;
                }
            }
        }
    }

    void visit(const AstNode& node, bool top = false)
    {
        if (finished_) return;
        switch (node.kind) {
        case NodeKind::Root:
            visit_children(node, nullptr, true);
            break;
        case NodeKind::Text:
            scan_text(node, nullptr, top);
            break;
        case NodeKind::Comment:
            break;
        case NodeKind::Group:
            visit_group(node, std::nullopt, false);
            break;
        case NodeKind::MathInline:
        case NodeKind::MathDisplay:
            visit_math(node);
            break;
        case NodeKind::Environment:
            visit_env(node);
            break;
        case NodeKind::Error:
            visit_error(node);
            break;
        case NodeKind::PackageDecl:
            visit_package(node);
            break;
        case NodeKind::DocumentClassDecl:
            break;
        case NodeKind::CiteRef:
        case NodeKind::LabelRef:
            visit_ref(node);
            break;
        case NodeKind::Command:
            visit_command(node);
            break;
        }
    }

    void visit_group(const AstNode& g, std::optional<Mode> forced, bool box)
    {
        MathState outer = math_;
        ++depth_;
        if (box) ++box_depth_;
        if (forced && *forced != math_.mode) {
            if (*forced == Mode::Text) close_math();
            else open_math(*forced);
        }
        MathState entry = math_;
        visit_children(g, nullptr);
        if (!finished_) {
            if (g.error == ErrorKind::UnclosedGroup) {
                error({"Missing } inserted."}, ctx_after(g.span.end), kHelpMissingBrace);
            } else if (math_.mode != Mode::Text && math_.serial != entry.serial && math_.depth >= depth_) {
                // math opened inside the group is still open at its `}`
                error({"Extra }, or forgotten $."}, ctx_after(g.span.end), kHelpExtraBrace);
            }
        }
        if (outer.mode != Mode::Text && !forced && math_.serial != outer.serial && math_.mode == Mode::Text) {
            // the outer math was closed inside the group
        } else {
            math_ = outer;
        }
        if (box) --box_depth_;
        --depth_;
    }

    void visit_math(const AstNode& m)
    {
        std::size_t open_end = m.span.start + m.name.size();
        math_token(m.name, open_end);
        visit_children(m, nullptr);
        if (finished_) return;
        if (m.error == ErrorKind::None) {
            std::string closer = m.name == "$"    ? "$"
                                 : m.name == "$$" ? "$$"
                                 : m.name == "\\(" ? "\\)"
                                                   : "\\]";
            math_token(closer, m.span.end);
        } else if (m.error == ErrorKind::DisplayMathMismatch) {
            if (math_.mode == Mode::Display && !math_.env) {
                display_end(m.span.end);
                close_math();
            } else {
                math_token("$", m.span.end);
            }
        }
    }

    void visit_error(const AstNode& e)
    {
        switch (e.error) {
        case ErrorKind::OrphanEnd: {
            if (in(kParEnvironments, e.name)) par_end(ctx_after(e.span.end));
            if (in(kDisplayMath, e.name) && math_.mode == Mode::Display && math_.env) close_math();
            env_end(e.name, e.span.end);
            if (e.name == "document") finished_ = true;
            break;
        }
        case ErrorKind::UnmatchedBrace:
            if (math_.mode != Mode::Text && math_.depth == depth_) {
                error({"Extra }, or forgotten $."}, ctx_after(e.span.end), kHelpExtraBrace);
            } else if (frames_.empty() && depth_ == 0) {
                error({"Too many }'s."}, ctx_after(e.span.end), {"You've closed more groups than you opened."});
            } else {
                error({"Extra }, or forgotten \\endgroup."}, ctx_after(e.span.end), kHelpExtraBrace);
            }
            break;
        case ErrorKind::MathDelimiterMismatch:
            math_token(e.name, e.span.end);
            break;
        case ErrorKind::StrayMathClose:
            math_token(e.name, e.span.end);
            break;
        default:
            break;
        }
    }

    void visit_env(const AstNode& e)
    {
        const std::string& name = e.name;
        std::size_t name_end = e.args.empty() ? e.head.end : e.args.front().span.end;
        bool defined = env_defined(name);
        bool in_document = !preamble_;

        if (name == "document") {
            frames_.push_back({name, e.span.line});
            preamble_ = false;
        } else if (!defined) {
            latex_error("Environment " + name + " undefined.", ctx_after(name_end));
            frames_.push_back(frames_.empty() ? Frame{name, e.span.line} : frames_.back());
        } else {
            if (in(kParEnvironments, name) && in_document) par_end(ctx_after(name_end));
            frames_.push_back({name, e.span.line});
        }

        bool is_float = defined && in(kFloats, name) && syms_.environment_known(name);
        if (is_float) {
            if (float_depth_ > 0 || box_depth_ > 0 || math_.mode != Mode::Text)
                latex_error("Not in outer par mode.", ctx_after(name_end));
            if (e.options) check_placement(name, *e.options, e.head.end);
        }

        MathState saved = math_;
        bool box = defined && in(kBoxEnvironments, name);
        bool display = defined && in(kDisplayMath, name);
        bool inner_math = defined && e.math_env && !display && name != "math";
        if (box) {
            ++box_depth_;
            close_math();
        }
        if (display && math_.mode == Mode::Text) {
            open_math(Mode::Display);
            math_.env = true;
        } else if (name == "math" && math_.mode == Mode::Text) {
            open_math(Mode::Inline);
        } else if (inner_math && math_.mode == Mode::Text && !box) {
            missing_dollar(ctx_after(name_end));
            open_math(Mode::Inline);
        }
        bool list = defined && in(kListEnvironments, name);
        if (list) ++list_depth_;
        if (is_float) ++float_depth_;
        env_chain_.push_back(name);

        std::optional<Align> align;
        if (defined) align = alignment_for(e);

        bool opaque = in(kOpaqueEnvironments, name) || is_verbatim_environment(name);
        if (!opaque) visit_children(e, align ? &*align : nullptr);

        env_chain_.pop_back();
        if (is_float) --float_depth_;
        if (list) --list_depth_;
        if (finished_) return;

        if (e.tail) {
            if (defined && in(kParEnvironments, name)) par_end(ctx_after(e.tail->end));
            if (display || name == "math") {
                if (math_.mode != Mode::Text) close_math();
            }
        }
        if (box) {
            --box_depth_;
            math_ = saved;
        }
        if (e.tail) {
            env_end(name, e.tail->end);
            if (name == "document") finished_ = true;
        }
    }

    std::optional<Align> alignment_for(const AstNode& e)
    {
        const std::string& name = e.name;
        Align a;
        if (in(kTextAlignments, name) || name == "array") {
            std::size_t nth = (name == "tabular*" || name == "tabularx" || name == "tabulary") ? 2 : 1;
            auto spec = e.mandatory_arg_text(nth);
            if (!spec) return a;
            auto cols = count_columns(*spec, syms_, custom_columns_);
            if (!cols) {
                latex_error("Illegal character in array arg.", ctx_after(e.head.end));
                return a;
            }
            a.limit = *cols;
            return a;
        }
        if (name == "cases" || name == "dcases") a.limit = 2;
        else if (in(kMatrixEnvironments, name)) a.limit = 10;
        else if (name == "eqnarray" || name == "eqnarray*") a.limit = 3;
        else if (name == "gather" || name == "gather*" || name == "gathered") a.limit = 1;
        else if (name == "alignat" || name == "alignat*" || name == "alignedat") {
            std::size_t n = 0;
            if (auto k = e.mandatory_arg_text(1)) {
                try {
                    n = std::stoul(trim(*k));
                } catch (...) {
                }
            }
            a.limit = 2 * n;
        } else if (!(name == "align" || name == "align*" || name == "flalign" || name == "flalign*" ||
                     name == "aligned" || name == "split" || name == "subarray" || name == "tabbing")) {
            return std::nullopt;
        }
        if (name == "tabbing") return std::nullopt;
        return a;
    }

    void check_placement(const std::string& env, const std::string& opts, std::size_t end)
    {
        for (char c : opts) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            bool ok = c == 'h' || c == 't' || c == 'b' || c == 'p' || c == '!';
            if (c == 'H') {
                bool algo = env == "algorithm" || env == "algorithm*";
                ok = syms_.loaded("float") || (algo && syms_.loaded("algorithm2e"));
            }
            if (!ok) {
                latex_error(std::string("Unknown float option `") + c + "'.", ctx_after(end));
                return;
            }
        }
    }

    void visit_package(const AstNode& d)
    {
        std::size_t end = d.span.end;
        auto opts = split_options(d.options);
        for (const auto& pkg : d.keys) {
            auto seen = options_seen_.find(pkg);
            if (seen != options_seen_.end()) {
                bool clash = std::any_of(opts.begin(), opts.end(), [&](const std::string& o) {
                    return std::find(seen->second.begin(), seen->second.end(), o) == seen->second.end();
                });
                if (clash) latex_error("Option clash for package " + pkg + ".", ctx_after(end));
                for (const auto& o : opts) seen->second.push_back(o);
                continue;
            }
            options_seen_[pkg] = opts;
            for (const auto& rule : db_.conflicts()) {
                if (rule.a != pkg && rule.b != pkg) continue;
                const std::string& other = rule.a == pkg ? rule.b : rule.a;
                if (std::find(load_order_.begin(), load_order_.end(), other) == load_order_.end()) continue;
                if (rule.kind == ConflictKind::Incompatible) {
                    package_error(pkg, {"Incompatible package '" + other + "'."}, ctx_after(end));
                } else {
                    const std::string& first = rule.a_before_b ? rule.a : rule.b;
                    if (first == pkg)
                        package_error(pkg, {"`" + pkg + "' must be loaded before `" + other + "'."}, ctx_after(end));
                }
            }
            if (pkg == "fontenc") {
                for (const auto& o : opts) {
                    if (known_font_encoding(o)) continue;
                    std::string lower = o;
                    std::transform(lower.begin(), lower.end(), lower.begin(),
                                   [](unsigned char c) { return std::tolower(c); });
                    package_error("fontenc",
                                  {"Encoding file `" + lower + "enc.def' not found.",
                                   "You might have misspelt the name of the encoding."},
                                  ctx_after(end));
                }
            }
            load_order_.push_back(pkg);
        }
    }

    void visit_ref(const AstNode& r)
    {
        std::size_t name_end = r.head.start + 1 + r.macro.size();
        if (!syms_.open_world() && !syms_.command_known(r.macro)) {
            error({"Undefined control sequence."}, ctx_after(name_end), kHelpUndefined);
            return;
        }
        if (preamble_) return;
        std::size_t line = r.span.line;
        if (r.kind == NodeKind::LabelRef) {
            if (r.macro == "label") return;
            for (const auto& k : r.keys) {
                if (label_count_.count(k)) continue;
                warning("LaTeX Warning: Reference `" + k + "' on page 1 undefined on input line " +
                        std::to_string(line) + ".");
                undefined_refs_ = true;
            }
            return;
        }
        if (r.macro == "nocite" || !cite_checks_) return;
        for (const auto& k : r.keys) {
            if (k == "*" || bibkeys_.count(k)) continue;
            std::string who = natbib_ ? "Package natbib Warning: " : "LaTeX Warning: ";
            warning(who + "Citation `" + k + "' on page 1 undefined on input line " + std::to_string(line) + ".");
            undefined_refs_ = true;
        }
    }

    void visit_command(const AstNode& c)
    {
        const std::string& name = c.name;
        if (c.error == ErrorKind::UnterminatedVerb) {
            latex_error("\\verb ended by end of line.", ctx_after(c.span.end));
            return;
        }
        if (c.error != ErrorKind::None || name == "verb" || name.empty()) return;
        std::size_t name_end = c.head.start + 1 + name.size();
        bool letter = is_letter(name[0]);

        if (!preamble_ && in(kParCommands, name)) par_end(ctx_after(name_end));
        if (!preamble_ && name == "item" && list_depth_ == 0) {
            latex_error("Lonely \\item--perhaps a missing list environment.", ctx_after(name_end));
        }
        bool known = !letter || syms_.open_world() || syms_.command_known(name);
        if (!known) {
            error({"Undefined control sequence."}, ctx_after(name_end), kHelpUndefined);
        } else if (letter && !preamble_ && math_.mode == Mode::Text && db_.is_math_only(name)) {
            missing_dollar(ctx_after(name_end));
            open_math(Mode::Inline);
        }
        if (!preamble_ && name == "caption" && !caption_allowed())
            latex_error("\\caption outside float.", ctx_after(name_end));

        if (in(kOpaqueArgCommands, name)) return;

        std::optional<Mode> forced;
        bool box = in(kBoxCommands, name);
        if (in(kTextArgCommands, name) || box) forced = Mode::Text;
        if (name == "ensuremath" && math_.mode == Mode::Text) forced = Mode::Inline;
        std::size_t mandatory = 0;
        for (const auto& arg : c.args) {
            if (finished_) return;
            if (arg.kind != NodeKind::Group) continue;
            bool first_mandatory = !arg.optional && mandatory++ == 0;
            if (name == "href" && first_mandatory) continue;
            visit_group(arg, arg.optional ? std::nullopt : forced, box && !arg.optional);
        }
    }

    void scan_text(const AstNode& t, Align* align, bool top)
    {
        const std::string& s = doc_.text();
        std::size_t end = std::min(t.span.end, s.size());
        for (std::size_t i = t.span.start; i < end; ++i) {
            if (finished_) return;
            char c = s[i];
            if (preamble_) {
                if (top && !missing_begin_reported_ && !std::isspace(static_cast<unsigned char>(c))) {
                    latex_error("Missing \\begin{document}.", ctx_after(i + 1));
                    missing_begin_reported_ = true;
                }
                continue;
            }
            if (c == '\n') {
                std::size_t j = i + 1;
                while (j < end && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
                if (j < end && s[j] == '\n') {
                    std::size_t line = doc_.line_of(i + 1);
                    par_end(ctx_line(line, doc_.line_start(line)));
                    i = j - 1;
                }
                continue;
            }
            if ((c == '^' || c == '_') && math_.mode == Mode::Text) {
                missing_dollar(ctx_after(i + 1));
                open_math(Mode::Inline);
                continue;
            }
            if (c == '&') {
                if (!align) {
                    error({"Misplaced alignment tab character &."}, ctx_after(i + 1), kHelpMisplaced);
                } else if (++align->cells > align->limit && align->limit > 0) {
                    error({"Extra alignment tab has been changed to \\cr."}, ctx_after(i + 1), kHelpAlign);
                    align->cells = 1;
                }
                continue;
            }
            if (c == '#') {
                std::string where = math_.mode == Mode::Text ? "horizontal" : "math";
                error({"You can't use `macro parameter character #' in " + where + " mode."}, ctx_after(i + 1),
                      {"Sorry, but I'm not programmed to handle this case;",
                       "I'll just pretend that you didn't ask for it."});
                continue;
            }
            if (static_cast<unsigned char>(c) < 0x80) continue;
            auto ch = decode_utf8(s, i);
            if (!ch.valid) {
                if (unicode_checks_)
                    package_error("inputenc",
                                  {"Invalid UTF-8 byte \"" + hex_byte(static_cast<unsigned char>(c)) + ".",
                                   "The document does not appear to be in UTF-8 encoding."},
                                  ctx_after(i + 1));
                continue;
            }
            std::size_t len = ch.length;
            if (unicode_checks_ && !declared_.count(ch.cp)) {
                GlyphSupport g = glyph_support(ch.cp);
                if (g == GlyphSupport::Unsupported || (g == GlyphSupport::NeedsT1 && !t1_)) {
                    package_error("inputenc",
                                  {"Unicode character " + s.substr(i, len) + " (" + codepoint_label(ch.cp) + ")",
                                   "not set up for use with LaTeX."},
                                  ctx_after(i + len));
                }
            }
            i += len - 1;
        }
    }

    const SourceDocument& doc_;
    const Ast& ast_;
    const PackageDb& db_;
    ProxyOptions opts_;
    DocSymbols syms_;

    std::vector<std::string> out_;
    std::size_t errors_ = 0;
    bool finished_ = false;
    bool preamble_ = false;
    bool has_class_ = false;
    bool missing_begin_reported_ = false;

    MathState math_;
    std::size_t depth_ = 0;
    unsigned next_serial_ = 0;

    std::vector<Frame> frames_;
    std::vector<std::string> env_chain_;
    int box_depth_ = 0;
    int float_depth_ = 0;
    int list_depth_ = 0;

    std::vector<std::string> load_order_;
    std::map<std::string, std::vector<std::string>> options_seen_;
    std::set<char> custom_columns_;

    bool t1_ = false;
    bool unicode_checks_ = true;
    std::set<char32_t> declared_;

    std::map<std::string, int> label_count_;
    std::set<std::string> bibkeys_;
    bool cite_checks_ = true;
    bool natbib_ = false;
    bool undefined_refs_ = false;
    bool multiply_defined_ = false;
};

}  // namespace

DocSymbols::DocSymbols(const Ast& ast, const PackageDb& db) : ast_(ast), db_(db)
{
    std::vector<std::string> names;
    for (const auto& p : ast.packages) names.push_back(p.name);
    loaded_ = db.closure(names);
    for (const auto& child : ast.root.children) {
        if (child.kind == NodeKind::DocumentClassDecl) {
            class_ = child.name;
            break;
        }
    }
    open_world_ = db.kernel(SymbolKind::Command).empty();
    for (const auto& n : loaded_)
        if (!db.find(n)) open_world_ = true;
    if (!class_.empty() && !in(kStandardClasses, class_)) open_world_ = true;
}

bool DocSymbols::command_known(std::string_view name) const
{
    if (name.empty() || !is_letter(name[0]) || name.find('@') != std::string_view::npos) return true;
    if (db_.is_kernel(SymbolKind::Command, name)) return true;
    const auto& index = db_.symbol_index(SymbolKind::Command);
    if (auto it = index.find(std::string(name)); it != index.end()) {
        for (const auto& pkg : it->second)
            if (loaded_.count(pkg)) return true;
    }
    return ast_.defines_macro(name);
}

bool DocSymbols::environment_known(std::string_view name) const
{
    if (db_.is_kernel(SymbolKind::Environment, name)) return true;
    const auto& index = db_.symbol_index(SymbolKind::Environment);
    if (auto it = index.find(std::string(name)); it != index.end()) {
        for (const auto& pkg : it->second)
            if (loaded_.count(pkg)) return true;
    }
    return ast_.defines_environment(name);
}

std::string synthesize_log(const SourceDocument& doc, const Ast& ast, const PackageDb& db, const ProxyOptions& options)
{
    return Checker(doc, ast, db, options).run();
}

DefinedKeys defined_keys(const SourceDocument& doc, const Ast& ast, const ProxyOptions& options)
{
    DefinedKeys out;
    std::filesystem::path dir = std::filesystem::path(doc.path()).parent_path();
    walk(ast.root, [&](const AstNode& n, const NodePath&) {
        if (n.kind == NodeKind::LabelRef && n.macro == "label")
            for (const auto& k : n.keys) out.labels.insert(k);
        if (n.kind != NodeKind::Command) return true;
        if (n.name == "bibitem") {
            if (auto key = n.mandatory_arg_text()) out.citations.insert(trim(*key));
        } else if ((n.name == "bibliography" || n.name == "addbibresource") && options.read_bib_files) {
            if (auto raw = n.mandatory_arg_text())
                for (const auto& f : split(*raw, ',')) {
                    std::string name = trim(f);
                    if (name.empty()) continue;
                    if (!ends_with(name, ".bib")) name += ".bib";
                    read_bib_keys(dir / name, out.citations);
                }
        }
        return true;
    });
    return out;
}

LogReport proxy_compile(const SourceDocument& doc, const Ast& ast, const PackageDb& db, const ProxyOptions& options)
{
    return parse_log(synthesize_log(doc, ast, db, options));
}

}  // namespace texrepair
