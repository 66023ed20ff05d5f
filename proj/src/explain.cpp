#include "texrepair/explain.hpp"

#include <vector>

namespace texrepair {

namespace {

using C = ErrorCategory;
using P = LogPattern;

struct Template {
    std::optional<ErrorCategory> category;
    LogPattern pattern;
    std::string_view cause;  // empty: any
    std::string_view text;
};

// Most specific entries first; lookup takes the first match.
const std::vector<Template>& catalog()
{
    static const std::vector<Template> t = {
        {C::PackageConflict, P::EnvironmentUndefined, cause::MissingPackage,
         "{token} env. requires the {provider} package, which is not loaded. Add {usepackage} to the preamble."},
        {C::PackageConflict, P::EnvironmentUndefined, "",
         "Environment {token} is not defined by the document class or any loaded package. Load the package that "
         "provides it or define it with \\newenvironment."},
        {C::PackageConflict, P::UndefinedControlSequence, cause::MissingPackage,
         "\\{token} requires the {provider} package, which is not loaded. Add {usepackage} to the preamble."},
        {C::PackageConflict, P::UndefinedControlSequence, "",
         "\\{token} comes from a package that is not loaded. Load the package that provides it."},
        {C::UndefinedControl, P::UndefinedControlSequence, "",
         "\\{token} is not defined anywhere: not by LaTeX, a loaded package or the document. Check the spelling or "
         "define it with \\newcommand."},
        {C::PackageConflict, P::FileNotFound, "",
         "The file {token} cannot be found, so the package is not installed or its name is misspelt. Fix the name or "
         "install the package."},
        {C::TableFigure, P::FileNotFound, "",
         "The image file {token} cannot be found. Check the path and file name passed to \\includegraphics."},
        {C::PackageConflict, P::PackageError, cause::Incompatible,
         "The {token} package cannot be used together with {detail}. Remove one of the two \\usepackage lines."},
        {C::PackageConflict, P::PackageError, cause::LoadOrder,
         "The {token} package has to be loaded before {detail}. Move its \\usepackage line above the one for {detail}."},
        {C::PackageConflict, P::PackageError, cause::OptionClash,
         "The {token} package is loaded twice with different options. Merge the options into a single \\usepackage."},
        {C::PackageConflict, P::PackageError, "",
         "Two loaded packages conflict with each other. Remove or reorder one of the \\usepackage lines."},
        {C::EncodingFont, P::PackageError, "",
         "The {token} package cannot handle the input at this point. Check the encoding options and the characters "
         "used here."},
        {C::MathMode, P::PackageError, "",
         "An amsmath environment is used in a way it does not support. Check the nesting of the math environments "
         "here."},
        {C::MathMode, P::MissingDollar, cause::MathToken,
         "{token} only works in math mode but is used in running text. Wrap the expression in $...$."},
        {C::MathMode, P::MissingDollar, cause::UnterminatedMath,
         "Inline math opened here is never closed, so the paragraph ends inside math mode. Add the closing $."},
        {C::MathMode, P::MissingDollar, cause::UnclosedEnvironment,
         "The {token} math environment opened here is never closed. Add the matching \\end{{token}}."},
        {C::MathMode, P::MissingDollar, "",
         "TeX left or entered math mode unexpectedly here. Check that every $ has a partner and that math-only "
         "symbols stay inside math."},
        {C::MathMode, P::DisplayMathEnd, "",
         "Display math is closed with a different delimiter than it was opened with. Close $$ with $$ and \\[ with "
         "\\]."},
        {C::MathMode, P::BadMathDelimiter, "",
         "A math delimiter here does not match the one that opened the formula. Use matching pairs such as \\( \\) "
         "or \\[ \\]."},
        {C::MathMode, P::ExtraBraceOrDollar, "",
         "A closing brace or $ appears without a partner inside this formula. Remove it or add the missing opening "
         "delimiter."},
        {C::MathMode, P::MissingBrace, "",
         "A { opened here is never closed. Add the matching }."},
        {C::MathMode, P::EnvironmentMismatch, cause::UnclosedEnvironment,
         "\\begin{{token}} is never closed; TeX only notices at \\end{{detail}} on line {reported}. Add \\end{{token}} "
         "where the environment should stop."},
        {C::MathMode, P::EnvironmentMismatch, cause::OrphanEnd,
         "\\end{{token}} has no matching \\begin{{token}}. Remove it or add the missing \\begin."},
        {C::MathMode, P::EnvironmentMismatch, "",
         "\\begin and \\end do not pair up here. Make every \\begin{...} end with the same name."},
        {C::TableFigure, P::EnvironmentMismatch, cause::UnclosedEnvironment,
         "\\begin{{token}} is never closed; TeX only notices at \\end{{detail}} on line {reported}. Add \\end{{token}} "
         "after the last row or the float's content."},
        {C::TableFigure, P::EnvironmentMismatch, cause::OrphanEnd,
         "\\end{{token}} has no matching \\begin{{token}}. Remove it or add the missing \\begin."},
        {C::TableFigure, P::EnvironmentMismatch, "",
         "A table or float environment is not closed by its own \\end. Make the \\begin and \\end names match."},
        {C::TableFigure, P::ExtraAlignmentTab, "",
         "This row has more cells than the column specification allows. Remove the extra & or add a column to the "
         "tabular preamble."},
        {C::TableFigure, P::MisplacedAlignmentTab, "",
         "An & appears outside any table or alignment. Write \\& for a literal ampersand."},
        {C::TableFigure, P::IllegalArrayArg, "",
         "The column specification contains a character LaTeX does not understand. Use l, c, r, p{...} or load the "
         "package defining the column type."},
        {C::TableFigure, P::NotInOuterPar, "",
         "A float is placed where floats are not allowed, such as inside another float or a box. Move it out to the "
         "main text."},
        {C::TableFigure, P::CaptionOutsideFloat, "",
         "\\caption is used outside a figure or table. Move it inside the float environment."},
        {C::TableFigure, P::FloatError, "",
         "The float has an invalid placement option {token}. Use only h, t, b, p, ! or H."},
        {C::ReferenceError, P::CitationUndefined, "",
         "The citation key {token} is not defined in any bibliography. Check the key or add the entry to the "
         ".bib file."},
        {C::ReferenceError, P::ReferenceUndefined, "",
         "The label {token} is referenced but never defined. Check the spelling or add \\label{{token}}."},
        {C::EncodingFont, P::UnicodeCharacter, "",
         "The character {token} cannot be typeset with the current input and font encoding. Replace it with a LaTeX "
         "command or switch to a Unicode engine."},
        {C::EncodingFont, P::InvalidUtf8, "",
         "This line contains bytes that are not valid UTF-8. Re-save the file as UTF-8 or remove the bad bytes."},
        {C::EncodingFont, P::FontNotLoadable, "",
         "The font {token} cannot be loaded. Install the font or pick a font encoding that has it."},
        {C::EncodingFont, P::EncodingUnknown, "",
         "The font encoding requested is not known. Check the options given to fontenc."},
    };
    return t;
}

constexpr std::string_view kUnclassified =
    "The compiler reported an error the rule catalog does not recognise: {log}. Read the log near line {line} to "
    "decide on a fix.";

const Template* find(std::optional<ErrorCategory> c, LogPattern p, std::string_view cause)
{
    for (const auto& t : catalog())
        if (t.category == c && t.pattern == p && (t.cause.empty() || t.cause == cause)) return &t;
    return nullptr;
}

}  // namespace

bool has_template(std::optional<ErrorCategory> category, LogPattern pattern)
{
    if (!category) return true;
    for (const auto& t : catalog())
        if (t.category == category && t.pattern == pattern && t.cause.empty()) return true;
    return false;
}

std::string render_template(std::string_view text, const Diagnostic& d)
{
    std::string usepackage = "\\usepackage";
    if (!d.provider_options.empty()) usepackage += "[" + d.provider_options + "]";
    usepackage += "{" + d.provider + "}";
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') {
            out += text[i];
            continue;
        }
        auto close = text.find('}', i);
        std::string_view key = close == std::string_view::npos ? "" : text.substr(i + 1, close - i - 1);
        std::optional<std::string> v;
        if (key == "token") v = d.token;
        else if (key == "detail") v = d.detail;
        else if (key == "provider") v = d.provider;
        else if (key == "usepackage") v = usepackage;
        else if (key == "line") v = std::to_string(d.span.line);
        else if (key == "reported") v = d.reported_line ? std::to_string(*d.reported_line) : std::string("?");
        else if (key == "log") v = d.log_message;
        if (!v) {
            out += text[i];
            continue;
        }
        out += *v;
        i = close;
    }
    return out;
}

std::string explain(const Diagnostic& d)
{
    if (!d.category) return render_template(kUnclassified, d);
    const Template* t = find(d.category, d.pattern, d.cause);
    if (!t)
        throw MissingTemplate("no explanation for " + std::string(to_string(*d.category)) + "/" +
                              std::string(to_string(d.pattern)));
    return render_template(t->text, d);
}

}  // namespace texrepair
