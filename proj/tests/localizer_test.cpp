#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "texrepair/checker.hpp"
#include "texrepair/explain.hpp"
#include "texrepair/localizer.hpp"
#include "texrepair/parser.hpp"

using namespace texrepair;

namespace {

struct Run {
    SourceDocument doc;
    Ast ast;
    LogReport log;
    std::vector<Diagnostic> diags;
};

Run run(const std::string& text)
{
    Run r{SourceDocument(text), {}, {}, {}};
    r.ast = parse(r.doc);
    r.log = proxy_compile(r.doc, r.ast, default_db());
    r.diags = diagnose(r.doc, r.ast, r.log, default_db());
    return r;
}

std::string wrap(const std::string& preamble, const std::string& body)
{
    return "\\documentclass{article}\n" + preamble + "\\begin{document}\n" + body + "\\end{document}\n";
}

LogRecord record(LogPattern p, std::optional<std::size_t> line, std::optional<std::string> token)
{
    LogRecord r;
    r.pattern = p;
    r.message = "x";
    r.reported_line = line;
    r.token = std::move(token);
    return r;
}

}  // namespace

TEST_CASE("category names round-trip")
{
    CHECK(kAllCategories.size() == 6);
    for (auto c : kAllCategories) CHECK(category_from_string(to_string(c)) == c);
    CHECK_FALSE(category_from_string("Nope"));
}

TEST_CASE("algorithm without its package: one diagnostic on the begin line")
{
    auto r = run(testing::kAlgorithmDoc);
    REQUIRE(r.diags.size() == 1);
    const auto& d = r.diags[0];
    CHECK(d.category == ErrorCategory::PackageConflict);
    CHECK(d.span.line == 9);
    CHECK(r.doc.slice(d.span) == "\\begin{algorithm}");
    CHECK(d.provider == "algorithm2e");
    CHECK(d.message ==
          "algorithm env. requires the algorithm2e package, which is not loaded. Add "
          "\\usepackage[ruled,vlined]{algorithm2e} to the preamble.");
    CHECK(d.evidence_records.size() == 4);
    CHECK(d.confidence == Confidence::High);
    CHECK_FALSE(d.evidence_nodes.empty());
    CHECK(d.evidence_nodes[0].find("Environment(algorithm)") != std::string::npos);
}

TEST_CASE("clean document gives no diagnostics")
{
    auto r = run(wrap("", "Hello.\n"));
    CHECK(r.diags.empty());
    LogReport empty;
    CHECK(diagnose(r.doc, empty, default_db()).empty());
}

TEST_CASE("unclosed environment reported at end of document resolves to its begin")
{
    std::string body = "Intro.\n\\begin{itemize}\n\\item one\n\\item two\n";
    for (int i = 0; i < 30; ++i) body += "Filler line " + std::to_string(i) + ".\n";
    auto r = run(wrap("", body));
    REQUIRE_FALSE(r.diags.empty());
    const auto& d = r.diags[0];
    CHECK(d.category == ErrorCategory::MathMode);
    CHECK(d.span.line == 4);
    CHECK(d.reported_line != 4);
    CHECK(d.cause == cause::UnclosedEnvironment);
    CHECK(d.token == "itemize");
}

TEST_CASE("unclosed equation collapses into one diagnostic")
{
    auto r = run(wrap("", "Text.\n\\begin{equation}\na = b\n\nMore text.\n"));
    REQUIRE(r.diags.size() == 1);
    CHECK(r.diags[0].span.line == 4);
    CHECK(r.diags[0].category == ErrorCategory::MathMode);
}

TEST_CASE("undefined command is localized to the command node")
{
    auto r = run(wrap("", "One.\n\\foo bar\n"));
    REQUIRE(r.diags.size() == 1);
    CHECK(r.diags[0].category == ErrorCategory::UndefinedControl);
    CHECK(r.doc.slice(r.diags[0].span) == "\\foo");
    CHECK(r.diags[0].confidence == Confidence::High);
    CHECK(r.diags[0].id == "UndefinedControl@4:1");
}

TEST_CASE("command from an unloaded package is a package problem")
{
    auto r = run(wrap("", "\\begin{tabular}{ll}\n\\toprule\na & b \\\\\n\\bottomrule\n\\end{tabular}\n"));
    REQUIRE(r.diags.size() == 1);
    CHECK(r.diags[0].category == ErrorCategory::PackageConflict);
    CHECK(r.diags[0].provider == "booktabs");
    CHECK(r.diags[0].span.line == 4);
    CHECK(r.diags[0].evidence_records.size() == 2);
}

TEST_CASE("math errors")
{
    SUBCASE("script in text")
    {
        auto r = run(wrap("", "The value x^2 is big.\n"));
        REQUIRE(r.diags.size() == 1);
        CHECK(r.diags[0].category == ErrorCategory::MathMode);
        CHECK(r.doc.slice(r.diags[0].span) == "x^2");
    }
    SUBCASE("math-only command in text")
    {
        auto r = run(wrap("", "We have \\alpha here.\n"));
        REQUIRE(r.diags.size() == 1);
        CHECK(r.doc.slice(r.diags[0].span) == "\\alpha");
        CHECK(r.diags[0].cause == cause::MathToken);
    }
    SUBCASE("unterminated inline math")
    {
        auto r = run(wrap("", "Let $a + b be.\n\nNext.\n"));
        REQUIRE_FALSE(r.diags.empty());
        CHECK(r.diags[0].span.line == 3);
        CHECK(r.diags[0].cause == cause::UnterminatedMath);
    }
}

TEST_CASE("table and float errors")
{
    auto r = run(wrap("", "\\begin{tabular}{ll}\na & b & c \\\\\n\\end{tabular}\n"));
    REQUIRE(r.diags.size() == 1);
    CHECK(r.diags[0].category == ErrorCategory::TableFigure);
    CHECK(r.diags[0].cause == cause::ExtraCell);
    CHECK(r.doc.slice(r.diags[0].span) == "&");
    CHECK(r.diags[0].span.line == 4);

    auto f = run(wrap("", "\\begin{figure}[hx]\n\\centering\n\\caption{A}\n\\end{figure}\n"));
    REQUIRE(f.diags.size() == 1);
    CHECK(f.diags[0].cause == cause::FloatPlacement);
    CHECK(f.doc.slice(f.diags[0].span) == "[hx]");
}

TEST_CASE("undefined citation and reference")
{
    auto r = run(wrap("", "See \\ref{sec:none}.\n\n\\begin{thebibliography}{9}\n\\bibitem{a} A.\n\\end{thebibliography}\n"
                          "And \\cite{b}.\n"));
    REQUIRE(r.diags.size() == 2);
    CHECK(r.diags[0].category == ErrorCategory::ReferenceError);
    CHECK(r.diags[0].span.line == 3);
    CHECK(r.diags[1].span.line == 8);
    CHECK(r.diags[1].token == "b");
}

TEST_CASE("encoding errors")
{
    auto r = run(wrap("\\usepackage[T1]{fontenc}\n", "Price \xE2\x82\xAC 5 and \xFF bytes.\n"));
    REQUIRE_FALSE(r.diags.empty());
    for (const auto& d : r.diags) {
        CHECK(d.category == ErrorCategory::EncodingFont);
        CHECK(d.span.line == 4);
    }
}

TEST_CASE("package conflicts")
{
    auto r = run(wrap("\\usepackage{subfig}\n\\usepackage{subcaption}\n", "x\n"));
    REQUIRE(r.diags.size() == 1);
    CHECK(r.diags[0].category == ErrorCategory::PackageConflict);
    CHECK(r.diags[0].cause == cause::Incompatible);
    CHECK(r.diags[0].span.line == 3);
}

TEST_CASE("localize fallbacks")
{
    SourceDocument doc(wrap("", "Hello.\n\nWorld.\n"));
    Ast ast = parse(doc);
    auto none = localize(record(LogPattern::Unclassified, std::nullopt, std::nullopt), ast, doc);
    CHECK(none.confidence == Confidence::Low);
    CHECK(none.span.start == 0);

    auto far = localize(record(LogPattern::UndefinedControlSequence, 4, std::string("nothere")), ast, doc);
    CHECK(far.confidence == Confidence::Low);
    CHECK(far.span.line == 4);

    auto past = localize(record(LogPattern::Unclassified, 999, std::nullopt), ast, doc);
    CHECK(past.confidence == Confidence::Low);
    CHECK(past.span.end <= doc.size());
}

TEST_CASE("widened window lowers confidence")
{
    std::string body = "\\foo\n";
    for (int i = 0; i < 3; ++i) body += "line\n";
    SourceDocument doc(wrap("", body));
    Ast ast = parse(doc);
    auto l = localize(record(LogPattern::UndefinedControlSequence, 7, std::string("foo")), ast, doc);
    CHECK(l.confidence == Confidence::Medium);
    CHECK(l.span.line == 3);
}

TEST_CASE("unclassified errors are kept")
{
    LogReport log;
    LogRecord r = record(LogPattern::Unclassified, 3, std::nullopt);
    r.message = "unclassified";
    log.records.push_back(r);
    SourceDocument doc(wrap("", "a\n"));
    auto ds = diagnose(doc, log, default_db());
    REQUIRE(ds.size() == 1);
    CHECK_FALSE(ds[0].classified());
    CHECK_FALSE(ds[0].message.empty());
}

TEST_CASE("bad boxes go to the advisory channel")
{
    LogReport log;
    LogRecord r = record(LogPattern::OverfullBox, 3, std::nullopt);
    r.severity = Severity::BadBox;
    log.records.push_back(r);
    SourceDocument doc(wrap("", "a\n"));
    CHECK(diagnose(doc, log, default_db()).empty());
    CHECK(advisories(log).size() == 1);
}

TEST_CASE("every classification has an explanation template")
{
    for (const auto& [cat, pattern] : classification_table()) {
        INFO(to_string(cat) << " / " << to_string(pattern));
        CHECK(has_template(cat, pattern));
        Diagnostic d;
        d.category = cat;
        d.pattern = pattern;
        d.token = "x";
        std::string msg = explain(d);
        CHECK_FALSE(msg.empty());
        CHECK(msg.back() == '.');
    }
    Diagnostic d;
    d.category = ErrorCategory::TableFigure;
    d.pattern = LogPattern::UnicodeCharacter;
    CHECK_THROWS_AS(explain(d), MissingTemplate);
}

TEST_CASE("diagnose invariants hold on mutated documents")
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        std::string text = testing::mutate(testing::kAlgorithmDoc, rng);
        auto r = run(text);
        auto again = diagnose(r.doc, r.ast, r.log, default_db());
        REQUIRE(again.size() == r.diags.size());
        std::size_t errors = 0;
        for (const auto& rec : r.log.records) errors += rec.severity == Severity::Error;
        std::size_t evidence = 0;
        for (std::size_t k = 0; k < r.diags.size(); ++k) {
            const auto& d = r.diags[k];
            CHECK(d.id == again[k].id);
            CHECK(d.span.end <= r.doc.size());
            CHECK_FALSE(d.message.empty());
            CHECK_FALSE(d.evidence_records.empty());
            if (k > 0) CHECK(r.diags[k - 1].span.start <= d.span.start);
            evidence += d.evidence_records.size();
        }
        CHECK(evidence >= errors);
    }
}
