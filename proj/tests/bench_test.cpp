#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <set>

#include "test_support.hpp"
#include "texrepair/bench.hpp"
#include "texrepair/checker.hpp"
#include "texrepair/parser.hpp"

using namespace texrepair;

namespace {

std::string corpus()
{
    return TEXREPAIR_CORPUS_DIR;
}

SourceDocument load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return SourceDocument(ss.str(), path);
}

bool has_errors(const LogReport& log)
{
    return std::any_of(log.records.begin(), log.records.end(), [](const LogRecord& r) {
        return r.severity == Severity::Error || r.pattern == LogPattern::CitationUndefined ||
               r.pattern == LogPattern::ReferenceUndefined;
    });
}

}  // namespace

TEST_CASE("seed corpus is clean")
{
    auto seeds = corpus_seeds(corpus());
    REQUIRE(seeds.size() >= 50);
    for (const auto& f : seeds) {
        CAPTURE(f);
        SourceDocument doc = load(f);
        Ast ast = parse(doc);
        CHECK(ast.recovery_count == 0);
        LogReport log = proxy_compile(doc, ast, default_db());
        if (has_errors(log)) {
            for (const auto& r : log.records) MESSAGE(r.message << " line " << r.reported_line.value_or(0));
        }
        CHECK_FALSE(has_errors(log));
    }
}

TEST_CASE("category distribution")
{
    auto d500 = default_distribution(500);
    CHECK(d500[ErrorCategory::UndefinedControl] == 112);
    CHECK(d500[ErrorCategory::MathMode] == 98);
    CHECK(d500[ErrorCategory::PackageConflict] == 74);
    CHECK(d500[ErrorCategory::TableFigure] == 86);
    CHECK(d500[ErrorCategory::ReferenceError] == 79);
    CHECK(d500[ErrorCategory::EncodingFont] == 51);

    for (std::size_t total : {0u, 1u, 7u, 50u, 120u, 333u}) {
        auto d = default_distribution(total);
        std::size_t sum = 0;
        for (auto& [_, n] : d) sum += n;
        CHECK(sum == total);
    }
    auto d50 = default_distribution(50);
    CHECK(d50[ErrorCategory::UndefinedControl] == 11);
    CHECK(d50[ErrorCategory::MathMode] == 10);
    CHECK(d50[ErrorCategory::PackageConflict] == 7);
    CHECK(d50[ErrorCategory::TableFigure] == 9);
    CHECK(d50[ErrorCategory::ReferenceError] == 8);
    CHECK(d50[ErrorCategory::EncodingFont] == 5);
}

TEST_CASE("injection is deterministic and the ground truth is honest")
{
    auto seeds = corpus_seeds(corpus());
    REQUIRE(!seeds.empty());
    SourceDocument seed = load(seeds[3]);
    for (ErrorCategory cat : kAllCategories) {
        for (std::uint64_t s : {1u, 2u, 99u}) {
            CAPTURE(to_string(cat));
            CAPTURE(s);
            BenchCase a, b;
            try {
                a = inject(seed, cat, s);
            } catch (const NotInjectable&) {
                CHECK_THROWS_AS(inject(seed, cat, s), NotInjectable);
                continue;
            }
            b = inject(seed, cat, s);
            CHECK(a.broken_doc.text() == b.broken_doc.text());
            CHECK(a.truth_line == b.truth_line);
            CHECK(a.injection_rule == b.injection_rule);
            CHECK(a.broken_doc.text() != seed.text());
            CHECK(a.truth_line >= 1);
            CHECK(a.truth_line <= a.broken_doc.line_count());
            // the seed and the broken doc agree outside the injected span
            const std::string& x = seed.text();
            const std::string& y = a.broken_doc.text();
            std::size_t head = a.injection_span.start;
            std::size_t tail = y.size() - a.injection_span.end;
            if (a.injection_rule != "swap-order") {
                CHECK(x.compare(0, head, y, 0, head) == 0);
                CHECK(x.compare(x.size() - tail, tail, y, y.size() - tail, tail) == 0);
            }
            Ast ast = parse(a.broken_doc);
            CHECK(has_errors(proxy_compile(a.broken_doc, ast, default_db())));
        }
    }
}

TEST_CASE("seeds that cannot take an error say so")
{
    SourceDocument bare("\\documentclass{article}\n\\begin{document}\nPlain words only.\n\\end{document}\n");
    CHECK_THROWS_AS(inject(bare, ErrorCategory::TableFigure, 1), NotInjectable);
    CHECK_THROWS_AS(inject(bare, ErrorCategory::ReferenceError, 1), NotInjectable);
    SourceDocument broken("\\documentclass{article}\n\\begin{document}\n\\begin{itemize}\n\\end{document}\n");
    CHECK_THROWS_AS(inject(broken, ErrorCategory::MathMode, 1), NotInjectable);

    CHECK_THROWS_AS(build_suite("/nonexistent/corpus", default_distribution(6), 1), InsufficientCorpus);
    auto dir = std::filesystem::temp_directory_path() / "texrepair-bare-corpus";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "only.tex");
        out << bare.text();
    }
    CHECK_THROWS_AS(build_suite(dir.string(), {{ErrorCategory::TableFigure, 1}}, 1), InsufficientCorpus);
    std::filesystem::remove_all(dir);
}

TEST_CASE("suite building covers the requested mix")
{
    auto counts = default_distribution(30);
    auto suite = build_suite(corpus(), counts, 7);
    REQUIRE(suite.size() == 30);
    std::set<std::string> ids;
    std::map<ErrorCategory, std::size_t> seen;
    for (const auto& c : suite) {
        ids.insert(c.id);
        seen[c.category]++;
    }
    CHECK(ids.size() == 30);
    for (auto& [cat, n] : counts) CHECK(seen[cat] == n);

    auto again = build_suite(corpus(), counts, 7);
    for (std::size_t i = 0; i < suite.size(); ++i) CHECK(suite[i].broken_doc.text() == again[i].broken_doc.text());
}

TEST_CASE("scoring arithmetic")
{
    std::vector<CaseResult> rs;
    auto add = [&](ErrorCategory c, bool type, bool loc, bool valid, std::optional<bool> compiles) {
        CaseResult r;
        r.category = c;
        r.detected = type;
        r.type_match = type;
        r.loc_match = loc;
        r.fix_attempted = true;
        r.fix_valid = valid;
        r.fix_compiles = compiles;
        rs.push_back(r);
    };
    add(ErrorCategory::MathMode, true, true, true, true);
    add(ErrorCategory::MathMode, true, false, true, false);
    add(ErrorCategory::MathMode, false, true, false, std::nullopt);
    add(ErrorCategory::ReferenceError, true, true, true, std::nullopt);

    BenchReport rep = score(rs);
    const Metrics& m = rep.per_category.at(ErrorCategory::MathMode);
    CHECK(m.n == 3);
    CHECK(m.da_hits == 1);
    CHECK(m.fa_hits == 1);
    CHECK(*m.da == doctest::Approx(33.3));
    CHECK(*m.fa == doctest::Approx(33.3));
    CHECK(*rep.per_category.at(ErrorCategory::ReferenceError).fa == doctest::Approx(100.0));
    CHECK(rep.overall.n == 4);
    CHECK(*rep.overall.da == doctest::Approx(50.0));
    CHECK_FALSE(rep.per_category.at(ErrorCategory::EncodingFont).da.has_value());

    std::string text = emit_report(rep, ReportFormat::Text);
    CHECK(text.find("---") != std::string::npos);
    CHECK(text.find("33.3") != std::string::npos);
}

TEST_CASE("empty report")
{
    BenchReport rep = score({});
    CHECK(rep.overall.n == 0);
    CHECK_FALSE(rep.overall.da.has_value());
    std::string text = emit_report(rep, ReportFormat::Text);
    CHECK(text.find("---") != std::string::npos);
    CHECK(text.find("nan") == std::string::npos);
}

TEST_CASE("report formats")
{
    std::vector<CaseResult> rs(3);
    rs[0].category = ErrorCategory::TableFigure;
    rs[0].type_match = rs[0].loc_match = true;
    rs[1].category = ErrorCategory::EncodingFont;
    rs[1].fix_valid = true;
    rs[2].category = ErrorCategory::UndefinedControl;
    BenchReport rep = score(rs, {{"mode", "proxy"}, {"seed", "42"}});

    std::string json = emit_report(rep, ReportFormat::Json);
    CHECK(parse_report_json(json) == rep);
    CHECK(emit_report(parse_report_json(json), ReportFormat::Json) == json);

    std::string csv = emit_report(rep, ReportFormat::Csv);
    CHECK(csv.rfind("category,n,da,fa\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);

    BenchReport baseline = score({});
    std::string text = emit_report(rep, ReportFormat::Text, {{"baseline", baseline}});
    auto b = text.find("baseline");
    auto t = text.find("texrepair");
    CHECK(b != std::string::npos);
    CHECK(t != std::string::npos);
    CHECK(b < t);
}

TEST_CASE("evaluation of a single case")
{
    auto seeds = corpus_seeds(corpus());
    SourceDocument seed = load(seeds[0]);
    BenchCase c = inject(seed, ErrorCategory::ReferenceError, 5);
    c.id = "ref";
    CaseResult r = evaluate_case(c, EvalConfig{});
    CHECK(r.detected);
    CHECK(r.type_match);
    CHECK(r.loc_match);
    CHECK(r.fix_valid);
    CHECK(r.fix_success());

    // a clean document is not detected and nothing is attempted
    BenchCase clean = c;
    clean.broken_doc = seed;
    CaseResult rc = evaluate_case(clean, EvalConfig{});
    CHECK_FALSE(rc.detected);
    CHECK_FALSE(rc.fix_attempted);
    CHECK_FALSE(rc.fix_success());
}
