#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "log_json.hpp"
#include "texrepair/log.hpp"

using namespace texrepair;
using nlohmann::json;
using texrepair::testing::to_json;

namespace {

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_SUITE_BEGIN("log");

TEST_CASE("unwrap")
{
    CHECK(unwrap("").empty());

    std::string warning =
        "Package mypkg Warning: This is a deliberately long warning message that goes on and on past the "
        "79 column limit by a lot";
    REQUIRE(warning.size() == 120);
    std::string wrapped = warning.substr(0, 79) + "\n" + warning.substr(79) + "\n";
    auto lines = unwrap(wrapped);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0] == warning);

    std::string short_log = "a\nbb\n\nccc";
    CHECK(unwrap(short_log) == std::vector<std::string>{"a", "bb", "", "ccc"});

    // Configurable width.
    CHECK(unwrap("abc\ndef", 3) == std::vector<std::string>{"abcdef"});
}

TEST_CASE("undefined control sequence with context")
{
    auto report = parse_log("(./main.tex\n! Undefined control sequence.\nl.9 \\foo\n        \n\n)");
    REQUIRE(report.records.size() == 1);
    const auto& r = report.records[0];
    CHECK(r.severity == Severity::Error);
    CHECK(r.pattern == LogPattern::UndefinedControlSequence);
    CHECK(r.token == "foo");
    CHECK(r.reported_line == 9u);
    CHECK(r.file == "./main.tex");
    CHECK_FALSE(report.clean);
}

TEST_CASE("environment undefined")
{
    auto report = parse_log("! LaTeX Error: Environment algorithm undefined.\n\nl.9 \\begin{algorithm}\n\n");
    REQUIRE(report.records.size() == 1);
    CHECK(report.records[0].pattern == LogPattern::EnvironmentUndefined);
    CHECK(report.records[0].token == "algorithm");
    CHECK(report.records[0].message.find("algorithm") != std::string::npos);
}

TEST_CASE("citation warning")
{
    auto report = parse_log("LaTeX Warning: Citation `smith99' on page 1 undefined on input line 12.\n");
    REQUIRE(report.records.size() == 1);
    CHECK(report.records[0].severity == Severity::Warning);
    CHECK(report.records[0].pattern == LogPattern::CitationUndefined);
    CHECK(report.records[0].token == "smith99");
    CHECK(report.records[0].reported_line == 12u);
    CHECK(report.clean);
}

TEST_CASE("unrecognized errors are kept as unclassified")
{
    auto report = parse_log("! Something odd happened.\nl.3 x\n\n");
    REQUIRE(report.records.size() == 1);
    CHECK(report.records[0].message == "unclassified");
    CHECK(report.records[0].raw_excerpt.find("Something odd") != std::string::npos);
}

TEST_CASE("file stack degrades to unknown on imbalance")
{
    auto report = parse_log("))) (./a.tex (./b.tex)\n! Undefined control sequence.\nl.1 \\x\n\n)))\n! Undefined control sequence.\nl.2 \\y\n\n");
    REQUIRE(report.records.size() == 2);
    CHECK(report.records[0].file == "./a.tex");
    CHECK(report.records[1].file == "unknown");
}

TEST_CASE("parse_log is total on arbitrary bytes")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        std::string junk;
        std::size_t n = rng() % 400;
        for (std::size_t k = 0; k < n; ++k) {
            static const std::string pool = "! l.0123456789()\n\\{}`'LaTeX Error: Warning Package  ";
            junk += (rng() % 5 == 0) ? static_cast<char>(rng() % 256) : pool[rng() % pool.size()];
        }
        auto report = parse_log(junk);
        bool has_error = false;
        for (const auto& r : report.records) {
            has_error |= r.severity == Severity::Error;
            if (r.reported_line) CHECK(*r.reported_line >= 0u);
        }
        CHECK(report.clean == !has_error);
    }
}

TEST_CASE("golden engine logs")
{
    namespace fs = std::filesystem;
    fs::path dir = fs::path(TEXREPAIR_TEST_DATA) / "logs";
    std::vector<fs::path> logs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".log") logs.push_back(e.path());
    std::sort(logs.begin(), logs.end());
    REQUIRE(logs.size() >= 12);
    bool update = std::getenv("TEXREPAIR_UPDATE_GOLDEN") != nullptr;
    for (const auto& log : logs) {
        CAPTURE(log.filename().string());
        json actual = to_json(parse_log(read_file(log)));
        fs::path golden = log;
        golden.replace_extension(".json");
        if (update) {
            std::ofstream(golden) << actual.dump(2) << "\n";
            continue;
        }
        REQUIRE(fs::exists(golden));
        json expected = json::parse(read_file(golden));
        CHECK(actual == expected);
    }
}

TEST_SUITE_END();
