#include <doctest.h>

#include <sys/stat.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "texrepair/cli.hpp"

using namespace texrepair;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args, const std::string& input = "")
{
    std::istringstream in(input);
    std::ostringstream out, err;
    int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

/// A scratch directory removed at scope exit.
struct Scratch {
    fs::path dir;
    Scratch()
    {
        static int n = 0;
        dir = fs::temp_directory_path() / ("texrepair-cli-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
        fs::create_directories(dir);
    }
    ~Scratch()
    {
        std::error_code ec;
        fs::permissions(dir, fs::perms::owner_all, fs::perm_options::add, ec);
        fs::remove_all(dir, ec);
    }
    std::string write(const std::string& name, const std::string& text) const
    {
        std::ofstream out(dir / name, std::ios::binary);
        out << text;
        return (dir / name).string();
    }
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kClean = "\\documentclass{article}\n\\begin{document}\nAll good here.\n\\end{document}\n";

std::string log_path(const char* name)
{
    return std::string(TEXREPAIR_TEST_DATA) + "/logs/" + name;
}

}  // namespace

TEST_CASE("check on the editor scenario")
{
    Scratch s;
    std::string doc = s.write("main.tex", texrepair::testing::kAlgorithmDoc);

    Run human = cli({"check", doc});
    CHECK(human.code == kExitFindings);
    CHECK(human.out.find("Compilation Error -- Line 9") != std::string::npos);
    CHECK(human.out.find("algorithm2e") != std::string::npos);
    CHECK(human.out.find("+\\usepackage[ruled,vlined]{algorithm2e}") != std::string::npos);

    Run js = cli({"--format", "json", "check", doc});
    CHECK(js.code == kExitFindings);
    CHECK(check_diagnostics_schema(js.out).empty());
    auto j = nlohmann::json::parse(js.out);
    REQUIRE(j["diagnostics"].size() == 1);
    CHECK(j["diagnostics"][0]["category"] == "PackageConflict");
    CHECK(j["diagnostics"][0]["line"] == 9);
    CHECK(j["diagnostics"][0]["fix"]["status"] == "fixed");

    // the same answer from the engine's own log
    Run with_log = cli({"--format", "json", "--log", log_path("03_environment_undefined.log"), "check", doc});
    CHECK(with_log.code == kExitFindings);
    auto jl = nlohmann::json::parse(with_log.out);
    REQUIRE(jl["diagnostics"].size() == 1);
    CHECK(jl["diagnostics"][0]["category"] == "PackageConflict");
    CHECK(jl["diagnostics"][0]["line"] == 9);

    // flags may also follow the subcommand
    Run after = cli({"check", doc, "--format", "json"});
    CHECK(after.code == kExitFindings);
    CHECK(check_diagnostics_schema(after.out).empty());
}

TEST_CASE("check on a clean document")
{
    Scratch s;
    std::string doc = s.write("clean.tex", kClean);
    Run human = cli({"check", doc});
    CHECK(human.code == kExitOk);
    CHECK(human.out.empty());
    Run js = cli({"--format", "json", "check", doc});
    CHECK(js.code == kExitOk);
    CHECK(check_diagnostics_schema(js.out).empty());
    CHECK(nlohmann::json::parse(js.out)["diagnostics"].empty());
}

TEST_CASE("tool failures exit 2")
{
    Scratch s;
    std::string doc = s.write("clean.tex", kClean);
    std::string junk = s.write("junk.log", "this is not what an engine writes\n");
    CHECK(cli({"check", (s.dir / "missing.tex").string()}).code == kExitFailure);
    CHECK(cli({"check", s.dir.string()}).code == kExitFailure);
    CHECK(cli({"--log", junk, "check", doc}).code == kExitFailure);
    CHECK(cli({"--log", (s.dir / "nope.log").string(), "check", doc}).code == kExitFailure);
    CHECK(cli({"--db", (s.dir / "nope.json").string(), "check", doc}).code == kExitFailure);
    CHECK(cli({"check"}).code == kExitFailure);
    CHECK(cli({"frobnicate"}).code == kExitFailure);
    CHECK(cli({"--format", "yaml", "check", doc}).code == kExitFailure);
    CHECK(cli({"--engine", (s.dir / "no-such-engine").string(), "check", doc}).code == kExitFailure);
    CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("fix in apply mode")
{
    Scratch s;
    std::string doc = s.write("main.tex", texrepair::testing::kAlgorithmDoc);
    Run r = cli({"--fix", "apply", "fix", doc});
    CHECK(r.code == kExitOk);
    std::string fixed = slurp(doc);
    CHECK(fixed.find("\\usepackage[ruled,vlined]{algorithm2e}\n") != std::string::npos);
    CHECK(slurp(doc + ".bak") == texrepair::testing::kAlgorithmDoc);
    // nothing left behind by the write-rename
    for (const auto& e : fs::directory_iterator(s.dir)) CHECK(e.path().string().find(".tmp-") == std::string::npos);
    CHECK(cli({"check", doc}).code == kExitOk);
}

TEST_CASE("fix refuses a read-only document")
{
    Scratch s;
    std::string doc = s.write("ro.tex", texrepair::testing::kAlgorithmDoc);
    fs::permissions(doc, fs::perms::owner_read | fs::perms::group_read | fs::perms::others_read);
    CHECK(cli({"--fix", "apply", "fix", doc}).code == kExitFailure);
    CHECK(slurp(doc) == texrepair::testing::kAlgorithmDoc);
    // suggesting never writes, so it is fine
    CHECK(cli({"fix", doc}).code == kExitOk);
}

TEST_CASE("fix suggest mode")
{
    Scratch s;
    std::string clean = s.write("clean.tex", kClean);
    Run r = cli({"fix", clean});
    CHECK(r.code == kExitOk);
    CHECK(r.out.empty());

    std::string doc = s.write("main.tex", texrepair::testing::kAlgorithmDoc);
    Run sug = cli({"fix", doc});
    CHECK(sug.code == kExitOk);
    CHECK(sug.out.find("+\\usepackage[ruled,vlined]{algorithm2e}") != std::string::npos);
    CHECK(slurp(doc) == texrepair::testing::kAlgorithmDoc);
    CHECK_FALSE(fs::exists(doc + ".bak"));

    Run js = cli({"--format", "json", "fix", doc});
    auto j = nlohmann::json::parse(js.out);
    CHECK(j["fixes"].size() == 1);
    CHECK(j["fixes"][0]["status"] == "fixed");
    CHECK(j["remaining"].empty());
}

TEST_CASE("an unclassified error is listed and left unfixed")
{
    Scratch s;
    std::string doc = s.write("loop.tex", "\\documentclass{article}\n\\def\\foo{\\foo}\n\\begin{document}\n"
                                          "Hello.\n\n\n\\foo\n\\end{document}\n");
    Run r = cli({"--log", log_path("16_unclassified_capacity.log"), "fix", doc});
    CHECK(r.code == kExitFindings);
    CHECK(r.out.find("remaining") != std::string::npos);
    Run c = cli({"--format", "json", "--log", log_path("16_unclassified_capacity.log"), "check", doc});
    CHECK(c.code == kExitFindings);
    CHECK(check_diagnostics_schema(c.out).empty());
    auto j = nlohmann::json::parse(c.out);
    REQUIRE(!j["diagnostics"].empty());
    CHECK(j["diagnostics"][0]["category"].is_null());
    CHECK(j["diagnostics"][0]["fix"]["status"] == "no-candidates");
}

TEST_CASE("interactive fixing asks per diagnostic")
{
    Scratch s;
    std::string doc = s.write("main.tex", texrepair::testing::kAlgorithmDoc);
    Run no = cli({"--fix", "interactive", "fix", doc}, "n\n");
    CHECK(no.code == kExitFindings);
    CHECK(no.out.find("Apply this fix? [y/N]") != std::string::npos);
    CHECK(slurp(doc) == texrepair::testing::kAlgorithmDoc);

    Run yes = cli({"--fix", "interactive", "fix", doc}, "y\n");
    CHECK(yes.code == kExitOk);
    CHECK(slurp(doc).find("algorithm2e") != std::string::npos);

    // end of input means no
    std::string other = s.write("other.tex", texrepair::testing::kAlgorithmDoc);
    CHECK(cli({"--fix", "interactive", "fix", other}, "").code == kExitFindings);
}

TEST_CASE("explain")
{
    Scratch s;
    std::string doc = s.write("main.tex", texrepair::testing::kAlgorithmDoc);
    Run r = cli({"explain", doc});
    CHECK(r.code == kExitFindings);
    CHECK(r.out.find("Line 9: PackageConflict") != std::string::npos);
    CHECK(r.out.find("algorithm2e") != std::string::npos);
}

TEST_CASE("db subcommands")
{
    Scratch s;
    Run v = cli({"db", "validate"});
    CHECK(v.code == kExitOk);
    CHECK(v.out.rfind("ok: ", 0) == 0);
    Run l = cli({"--format", "json", "db", "list"});
    CHECK(l.code == kExitOk);
    auto j = nlohmann::json::parse(l.out);
    CHECK(j.size() >= 50);
    CHECK(cli({"db", "list"}).out.find("algorithm2e") != std::string::npos);

    std::string bad = s.write("bad.json", "{\"version\": 1, \"packages\": [{\"name\": 3}]}");
    Run b = cli({"--db", bad, "db", "validate"});
    CHECK(b.code == kExitFindings);
    CHECK_FALSE(b.out.empty());
    CHECK(cli({"--db", (s.dir / "none.json").string(), "db", "validate"}).code == kExitFailure);
    CHECK(cli({"db", "frob"}).code == kExitFailure);
}

TEST_CASE("bench subcommand")
{
    std::string corpus = TEXREPAIR_CORPUS_DIR;
    Run r = cli({"--total", "50", "--seed", "3", "bench", corpus});
    CHECK(r.code == kExitOk);
    for (const char* col : {"Overall", "Undef. ctrl.", "Math mode", "Pkg.", "Table/fig.", "Refs.", "Enc./font"})
        CHECK(r.out.find(col) != std::string::npos);

    Run a = cli({"--format", "json", "--total", "30", "--seed", "9", "bench", corpus});
    Run b = cli({"--format", "json", "--total", "30", "--seed", "9", "--jobs", "1", "bench", corpus});
    CHECK(a.code == kExitOk);
    CHECK(a.out == b.out);
    auto j = nlohmann::json::parse(a.out);
    CHECK(j["categories"].size() == 6);
    CHECK(j["overall"]["n"] == 30);
    CHECK(j["config"]["mode"] == "proxy");

    Run csv = cli({"--format", "csv", "--total", "12", "bench", corpus});
    CHECK(csv.out.rfind("category,n,da,fa\n", 0) == 0);

    Scratch s;
    std::string base = s.write("base.json", a.out);
    Run with = cli({"--baseline", "earlier=" + base, "--total", "12", "bench", corpus});
    CHECK(with.code == kExitOk);
    CHECK(with.out.find("earlier") != std::string::npos);

    CHECK(cli({"bench", (s.dir / "no-corpus").string()}).code == kExitFailure);
    CHECK(cli({"--total", "6", "bench", s.dir.string()}).code == kExitFailure);
}

TEST_CASE("exit codes over synthetic inputs")
{
    Scratch s;
    std::mt19937_64 rng(11);
    auto seeds = texrepair::testing::corpus_files();
    REQUIRE(!seeds.empty());
    for (int trial = 0; trial < 60; ++trial) {
        std::string text = slurp(seeds[rng() % seeds.size()].string());
        if (trial % 3) text = texrepair::testing::mutate(text, rng);
        std::string doc = s.write("t" + std::to_string(trial) + ".tex", text);
        CAPTURE(text);
        Run c = cli({"--format", "json", "check", doc});
        REQUIRE((c.code == kExitOk || c.code == kExitFindings));
        auto problems = check_diagnostics_schema(c.out);
        CHECK(problems.empty());
        auto j = nlohmann::json::parse(c.out);
        CHECK((c.code == kExitFindings) == !j["diagnostics"].empty());

        Run f = cli({"--format", "json", "fix", doc});
        REQUIRE((f.code == kExitOk || f.code == kExitFindings));
        CHECK((f.code == kExitOk) == nlohmann::json::parse(f.out)["remaining"].empty());
        if (c.code == kExitOk) CHECK(f.code == kExitOk);
    }
}

TEST_CASE("schema checker rejects what it should")
{
    CHECK_FALSE(check_diagnostics_schema("not json").empty());
    CHECK_FALSE(check_diagnostics_schema("[]").empty());
    CHECK_FALSE(check_diagnostics_schema(R"({"version":2,"file":"a","diagnostics":[]})").empty());
    CHECK(check_diagnostics_schema(R"({"version":1,"file":"a","diagnostics":[]})").empty());
    const char* good = R"({"version":1,"file":"a","diagnostics":[{"id":"x","category":"MathMode","line":3,
        "span":{"start":1,"end":4},"message":"m","confidence":"high","fix":{"status":"fixed","diff":""}}]})";
    CHECK(check_diagnostics_schema(good).empty());
    std::string extra = good;
    extra.replace(extra.find("\"id\""), 4, "\"bogus\":1,\"id\"");
    CHECK_FALSE(check_diagnostics_schema(extra).empty());
    std::string cat = good;
    cat.replace(cat.find("MathMode"), 8, "Spelling");
    CHECK_FALSE(check_diagnostics_schema(cat).empty());
    std::string span = good;
    span.replace(span.find("\"end\":4"), 7, "\"end\":0");
    CHECK_FALSE(check_diagnostics_schema(span).empty());
    std::string status = good;
    status.replace(status.find("fixed"), 5, "maybe");
    CHECK_FALSE(check_diagnostics_schema(status).empty());
}

TEST_CASE("a long document stays inside the time budget")
{
    // 5,000 lines with one missing package near the end
    std::string text = "\\documentclass{article}\n\\usepackage{amsmath}\n\\begin{document}\n";
    std::size_t lines = 3;
    for (int i = 0; lines < 4990; ++i) {
        text += "Paragraph " + std::to_string(i) + " has $x_" + std::to_string(i) + " + y$ and \\emph{words}.\n";
        text += "\\begin{itemize}\n  \\item one\n  \\item two\n\\end{itemize}\n\n";
        lines += 6;
    }
    text += "\\begin{algorithm}\n\\KwIn{x}\n\\end{algorithm}\n\\end{document}\n";
    Scratch s;
    std::string doc = s.write("long.tex", text);
    auto t0 = std::chrono::steady_clock::now();
    Run c = cli({"--format", "json", "check", doc});
    Run f = cli({"--fix", "apply", "fix", doc});
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(c.code == kExitFindings);
    CHECK(f.code == kExitOk);
    MESSAGE("check + fix on " << lines << " lines: " << secs << " s");
    CHECK(secs < 2.0);
}

TEST_CASE("atomic writes keep a backup")
{
    Scratch s;
    std::string p = s.write("f.tex", "old\n");
    write_file_atomic(p, "new\n", true);
    CHECK(slurp(p) == "new\n");
    CHECK(slurp(p + ".bak") == "old\n");
    write_file_atomic(p, "newer\n", false);
    CHECK(slurp(p) == "newer\n");
    CHECK(slurp(p + ".bak") == "old\n");
}
