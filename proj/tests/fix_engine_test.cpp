#include <doctest.h>
#include <httplib.h>

#include <json.hpp>
#include <random>
#include <thread>

#include "test_support.hpp"
#include "texrepair/fix_engine.hpp"
#include "texrepair/parser.hpp"
#include "texrepair/text_util.hpp"

using namespace texrepair;

namespace {

std::string wrap(const std::string& preamble, const std::string& body)
{
    return "\\documentclass{article}\n" + preamble + "\\begin{document}\n" + body + "\\end{document}\n";
}

struct Case {
    SourceDocument doc;
    Ast ast;
    std::vector<Diagnostic> diags;

    explicit Case(const std::string& text) : doc(text), ast(parse(doc)), diags(proxy_diagnose(doc, ast, default_db())) {}
};

/// Hands out whatever the test queued up per attempt.
class Scripted : public SuggestionProvider {
public:
    std::map<int, std::vector<FixCandidate>> by_attempt;
    int calls = 0;

    std::string id() const override { return "scripted"; }
    std::vector<FixCandidate> suggest(const Diagnostic&, const SourceDocument&, const Ast&, const PackageDb&,
                                      int attempt) override
    {
        ++calls;
        auto it = by_attempt.find(attempt);
        return it == by_attempt.end() ? std::vector<FixCandidate>{} : it->second;
    }
};

FixCandidate candidate(const SourceDocument& doc, std::vector<std::tuple<std::size_t, std::size_t, std::string>> edits,
                       std::string description = "test edit")
{
    FixCandidate c;
    c.provider_id = "scripted";
    for (auto& [a, b, t] : edits) c.patch.edits.push_back({doc.make_span(a, b), t});
    c.patch.description = std::move(description);
    return c;
}

const std::string kAlphaDoc = wrap("", "First paragraph with \\alpha inside.\n\nSecond paragraph.\n\nThird one.\n\n"
                                       "Fourth paragraph far away.\n\nFifth.\n");

}  // namespace

TEST_CASE("missing algorithm2e is fixed by the first rule candidate")
{
    Case c(testing::kAlgorithmDoc);
    REQUIRE(c.diags.size() == 1);
    RuleProvider rules;
    std::string before = c.doc.text();
    auto r = repair(c.diags[0], c.doc, c.ast, default_db(), {&rules});
    CHECK(c.doc.text() == before);
    REQUIRE(r.status == RepairStatus::Fixed);
    CHECK(r.attempts == 1);
    REQUIRE(r.validation_log.size() == 1);
    CHECK(r.validation_log[0].validation.valid());
    REQUIRE(r.applied);
    CHECK(r.applied->rule_id == "R1");
    auto fixed = apply_patch(c.doc, r.applied->patch);
    CHECK(fixed.text().find("\\usepackage{graphicx}\n\\usepackage[ruled,vlined]{algorithm2e}\n") != std::string::npos);
    Ast ast = parse(fixed);
    CHECK(proxy_diagnose(fixed, ast, default_db()).empty());
}

TEST_CASE("math-only command gets wrapped in dollars")
{
    Case c(kAlphaDoc);
    REQUIRE(c.diags.size() == 1);
    RuleProvider rules;
    auto r = repair(c.diags[0], c.doc, c.ast, default_db(), {&rules});
    REQUIRE(r.status == RepairStatus::Fixed);
    CHECK(r.applied->rule_id == "R2");
    CHECK(apply_patch(c.doc, r.applied->patch).text().find("with $\\alpha$ inside") != std::string::npos);
}

TEST_CASE("misspelt command and key are corrected")
{
    Case c(wrap("", "See \\cte{knuth} and \\ref{sec:intr}.\n\\section{A}\\label{sec:intro}\n"
                    "\\begin{thebibliography}{9}\n\\bibitem{knuth} K.\n\\end{thebibliography}\n"));
    REQUIRE(c.diags.size() == 2);
    RuleProvider rules;
    auto r = repair_document(c.doc, default_db(), {&rules});
    CHECK(r.remaining.empty());
    CHECK(r.document.text().find("See \\cite{knuth} and \\ref{sec:intro}.") != std::string::npos);
    REQUIRE(r.fixes.size() == 2);
    CHECK(r.fixes[0].result.applied->rule_id == "R4");
    CHECK(r.fixes[1].result.applied->rule_id == "R5");
}

TEST_CASE("validation rejects bad candidates with the right reason")
{
    Case c(kAlphaDoc);
    REQUIRE(c.diags.size() == 1);
    const Diagnostic& d = c.diags[0];
    std::size_t a = d.span.start, b = d.span.end;

    SUBCASE("malformed")
    {
        FixCandidate empty;
        empty.patch.description = "nothing";
        CHECK(validate(empty, c.doc, d, default_db()).reason == InvalidReason::MalformedPatch);
        auto overlapping = candidate(c.doc, {{a, b, "x"}, {a + 1, b, "y"}});
        CHECK(validate(overlapping, c.doc, d, default_db()).reason == InvalidReason::MalformedPatch);
        auto past = candidate(c.doc, {{c.doc.size() + 5, c.doc.size() + 6, "x"}});
        CHECK(validate(past, c.doc, d, default_db()).reason == InvalidReason::MalformedPatch);
    }
    SUBCASE("parse regression")
    {
        auto broken = candidate(c.doc, {{a, a, "$"}, {b, b, "$ \\end{itemize}"}});
        auto v = validate(broken, c.doc, d, default_db());
        CHECK(v.reason == InvalidReason::ParseRegression);
    }
    SUBCASE("out of scope")
    {
        std::size_t far = c.doc.text().find("Fourth");
        auto wide = candidate(c.doc, {{a, a, "$"}, {b, b, "$"}, {far, far + 7, ""}});
        CHECK(validate(wide, c.doc, d, default_db()).reason == InvalidReason::OutOfScopeEdit);
        auto near = candidate(c.doc, {{a, a, "$"}, {b, b, "$"}});
        CHECK(validate(near, c.doc, d, default_db()).valid());
    }
    SUBCASE("diagnostic persists")
    {
        auto cosmetic = candidate(c.doc, {{a - 1, a - 1, "~"}});
        CHECK(validate(cosmetic, c.doc, d, default_db()).reason == InvalidReason::DiagnosticPersists);
    }
}

TEST_CASE("an unclosed list around a nested one: the first guess regresses, the second holds")
{
    Case c(wrap("", "Intro.\n\n\\begin{itemize}\n\\item First.\n\\item Nested:\n\\begin{enumerate}\n\\item one\n\n"
                    "\\item two\n\\end{enumerate}\n\nTail.\n"));
    REQUIRE_FALSE(c.diags.empty());
    RuleProvider rules;
    auto r = repair(c.diags[0], c.doc, c.ast, default_db(), {&rules});
    REQUIRE(r.status == RepairStatus::Fixed);
    CHECK(r.attempts == 2);
    REQUIRE(r.validation_log.size() == 2);
    CHECK(r.validation_log[0].validation.reason == InvalidReason::ParseRegression);
    auto fixed = apply_patch(c.doc, r.applied->patch);
    CHECK(fixed.text().find("\\end{enumerate}\n\\end{itemize}\n") != std::string::npos);
}

TEST_CASE("no candidates and unfixable")
{
    RuleProvider rules;
    Case none(wrap("", "A \\qqqzzzxw command.\n"));
    REQUIRE(none.diags.size() == 1);
    auto r = repair(none.diags[0], none.doc, none.ast, default_db(), {&rules});
    CHECK(r.status == RepairStatus::NoCandidates);
    CHECK(r.validation_log.empty());
    CHECK_FALSE(r.applied);

    Case c(kAlphaDoc);
    Scripted bad;
    for (int k = 1; k <= 5; ++k) bad.by_attempt[k] = {candidate(c.doc, {{0, 0, "% nothing\n"}})};
    auto u = repair(c.diags[0], c.doc, c.ast, default_db(), {&bad});
    CHECK(u.status == RepairStatus::Unfixable);
    CHECK(u.attempts == 3);
    CHECK(u.validation_log.size() == 3);
    CHECK(bad.calls == 3);
    CHECK_FALSE(u.applied);
}

TEST_CASE("providers are consulted in order and at most three times")
{
    Case c(kAlphaDoc);
    const Diagnostic& d = c.diags[0];
    std::mt19937_64 rng(11);
    for (int round = 0; round < 200; ++round) {
        Scripted p1, p2;
        for (int k = 1; k <= 6; ++k)
            for (Scripted* p : {&p1, &p2}) {
                int n = static_cast<int>(rng() % 3);
                for (int i = 0; i < n; ++i) {
                    bool good = rng() % 5 == 0;
                    p->by_attempt[k].push_back(good ? candidate(c.doc, {{d.span.start, d.span.start, "$"},
                                                                        {d.span.end, d.span.end, "$"}})
                                                    : candidate(c.doc, {{0, 0, "%\n"}}));
                }
            }
        auto r = repair(d, c.doc, c.ast, default_db(), {&p1, &p2});
        CHECK(r.attempts <= kMaxAttempts);
        CHECK(p1.calls <= kMaxAttempts);
        for (const auto& o : r.validation_log) CHECK(o.attempt <= kMaxAttempts);
        if (r.status == RepairStatus::Fixed) {
            CHECK(r.validation_log.back().validation.valid());
            for (std::size_t i = 0; i + 1 < r.validation_log.size(); ++i)
                CHECK_FALSE(r.validation_log[i].validation.valid());
        } else if (r.status == RepairStatus::Unfixable) {
            CHECK(r.attempts == kMaxAttempts);
        } else {
            CHECK(r.validation_log.empty());
        }
    }
}

TEST_CASE("applied rule patches are sound and small")
{
    const std::vector<std::string> broken = {
        testing::kAlgorithmDoc,
        kAlphaDoc,
        wrap("", "Let $a + b be.\n\nNext.\n"),
        wrap("", "The value x^2 is big.\n"),
        wrap("", "\\begin{tabular}{ll}\na & b & c \\\\\n\\end{tabular}\n"),
        wrap("", "\\begin{figure}[hx]\n\\centering\n\\caption{A}\n\\end{figure}\n"),
        wrap("", "\\begin{tabular}{lq}\na & b \\\\\n\\end{tabular}\n"),
        wrap("", "Text \\textbff{bold}.\n"),
        wrap("\\usepackage{subfig}\n\\usepackage{subcaption}\n", "x\n"),
        wrap("\\usepackage{cleveref}\n\\usepackage{hyperref}\n", "x\n"),
        wrap("\\usepackage[T1]{fontenc}\n", "Price \xE2\x80\x9C quoted and \xE9 byte.\n"),
        wrap("", "\\begin{equation}\na = b\n\nMore.\n"),
        wrap("", "A list:\n\\item one\n\\end{itemize}\n\nAfter.\n"),
        wrap("", "Fish \\& chips & peas.\n"),
    };
    RuleProvider rules;
    for (const auto& text : broken) {
        Case c(text);
        INFO(text);
        auto first = std::find_if(c.diags.begin(), c.diags.end(), [](const Diagnostic& x) { return x.classified(); });
        REQUIRE(first != c.diags.end());
        const Diagnostic& d = *first;
        auto r = repair(d, c.doc, c.ast, default_db(), {&rules});
        INFO(d.id << " " << d.cause);
        REQUIRE(r.status == RepairStatus::Fixed);
        CHECK(validate(*r.applied, c.doc, d, default_db()).valid());
        auto fixed = apply_patch(c.doc, r.applied->patch);
        Ast ast = parse(fixed);
        CHECK(ast.recovery_count <= c.ast.recovery_count);
        for (const auto& after : proxy_diagnose(fixed, ast, default_db()))
            CHECK_FALSE((after.category == d.category && after.id == d.id));
        CHECK(r.applied->patch.edits.size() <= 2);
        std::size_t changed = 0;
        for (const auto& e : r.applied->patch.edits)
            changed += std::count(e.replacement.begin(), e.replacement.end(), '\n') +
                       std::count(c.doc.slice(e.span).begin(), c.doc.slice(e.span).end(), '\n');
        CHECK(changed <= 2);
    }
}

TEST_CASE("whole-document repair clears a multi-error file")
{
    std::string text = wrap("\\usepackage{subfig}\n\\usepackage{subcaption}\n",
                            "We have \\alpha and \\cte{k}.\n\n\\begin{tabular}{ll}\na & b & c \\\\\n\\end{tabular}\n\n"
                            "\\begin{itemize}\n\\item x\n\n\\begin{thebibliography}{9}\n\\bibitem{k} K.\n"
                            "\\end{thebibliography}\n");
    RuleProvider rules;
    auto r = repair_document(SourceDocument(text), default_db(), {&rules});
    for (const auto& d : r.remaining) INFO(d.id);
    CHECK(r.remaining.empty());
    Ast ast = parse(r.document);
    CHECK(ast.recovery_count == 0);
    CHECK(r.fixes.size() >= 4);
}

TEST_CASE("remote provider talks to an HTTP endpoint")
{
    Case c(kAlphaDoc);
    const Diagnostic& d = c.diags[0];
    httplib::Server server;
    std::string seen;
    int failures_left = 1;
    server.Post("/fix", [&](const httplib::Request& req, httplib::Response& res) {
        if (failures_left-- > 0) {
            res.status = 503;
            return;
        }
        seen = req.body;
        auto j = nlohmann::json::parse(req.body);
        std::size_t a = j["diagnostic"]["start"], b = j["diagnostic"]["end"];
        nlohmann::json out = {{"v", 1},
                              {"candidates",
                               {{{"edits", {{{"start", 0}, {"end", 0}, {"text", "%\n"}}}}, {"rationale", "noise"}},
                                {{"edits", {{{"start", a}, {"end", a}, {"text", "$"}}, {{"start", b}, {"end", b}, {"text", "$"}}}},
                                 {"rationale", "math mode"}}}}};
        res.set_content(out.dump(), "application/json");
    });
    server.Post("/junk", [](const httplib::Request&, httplib::Response& res) { res.set_content("{not json", "text/plain"); });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/fix";
    cfg.timeout_seconds = 5;
    cfg.retries = 1;
    RemoteProvider remote(cfg);
    REQUIRE(remote.enabled());
    auto r = repair(d, c.doc, c.ast, default_db(), {&remote});
    CHECK(r.status == RepairStatus::Fixed);
    REQUIRE(r.applied);
    CHECK(r.applied->provider_id == "remote");
    CHECK_FALSE(r.applied->rule_id);
    CHECK(r.validation_log.size() == 2);
    CHECK(r.validation_log[0].validation.reason == InvalidReason::DiagnosticPersists);
    auto sent = nlohmann::json::parse(seen);
    CHECK(sent["v"] == 1);
    CHECK(sent["diagnostic"]["id"] == d.id);
    CHECK(sent["window"]["text"].get<std::string>().find("\\alpha") != std::string::npos);

    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/junk";
    RemoteProvider junk(cfg);
    CHECK(junk.suggest(d, c.doc, c.ast, default_db(), 1).empty());

    server.stop();
    t.join();

    RemoteProvider off(RemoteConfig{});
    CHECK_FALSE(off.enabled());
    CHECK(off.suggest(d, c.doc, c.ast, default_db(), 1).empty());
}

TEST_CASE("remote responses are parsed defensively")
{
    RemoteProvider p(RemoteConfig{"http://x/", "", 1, 0, 10});
    SourceDocument doc("abc\n");
    CHECK(p.parse_response("[]", doc).empty());
    CHECK(p.parse_response(R"({"v":2,"candidates":[]})", doc).empty());
    CHECK(p.parse_response(R"({"v":1,"candidates":[{"edits":[{"start":9,"end":10,"text":"x"}]}]})", doc).empty());
    CHECK(p.parse_response(R"({"v":1,"candidates":[{"edits":[{"start":-1,"end":1}]}]})", doc).empty());
    auto ok = p.parse_response(R"({"v":1,"candidates":[{"edits":[{"start":0,"end":1,"text":"x"}],"rationale":"r"}]})", doc);
    REQUIRE(ok.size() == 1);
    CHECK(ok[0].patch.edits[0].replacement == "x");
    CHECK(ok[0].rationale == "r");
    // bytes that are not UTF-8 still serialise
    SourceDocument bad("a \xFF b\n");
    Diagnostic d;
    d.span = bad.make_span(2, 3);
    CHECK_NOTHROW(p.request_body(d, bad, default_db(), 1));
}
