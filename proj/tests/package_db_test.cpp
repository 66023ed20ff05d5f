#include <doctest.h>

#include <algorithm>

#include "texrepair/package_db.hpp"

using namespace texrepair;

namespace {

std::vector<std::string> names(const std::vector<const PackageRecord*>& recs)
{
    std::vector<std::string> out;
    for (const auto* r : recs) out.push_back(r->name);
    return out;
}

const char* kSmallDb = R"({
  "version": 1,
  "packages": [
    {"name": "algorithm2e", "priority": 90, "provides_commands": ["KwIn", "Return"],
     "provides_environments": ["algorithm"], "default_options": "ruled,vlined", "notes": ""},
    {"name": "algorithm", "priority": 70, "provides_commands": [], "provides_environments": ["algorithm"]},
    {"name": "zeta", "priority": 70, "provides_environments": ["algorithm"]},
    {"name": "hyperref", "priority": 90, "provides_commands": ["href"]},
    {"name": "cleveref", "priority": 80, "provides_commands": ["cref"]}
  ],
  "conflicts": [
    {"a": "hyperref", "b": "cleveref", "kind": "order", "a_before_b": true, "resolution_hint": "cleveref last"},
    {"a": "algorithm", "b": "algorithm2e", "kind": "incompatible", "resolution_hint": "pick one", "remove": "algorithm"}
  ]
})";

}  // namespace

TEST_SUITE_BEGIN("package_db");

TEST_CASE("provider ranking")
{
    PackageDb db = load_db_from_string(kSmallDb);
    CHECK(names(db.provider_of(SymbolKind::Environment, "algorithm")) ==
          std::vector<std::string>{"algorithm2e", "algorithm", "zeta"});
    CHECK(names(db.provider_of(SymbolKind::Command, "KwIn")) == std::vector<std::string>{"algorithm2e"});
    CHECK(db.provider_of(SymbolKind::Command, "nonexistentcmd").empty());
    // kinds are separate namespaces
    CHECK(db.provider_of(SymbolKind::Command, "algorithm").empty());
    REQUIRE(db.find("algorithm2e"));
    CHECK(db.find("algorithm2e")->default_options == std::optional<std::string>("ruled,vlined"));
}

TEST_CASE("empty db")
{
    for (const char* text : {"", "  \n\t"}) {
        PackageDb db = load_db_from_string(text);
        CHECK(db.empty());
        CHECK(db.provider_of(SymbolKind::Environment, "algorithm").empty());
        CHECK(db.conflicts_in({"hyperref", "cleveref"}).empty());
    }
}

TEST_CASE("duplicate package")
{
    const char* text = "{\"version\": 1,\n \"packages\": [\n  {\"name\": \"a\"},\n  {\"name\": \"a\"}\n ]}";
    try {
        load_db_from_string(text);
        FAIL("expected DuplicatePackage");
    } catch (const DbError& e) {
        CHECK(e.kind() == DbError::Kind::DuplicatePackage);
        CHECK(e.line() == 4);
    }
}

TEST_CASE("schema errors carry a line")
{
    struct Case {
        const char* text;
        std::size_t line;
    };
    Case cases[] = {
        {"{\"version\": 1,\n \"packages\": [\n  {\"name\": \"a\",\n   \"provides_commands\": [\"\\\\foo\"]}\n ]}", 3},
        {"{\"version\": 1,\n \"packages\": [\n  {\"name\": \"a\"}\n  {\"name\": \"b\"}\n ]}", 4},
        {"{\"packages\": []}", 1},
        {"{\"version\": 2}", 1},
        {"{\"version\": 1,\n \"conflicts\": [\n  {\"a\": \"x\", \"b\": \"x\", \"kind\": \"incompatible\"}]}", 3},
        {"{\"version\": 1,\n \"conflicts\": [\n  {\"a\": \"x\", \"b\": \"y\", \"kind\": \"sometimes\"}]}", 3},
        {"{\"version\": 1,\n \"packages\": [\n  {\"name\": \"a\", \"priority\": \"high\"}]}", 3},
        {"[1, 2]", 1},
    };
    for (const auto& c : cases) {
        CAPTURE(c.text);
        try {
            load_db_from_string(c.text);
            FAIL("expected SchemaError");
        } catch (const DbError& e) {
            CHECK(e.kind() == DbError::Kind::SchemaError);
            CHECK(e.line() == c.line);
        }
    }
}

TEST_CASE("conflicts_in")
{
    PackageDb db = load_db_from_string(kSmallDb);
    CHECK(db.conflicts_in({}).empty());
    CHECK(db.conflicts_in({"algorithm2e"}).empty());
    CHECK(db.conflicts_in({"hyperref", "cleveref"}).empty());
    auto wrong = db.conflicts_in({"cleveref", "hyperref"});
    REQUIRE(wrong.size() == 1);
    CHECK(wrong[0]->a == "hyperref");
    auto both = db.conflicts_in({"algorithm2e", "cleveref", "algorithm", "hyperref"});
    REQUIRE(both.size() == 2);
    CHECK(both[0]->kind == ConflictKind::OrderSensitive);
    CHECK(both[1]->kind == ConflictKind::Incompatible);
    CHECK(both[1]->remove == std::optional<std::string>("algorithm"));
}

TEST_CASE("shipped db")
{
    const PackageDb& db = default_db();
    CHECK(db.records().size() >= 25);
    for (const char* seed : {"booktabs", "graphicx", "amsmath", "amssymb", "algorithm2e", "algorithmicx", "hyperref",
                             "cleveref", "inputenc", "fontenc", "babel", "geometry", "xcolor", "tikz", "listings",
                             "caption", "subcaption", "natbib", "biblatex", "url", "enumitem", "multirow", "siunitx",
                             "float", "fontspec"}) {
        CAPTURE(seed);
        CHECK(db.find(seed) != nullptr);
    }
    CHECK(names(db.provider_of(SymbolKind::Command, "toprule")) == std::vector<std::string>{"booktabs"});
    auto algo = db.provider_of(SymbolKind::Environment, "algorithm");
    REQUIRE(!algo.empty());
    CHECK(algo[0]->name == "algorithm2e");
    CHECK(algo[0]->default_options == std::optional<std::string>("ruled,vlined"));
    CHECK(db.conflicts_in({"cleveref", "hyperref"}).size() == 1);
    CHECK(db.is_kernel(SymbolKind::Environment, "tabular"));
    CHECK(db.is_math_only("alpha"));
    CHECK_FALSE(db.is_math_only("textbf"));

    // kernel symbols are never also claimed by a package; that would make
    // missing-package reasoning ambiguous
    for (auto kind : {SymbolKind::Command, SymbolKind::Environment})
        for (const auto& [sym, _] : db.symbol_index(kind)) {
            CAPTURE(sym);
            CHECK_FALSE(db.is_kernel(kind, sym));
        }
}

TEST_CASE("inversion law")
{
    for (const PackageDb* db : {&default_db()}) {
        for (auto kind : {SymbolKind::Command, SymbolKind::Environment}) {
            std::size_t forward = 0;
            for (const auto& [name, rec] : db->records()) {
                const auto& provided = kind == SymbolKind::Command ? rec.provides_commands : rec.provides_environments;
                for (const auto& sym : provided) {
                    ++forward;
                    auto it = db->symbol_index(kind).find(sym);
                    REQUIRE(it != db->symbol_index(kind).end());
                    CHECK(it->second.count(name) == 1);
                }
            }
            std::size_t backward = 0;
            for (const auto& [sym, pkgs] : db->symbol_index(kind)) {
                for (const auto& p : pkgs) {
                    ++backward;
                    const PackageRecord* rec = db->find(p);
                    REQUIRE(rec);
                    const auto& provided = kind == SymbolKind::Command ? rec->provides_commands : rec->provides_environments;
                    CHECK(provided.count(sym) == 1);
                }
            }
            CHECK(forward == backward);
        }
    }
}

TEST_CASE("ranking is a function of file contents")
{
    PackageDb a = load_db_from_string(kSmallDb);
    PackageDb b = load_db_from_string(kSmallDb);
    CHECK(names(a.provider_of(SymbolKind::Environment, "algorithm")) ==
          names(b.provider_of(SymbolKind::Environment, "algorithm")));
}
