#include "texrepair/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "texrepair/checker.hpp"
#include "texrepair/engine.hpp"
#include "texrepair/explain.hpp"
#include "texrepair/parser.hpp"
#include "texrepair/text_util.hpp"

namespace texrepair {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Anything that should end the run with exit 2.
class Failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path, const char* what)
{
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Failure(std::string("cannot read ") + what + ": " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure(std::string("cannot read ") + what + ": " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Session {
    RunConfig cfg;
    PackageDb owned;
    const PackageDb* db = nullptr;
    RuleProvider rules;
    std::unique_ptr<RemoteProvider> remote;
    std::vector<SuggestionProvider*> providers;

    void open()
    {
        if (cfg.db_path.empty()) {
            db = &default_db();
        } else {
            try {
                owned = load_db(cfg.db_path);
            } catch (const DbError& e) {
                throw Failure(e.what());
            }
            db = &owned;
        }
        providers.push_back(&rules);
        if (!cfg.remote.endpoint.empty()) {
            remote = std::make_unique<RemoteProvider>(cfg.remote);
            providers.push_back(remote.get());
        }
    }

    /// Engine to compile with, or none for the static proxy.
    std::optional<std::string> engine() const
    {
        if (cfg.engine_path) return cfg.engine_path;
        if (cfg.mode != CompileMode::Engine) return std::nullopt;
        auto found = find_engine();
        if (!found) throw Failure("engine mode requested but no pdflatex/xelatex/lualatex on PATH");
        return found;
    }

    LogReport compile(const SourceDocument& doc, const Ast& ast) const
    {
        if (auto eng = engine()) {
            EngineRun run = run_engine(*eng, doc, 60);
            if (!run.started) throw Failure("could not run " + *eng);
            if (run.timed_out) throw Failure(*eng + " timed out");
            return run.log;
        }
        return proxy_compile(doc, ast, *db);
    }

    /// Log from --log when given (first round only), else a fresh compile.
    std::vector<Diagnostic> diagnose_with(const SourceDocument& doc, const Ast& ast,
                                          const std::optional<std::string>& log_path, std::size_t round) const
    {
        if (log_path && round == 0) {
            std::string text = read_file(*log_path, "log");
            if (!looks_like_tex_log(text)) throw Failure("not a TeX log: " + *log_path);
            return diagnose(doc, ast, parse_log(text), *db);
        }
        return diagnose(doc, ast, compile(doc, ast), *db);
    }
};

std::string category_name(const Diagnostic& d)
{
    return d.category ? std::string(to_string(*d.category)) : "Unclassified";
}

std::string indent(const std::string& text, const std::string& pad)
{
    std::string out;
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (const auto& line : lines) out += (line.empty() ? "" : pad + line) + "\n";
    return out;
}

std::string explanation_of(const Diagnostic& d)
{
    try {
        return explain(d);
    } catch (const MissingTemplate&) {
        return d.message;
    }
}

void print_human(std::ostream& out, const Diagnostic& d, const std::string& diff, std::optional<RepairStatus> status)
{
    out << "Compilation Error -- Line " << d.line() << "\n";
    out << "  " << category_name(d) << " (" << to_string(d.confidence) << " confidence)";
    if (!d.log_message.empty()) out << ": " << d.log_message;
    out << "\n" << indent(explanation_of(d), "  ");
    if (status == RepairStatus::Fixed) out << "  Suggested fix:\n" << indent(diff, "    ");
    else if (status) out << "  No validated fix (" << to_string(*status) << ")\n";
    out << "\n";
}

RepairResult fix_for(const Diagnostic& d, const SourceDocument& doc, const Ast& ast, const Session& s)
{
    return repair(d, doc, ast, *s.db, s.providers);
}

std::string diff_of(const SourceDocument& doc, const RepairResult& r, const std::string& file)
{
    if (r.status != RepairStatus::Fixed) return "";
    return unified_diff(doc.text(), apply_patch(doc, r.applied->patch).text(), file);
}

int cmd_check(Session& s, const std::string& file, const std::optional<std::string>& log_path, std::ostream& out,
              bool explain_only)
{
    SourceDocument doc(read_file(file, "document"), file);
    Ast ast = parse(doc);
    auto diags = s.diagnose_with(doc, ast, log_path, 0);
    if (s.cfg.format == OutputFormat::Json) {
        out << diagnostics_json(file, doc, ast, diags, *s.db, s.providers);
    } else {
        for (const auto& d : diags) {
            if (explain_only) {
                out << "Line " << d.line() << ": " << category_name(d) << "\n" << indent(explanation_of(d), "  ") << "\n";
                continue;
            }
            RepairResult r = fix_for(d, doc, ast, s);
            print_human(out, d, diff_of(doc, r, file), r.status);
        }
    }
    return diags.empty() ? kExitOk : kExitFindings;
}

/// access() alone says yes to root, so the mode bits count too.
bool writable(const std::string& path)
{
    std::error_code ec;
    auto perms = fs::status(path, ec).permissions();
    if (ec) return false;
    constexpr auto any_write = fs::perms::owner_write | fs::perms::group_write | fs::perms::others_write;
    return (perms & any_write) != fs::perms::none && ::access(path.c_str(), W_OK) == 0;
}

bool ask(std::istream& in, std::ostream& out, const Diagnostic& d, const std::string& diff)
{
    out << "Line " << d.line() << ": " << d.message << "\n" << diff << "Apply this fix? [y/N] " << std::flush;
    std::string answer;
    if (!std::getline(in, answer)) return false;
    answer = std::string(trim(answer));
    return answer == "y" || answer == "Y" || answer == "yes";
}

int cmd_fix(Session& s, const std::string& file, const std::optional<std::string>& log_path, std::istream& in,
            std::ostream& out)
{
    SourceDocument doc(read_file(file, "document"), file);
    bool writes = s.cfg.fix_mode != FixMode::Suggest;
    if (writes && !writable(file)) throw Failure("document is not writable: " + file);

    RepairOptions options;
    options.diagnose = [&](const SourceDocument& cur, const Ast& ast, std::size_t round) {
        return s.diagnose_with(cur, ast, log_path, round);
    };
    if (s.cfg.fix_mode == FixMode::Interactive)
        options.accept = [&](const Diagnostic& d, const RepairResult& r, const SourceDocument& cur) {
            return ask(in, out, d, diff_of(cur, r, file));
        };
    DocumentRepair result = repair_document(doc, *s.db, s.providers, options);

    if (s.cfg.format == OutputFormat::Json) {
        json j;
        j["version"] = 1;
        j["file"] = file;
        json fixes = json::array();
        for (const auto& f : result.fixes) {
            json row;
            row["id"] = f.diagnostic.id;
            row["category"] = category_name(f.diagnostic);
            row["line"] = f.diagnostic.line();
            row["status"] = std::string(to_string(f.result.status));
            row["attempts"] = f.result.attempts;
            if (f.result.applied) row["rule"] = f.result.applied->rule_id.value_or(f.result.applied->provider_id);
            fixes.push_back(row);
        }
        j["fixes"] = fixes;
        j["diff"] = unified_diff(doc.text(), result.document.text(), file);
        json rest = json::array();
        for (const auto& d : result.remaining)
            rest.push_back({{"id", d.id}, {"category", category_name(d)}, {"line", d.line()}, {"message", d.message}});
        j["remaining"] = rest;
        out << j.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else {
        if (result.document.text() != doc.text()) out << unified_diff(doc.text(), result.document.text(), file);
        for (const auto& f : result.fixes)
            if (f.result.status != RepairStatus::Fixed)
                out << "# line " << f.diagnostic.line() << ": " << to_string(f.result.status) << " -- "
                    << f.diagnostic.message << "\n";
        for (const auto& d : result.remaining)
            out << "# remaining: line " << d.line() << ": " << category_name(d) << " -- " << d.message << "\n";
    }
    if (writes && result.document.text() != doc.text()) write_file_atomic(file, result.document.text(), true);
    return result.remaining.empty() ? kExitOk : kExitFindings;
}

std::vector<BaselineRow> load_baselines(const std::vector<std::string>& specs)
{
    std::vector<BaselineRow> rows;
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) throw Failure("--baseline wants NAME=report.json, got " + spec);
        try {
            rows.push_back({spec.substr(0, eq), parse_report_json(read_file(spec.substr(eq + 1), "baseline"))});
        } catch (const json::exception& e) {
            throw Failure("bad baseline report " + spec.substr(eq + 1) + ": " + e.what());
        }
    }
    return rows;
}

int cmd_bench(Session& s, const std::string& corpus, std::size_t total, std::uint64_t seed, unsigned jobs,
              const std::vector<std::string>& baselines, std::ostream& out)
{
    if (!fs::is_directory(corpus)) throw Failure("corpus directory not found: " + corpus);
    auto rows = load_baselines(baselines);
    std::vector<BenchCase> suite;
    try {
        suite = build_suite(corpus, default_distribution(total), seed, *s.db);
    } catch (const InsufficientCorpus& e) {
        throw Failure(e.what());
    }
    EvalConfig ec;
    ec.providers = s.providers;
    if (auto eng = s.engine()) {
        ec.mode = CompileMode::Engine;
        ec.engine_path = *eng;
    }
    auto results = run_suite(suite, ec, *s.db, jobs);
    std::map<std::string, std::string> config = {
        {"corpus", fs::path(corpus).lexically_normal().filename().string()},
        {"mode", std::string(to_string(ec.mode))},
        {"providers", s.remote ? "rules+remote" : "rules"},
        {"seed", std::to_string(seed)},
        {"total", std::to_string(total)},
    };
    BenchReport report = score(results, config);
    ReportFormat f = s.cfg.format == OutputFormat::Json  ? ReportFormat::Json
                     : s.cfg.format == OutputFormat::Csv ? ReportFormat::Csv
                                                         : ReportFormat::Text;
    out << emit_report(report, f, rows);
    return kExitOk;
}

int cmd_db(Session& s, const std::string& action, std::ostream& out)
{
    const PackageDb& db = *s.db;
    if (action == "validate") {
        // loading already validated the schema
        std::size_t cmds = db.all_symbols(SymbolKind::Command).size();
        out << "ok: " << db.records().size() << " packages, " << db.conflicts().size() << " conflict rules, " << cmds
            << " commands\n";
        return kExitOk;
    }
    if (s.cfg.format == OutputFormat::Json) {
        json j = json::array();
        for (const auto& [name, r] : db.records())
            j.push_back({{"name", name},
                         {"priority", r.priority},
                         {"commands", r.provides_commands.size()},
                         {"environments", r.provides_environments.size()}});
        out << j.dump(2) << "\n";
        return kExitOk;
    }
    for (const auto& [name, r] : db.records())
        out << name << "  (" << r.provides_commands.size() << " commands, " << r.provides_environments.size()
            << " environments)\n";
    for (const auto& c : db.conflicts())
        out << "conflict: " << c.a << " / " << c.b << " [" << to_string(c.kind) << "] " << c.resolution_hint << "\n";
    return kExitOk;
}

/// Optional JSON config: {"engine", "mode", "db", "remote": {"endpoint", "timeout"}}.
void apply_config_file(const std::string& path, RunConfig& cfg)
{
    json j;
    try {
        j = json::parse(read_file(path, "config"));
        if (j.contains("engine")) cfg.engine_path = j["engine"].get<std::string>();
        if (j.contains("mode")) cfg.mode = j["mode"].get<std::string>() == "engine" ? CompileMode::Engine : CompileMode::ParserProxy;
        if (j.contains("db")) cfg.db_path = j["db"].get<std::string>();
        if (j.contains("remote")) {
            const auto& r = j["remote"];
            cfg.remote.endpoint = r.value("endpoint", "");
            cfg.remote.timeout_seconds = r.value("timeout", cfg.remote.timeout_seconds);
        }
    } catch (const json::exception& e) {
        throw Failure("bad config " + path + ": " + e.what());
    }
}

}  // namespace

std::string diagnostics_json(const std::string& file, const SourceDocument& doc, const Ast& ast,
                             const std::vector<Diagnostic>& diags, const PackageDb& db,
                             const std::vector<SuggestionProvider*>& providers)
{
    json j;
    j["version"] = 1;
    j["file"] = file;
    json list = json::array();
    for (const auto& d : diags) {
        RepairResult r = repair(d, doc, ast, db, providers);
        json row;
        row["id"] = d.id;
        row["category"] = d.category ? json(std::string(to_string(*d.category))) : json(nullptr);
        row["line"] = d.line();
        row["span"] = {{"start", d.span.start}, {"end", d.span.end}};
        row["message"] = d.message;
        row["confidence"] = std::string(to_string(d.confidence));
        row["fix"] = {{"status", std::string(to_string(r.status))}, {"diff", diff_of(doc, r, file)}};
        list.push_back(row);
    }
    j["diagnostics"] = list;
    return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::vector<std::string> check_diagnostics_schema(const std::string& text)
{
    std::vector<std::string> problems;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        return {std::string("not JSON: ") + e.what()};
    }
    auto need = [&](const json& obj, const char* key, bool (json::*is)() const, const std::string& where) {
        if (!obj.is_object() || !obj.contains(key) || !(obj[key].*is)()) {
            problems.push_back(where + "." + key + " missing or mistyped");
            return false;
        }
        return true;
    };
    if (!j.is_object()) return {"top level is not an object"};
    if (need(j, "version", &json::is_number_integer, "$") && j["version"] != 1) problems.push_back("$.version != 1");
    need(j, "file", &json::is_string, "$");
    if (!need(j, "diagnostics", &json::is_array, "$")) return problems;
    static const std::set<std::string> keys = {"id", "category", "line", "span", "message", "confidence", "fix"};
    for (std::size_t i = 0; i < j["diagnostics"].size(); ++i) {
        const json& d = j["diagnostics"][i];
        std::string at = "$.diagnostics[" + std::to_string(i) + "]";
        if (!d.is_object()) {
            problems.push_back(at + " is not an object");
            continue;
        }
        for (const auto& [k, _] : d.items())
            if (!keys.count(k)) problems.push_back(at + " has unexpected key " + k);
        need(d, "id", &json::is_string, at);
        if (!d.contains("category") || !(d["category"].is_string() || d["category"].is_null()))
            problems.push_back(at + ".category missing or mistyped");
        else if (d["category"].is_string() && !category_from_string(d["category"].get<std::string>()))
            problems.push_back(at + ".category unknown");
        if (need(d, "line", &json::is_number_unsigned, at) && d["line"].get<std::size_t>() < 1)
            problems.push_back(at + ".line < 1");
        if (need(d, "span", &json::is_object, at)) {
            bool ok = need(d["span"], "start", &json::is_number_unsigned, at + ".span") &
                      need(d["span"], "end", &json::is_number_unsigned, at + ".span");
            if (ok && d["span"]["start"].get<std::size_t>() > d["span"]["end"].get<std::size_t>())
                problems.push_back(at + ".span start > end");
        }
        need(d, "message", &json::is_string, at);
        if (need(d, "confidence", &json::is_string, at)) {
            auto c = d["confidence"].get<std::string>();
            if (c != "high" && c != "medium" && c != "low") problems.push_back(at + ".confidence unknown");
        }
        if (need(d, "fix", &json::is_object, at)) {
            if (need(d["fix"], "status", &json::is_string, at + ".fix")) {
                auto st = d["fix"]["status"].get<std::string>();
                if (st != "fixed" && st != "unfixable" && st != "no-candidates")
                    problems.push_back(at + ".fix.status unknown");
            }
            need(d["fix"], "diff", &json::is_string, at + ".fix");
        }
    }
    return problems;
}

void write_file_atomic(const std::string& path, const std::string& text, bool backup)
{
    auto put = [](const fs::path& target, const std::string& bytes) {
        fs::path tmp = target;
        tmp += ".tmp-" + std::to_string(::getpid());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Failure("cannot write " + tmp.string());
            out << bytes;
            out.flush();
            if (!out) throw Failure("cannot write " + tmp.string());
        }
        int fd = ::open(tmp.c_str(), O_RDONLY);
        if (fd >= 0) {
            ::fsync(fd);
            ::close(fd);
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) {
            fs::remove(tmp, ec);
            throw Failure("cannot replace " + target.string());
        }
    };
    // the backup is complete on disk before the original is touched
    if (backup) put(path + ".bak", read_file(path, "document"));
    put(path, text);
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err)
{
    CLI::App app{"diagnose and repair LaTeX compilation errors", "texrepair"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "texrepair 1.0");

    RunConfig cfg;
    std::string format = "human", mode = "proxy", fix_mode = "suggest", config_path, remote;
    std::optional<std::string> engine, log_path;
    std::uint64_t seed = 42;
    std::size_t total = 120;
    unsigned jobs = 0;
    std::vector<std::string> baselines;

    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--db", cfg.db_path, "package database JSON");
    app.add_option("--engine", engine, "TeX engine binary; implies engine mode");
    app.add_option("--format", format, "output format")->check(CLI::IsMember({"human", "json", "csv"}));
    app.add_option("--log", log_path, "existing .log to diagnose instead of compiling");
    app.add_option("--seed", seed, "bench rng seed");
    app.add_option("--total", total, "bench case count");
    app.add_option("--mode", mode, "compile with a TeX engine or the static proxy")
        ->check(CLI::IsMember({"engine", "proxy"}));
    app.add_option("--fix", fix_mode, "what fix does with repairs")
        ->check(CLI::IsMember({"suggest", "apply", "interactive"}));
    app.add_option("--remote", remote, "suggestion service endpoint (http://host:port/path)");
    app.add_option("--jobs", jobs, "bench workers (0: one per core)");
    app.add_option("--baseline", baselines, "extra bench row, NAME=report.json");

    std::string file, corpus = "corpus", db_action;
    auto* check = app.add_subcommand("check", "report errors with explanations and suggested fixes");
    check->add_option("file", file, "document")->required();
    auto* fix = app.add_subcommand("fix", "repair errors (see --fix)");
    fix->add_option("file", file, "document")->required();
    auto* expl = app.add_subcommand("explain", "plain-language explanation per error");
    expl->add_option("file", file, "document")->required();
    auto* bench = app.add_subcommand("bench", "inject errors into a seed corpus and score detection and repair");
    bench->add_option("corpus", corpus, "corpus directory");
    auto* db = app.add_subcommand("db", "package database tools");
    db->add_option("action", db_action, "validate | list")->required()->check(CLI::IsMember({"validate", "list"}));
    for (auto* sub : {check, fix, expl, bench, db}) sub->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitFailure;
    }

    try {
        if (!config_path.empty()) {
            RunConfig from_file;
            apply_config_file(config_path, from_file);
            // flags given on the command line win
            if (!engine) engine = from_file.engine_path;
            if (app.count("--mode") == 0 && from_file.mode == CompileMode::Engine) mode = "engine";
            if (cfg.db_path.empty()) cfg.db_path = from_file.db_path;
            if (remote.empty()) remote = from_file.remote.endpoint;
            cfg.remote.timeout_seconds = from_file.remote.timeout_seconds;
        }
        cfg.engine_path = engine;
        cfg.mode = mode == "engine" ? CompileMode::Engine : CompileMode::ParserProxy;
        cfg.format = format == "json" ? OutputFormat::Json : format == "csv" ? OutputFormat::Csv : OutputFormat::Human;
        cfg.fix_mode = fix_mode == "apply" ? FixMode::Apply : fix_mode == "interactive" ? FixMode::Interactive : FixMode::Suggest;
        cfg.remote.endpoint = remote;
        if (const char* tok = std::getenv(kRemoteTokenEnv)) cfg.remote.token = tok;

        if (*db && db_action == "validate" && !cfg.db_path.empty()) {
            // a db that loads is valid; a broken one is a finding, not a tool failure
            try {
                load_db(cfg.db_path);
            } catch (const DbError& e) {
                if (e.line() == 0 && e.kind() == DbError::Kind::SchemaError && !fs::is_regular_file(cfg.db_path))
                    throw Failure(e.what());
                out << cfg.db_path << ":" << e.line() << ": " << e.what() << "\n";
                return kExitFindings;
            }
        }

        Session s;
        s.cfg = cfg;
        s.open();
        if (*check) return cmd_check(s, file, log_path, out, false);
        if (*expl) return cmd_check(s, file, log_path, out, true);
        if (*fix) return cmd_fix(s, file, log_path, in, out);
        if (*bench) return cmd_bench(s, corpus, total, seed, jobs, baselines, out);
        if (*db) return cmd_db(s, db_action, out);
    } catch (const Failure& e) {
        err << "texrepair: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "texrepair: internal error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace texrepair
