#include "texrepair/package_db.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace texrepair {

using nlohmann::json;

namespace {

std::size_t line_at(std::string_view text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

// Lines of each element object in the top-level "packages" / "conflicts" arrays,
// so schema errors can point somewhere useful.
std::map<std::string, std::vector<std::size_t>> element_lines(std::string_view text)
{
    std::map<std::string, std::vector<std::size_t>> out;
    std::vector<char> stack;
    std::string last_string, top_key;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') {
            ++line;
        } else if (c == '"') {
            std::string s;
            for (++i; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\' && i + 1 < text.size()) ++i;
                if (text[i] == '\n') ++line;
                s += text[i];
            }
            last_string = s;
        } else if (c == ':') {
            if (stack.size() == 1) top_key = last_string;
        } else if (c == '{' || c == '[') {
            if (c == '{' && stack.size() == 2 && stack.back() == '[') out[top_key].push_back(line);
            stack.push_back(c);
        } else if (c == '}' || c == ']') {
            if (!stack.empty()) stack.pop_back();
        }
    }
    return out;
}

struct Reader {
    std::string_view text;
    std::string origin;
    std::map<std::string, std::vector<std::size_t>> lines;

    [[noreturn]] void fail(std::size_t line, const std::string& msg) const
    {
        std::string where = origin + (line ? ":" + std::to_string(line) : "");
        throw DbError(DbError::Kind::SchemaError, line, where + ": " + msg);
    }

    std::size_t line_of(const std::string& array, std::size_t i) const
    {
        auto it = lines.find(array);
        if (it == lines.end() || i >= it->second.size()) return 0;
        return it->second[i];
    }

    std::set<std::string> names(const json& obj, const char* key, std::size_t line) const
    {
        std::set<std::string> out;
        if (!obj.contains(key)) return out;
        const json& arr = obj.at(key);
        if (!arr.is_array()) fail(line, std::string("\"") + key + "\" must be an array of strings");
        for (const json& v : arr) {
            if (!v.is_string()) fail(line, std::string("\"") + key + "\" must be an array of strings");
            std::string s = v.get<std::string>();
            if (s.empty()) fail(line, std::string("empty name in \"") + key + "\"");
            if (s.front() == '\\') fail(line, "symbol \"" + s + "\" must not carry a backslash");
            out.insert(s);
        }
        return out;
    }

    std::string str(const json& obj, const char* key, std::size_t line, bool required) const
    {
        if (!obj.contains(key) || obj.at(key).is_null()) {
            if (required) fail(line, std::string("missing \"") + key + "\"");
            return {};
        }
        if (!obj.at(key).is_string()) fail(line, std::string("\"") + key + "\" must be a string");
        return obj.at(key).get<std::string>();
    }
};

}  // namespace

const PackageRecord* PackageDb::find(std::string_view name) const
{
    auto it = records_.find(std::string(name));
    return it == records_.end() ? nullptr : &it->second;
}

const std::map<std::string, std::set<std::string>>& PackageDb::symbol_index(SymbolKind kind) const
{
    return kind == SymbolKind::Command ? command_index_ : environment_index_;
}

std::vector<const PackageRecord*> PackageDb::provider_of(SymbolKind kind, std::string_view name) const
{
    std::vector<const PackageRecord*> out;
    const auto& index = symbol_index(kind);
    auto it = index.find(std::string(name));
    if (it == index.end()) return out;
    for (const auto& pkg : it->second) out.push_back(&records_.at(pkg));
    std::stable_sort(out.begin(), out.end(), [](const PackageRecord* x, const PackageRecord* y) {
        if (x->priority != y->priority) return x->priority > y->priority;
        return x->name < y->name;
    });
    return out;
}

std::set<std::string> PackageDb::closure(const std::vector<std::string>& names) const
{
    std::set<std::string> out;
    std::vector<std::string> todo(names.rbegin(), names.rend());
    while (!todo.empty()) {
        std::string n = todo.back();
        todo.pop_back();
        if (!out.insert(n).second) continue;
        if (const PackageRecord* rec = find(n))
            for (const auto& dep : rec->loads) todo.push_back(dep);
    }
    return out;
}

std::vector<const ConflictRule*> PackageDb::conflicts_in(const std::vector<std::string>& loaded) const
{
    std::vector<const ConflictRule*> out;
    auto pos = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(loaded.begin(), loaded.end(), name);
        if (it == loaded.end()) return std::nullopt;
        return static_cast<std::size_t>(it - loaded.begin());
    };
    for (const auto& rule : conflicts_) {
        auto pa = pos(rule.a), pb = pos(rule.b);
        if (!pa || !pb) continue;
        if (rule.kind == ConflictKind::Incompatible) {
            out.push_back(&rule);
        } else if (rule.a_before_b ? *pa > *pb : *pb > *pa) {
            out.push_back(&rule);
        }
    }
    return out;
}

bool PackageDb::is_kernel(SymbolKind kind, std::string_view name) const
{
    return kernel(kind).count(std::string(name)) > 0;
}

bool PackageDb::is_math_only(std::string_view name) const
{
    return math_only_.count(std::string(name)) > 0;
}

const std::set<std::string>& PackageDb::kernel(SymbolKind kind) const
{
    return kind == SymbolKind::Command ? kernel_commands_ : kernel_environments_;
}

std::set<std::string> PackageDb::all_symbols(SymbolKind kind) const
{
    std::set<std::string> out = kernel(kind);
    for (const auto& [sym, _] : symbol_index(kind)) out.insert(sym);
    return out;
}

PackageDb load_db_from_string(std::string_view text, const std::string& origin)
{
    PackageDb db;
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return db;

    Reader rd{text, origin, element_lines(text)};
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        std::size_t line = line_at(text, e.byte ? e.byte - 1 : 0);
        rd.fail(line, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) rd.fail(1, "top level must be an object");
    if (!doc.contains("version")) rd.fail(1, "missing \"version\"");
    if (!doc.at("version").is_number_integer() || doc.at("version").get<int>() != 1)
        rd.fail(1, "unsupported \"version\" (expected 1)");

    if (doc.contains("packages")) {
        const json& pkgs = doc.at("packages");
        if (!pkgs.is_array()) rd.fail(1, "\"packages\" must be an array");
        for (std::size_t i = 0; i < pkgs.size(); ++i) {
            const json& p = pkgs[i];
            std::size_t line = rd.line_of("packages", i);
            if (!p.is_object()) rd.fail(line, "package entry must be an object");
            PackageRecord rec;
            rec.name = rd.str(p, "name", line, true);
            if (rec.name.empty()) rd.fail(line, "package name is empty");
            if (p.contains("priority")) {
                if (!p.at("priority").is_number_integer()) rd.fail(line, "\"priority\" must be an integer");
                rec.priority = p.at("priority").get<int>();
            }
            rec.provides_commands = rd.names(p, "provides_commands", line);
            rec.provides_environments = rd.names(p, "provides_environments", line);
            std::string opts = rd.str(p, "default_options", line, false);
            if (!opts.empty()) rec.default_options = opts;
            rec.notes = rd.str(p, "notes", line, false);
            rec.loads = rd.names(p, "loads", line);
            if (db.records_.count(rec.name))
                throw DbError(DbError::Kind::DuplicatePackage, line,
                              origin + ":" + std::to_string(line) + ": package \"" + rec.name + "\" declared twice");
            for (const auto& c : rec.provides_commands) db.command_index_[c].insert(rec.name);
            for (const auto& e : rec.provides_environments) db.environment_index_[e].insert(rec.name);
            db.records_.emplace(rec.name, std::move(rec));
        }
    }

    if (doc.contains("conflicts")) {
        const json& cs = doc.at("conflicts");
        if (!cs.is_array()) rd.fail(1, "\"conflicts\" must be an array");
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const json& c = cs[i];
            std::size_t line = rd.line_of("conflicts", i);
            if (!c.is_object()) rd.fail(line, "conflict entry must be an object");
            ConflictRule rule;
            rule.a = rd.str(c, "a", line, true);
            rule.b = rd.str(c, "b", line, true);
            if (rule.a.empty() || rule.b.empty()) rd.fail(line, "conflict names must be non-empty");
            if (rule.a == rule.b) rd.fail(line, "conflict between \"" + rule.a + "\" and itself");
            std::string kind = rd.str(c, "kind", line, true);
            if (kind == "incompatible") {
                rule.kind = ConflictKind::Incompatible;
            } else if (kind == "order") {
                rule.kind = ConflictKind::OrderSensitive;
                if (c.contains("a_before_b")) {
                    if (!c.at("a_before_b").is_boolean()) rd.fail(line, "\"a_before_b\" must be a boolean");
                    rule.a_before_b = c.at("a_before_b").get<bool>();
                }
            } else {
                rd.fail(line, "unknown conflict kind \"" + kind + "\"");
            }
            rule.resolution_hint = rd.str(c, "resolution_hint", line, false);
            std::string remove = rd.str(c, "remove", line, false);
            if (!remove.empty()) {
                if (remove != rule.a && remove != rule.b) rd.fail(line, "\"remove\" must name a or b");
                rule.remove = remove;
            }
            db.conflicts_.push_back(std::move(rule));
        }
    }

    if (doc.contains("kernel")) {
        const json& k = doc.at("kernel");
        if (!k.is_object()) rd.fail(1, "\"kernel\" must be an object");
        db.kernel_commands_ = rd.names(k, "commands", 0);
        db.kernel_environments_ = rd.names(k, "environments", 0);
        db.math_only_ = rd.names(k, "math_only", 0);
    }
    return db;
}

PackageDb load_db(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DbError(DbError::Kind::SchemaError, 0, path + ": cannot read package db");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_db_from_string(ss.str(), path);
}

std::string default_db_path()
{
    if (const char* env = std::getenv("TEXREPAIR_DB"); env && *env) return env;
    return std::string(TEXREPAIR_DATA_DIR) + "/packages.json";
}

const PackageDb& default_db()
{
    static const PackageDb db = load_db(default_db_path());
    return db;
}

std::string_view to_string(SymbolKind kind)
{
    return kind == SymbolKind::Command ? "command" : "environment";
}

std::string_view to_string(ConflictKind kind)
{
    return kind == ConflictKind::Incompatible ? "incompatible" : "order";
}

}  // namespace texrepair
