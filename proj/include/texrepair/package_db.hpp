#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace texrepair {

enum class SymbolKind { Command, Environment };

struct PackageRecord {
    std::string name;
    int priority = 0;
    std::set<std::string> provides_commands;
    std::set<std::string> provides_environments;
    std::optional<std::string> default_options;
    std::string notes;
    /// Packages this one loads itself.
    std::set<std::string> loads;
};

enum class ConflictKind { Incompatible, OrderSensitive };

struct ConflictRule {
    std::string a;
    std::string b;
    ConflictKind kind = ConflictKind::Incompatible;
    /// OrderSensitive only: true when `a` has to be loaded before `b`.
    bool a_before_b = true;
    std::string resolution_hint;
    /// Package the repair drops for an incompatible pair, if the db names one.
    std::optional<std::string> remove;
};

class DbError : public std::runtime_error {
public:
    enum class Kind { SchemaError, DuplicatePackage };

    DbError(Kind kind, std::size_t line, const std::string& what)
        : std::runtime_error(what), kind_(kind), line_(line) {}
    Kind kind() const { return kind_; }
    /// 1-based line in the db file, 0 when unknown.
    std::size_t line() const { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

/// Immutable once loaded.
class PackageDb {
public:
    PackageDb() = default;

    const std::map<std::string, PackageRecord>& records() const { return records_; }
    const std::vector<ConflictRule>& conflicts() const { return conflicts_; }
    const PackageRecord* find(std::string_view name) const;
    bool empty() const { return records_.empty(); }

    /// Every package providing the symbol, highest priority first, ties by name.
    std::vector<const PackageRecord*> provider_of(SymbolKind kind, std::string_view name) const;

    /// Rules violated by `loaded` (package names in load order), in db order.
    std::vector<const ConflictRule*> conflicts_in(const std::vector<std::string>& loaded) const;

    const std::map<std::string, std::set<std::string>>& symbol_index(SymbolKind kind) const;

    /// `names` plus everything they load, transitively.
    std::set<std::string> closure(const std::vector<std::string>& names) const;

    bool is_kernel(SymbolKind kind, std::string_view name) const;
    /// Commands that are only legal in math mode.
    bool is_math_only(std::string_view name) const;
    const std::set<std::string>& kernel(SymbolKind kind) const;

    /// Kernel plus every package symbol of this kind.
    std::set<std::string> all_symbols(SymbolKind kind) const;

private:
    friend PackageDb load_db_from_string(std::string_view, const std::string&);

    std::map<std::string, PackageRecord> records_;
    std::vector<ConflictRule> conflicts_;
    std::map<std::string, std::set<std::string>> command_index_;
    std::map<std::string, std::set<std::string>> environment_index_;
    std::set<std::string> kernel_commands_;
    std::set<std::string> kernel_environments_;
    std::set<std::string> math_only_;
};

PackageDb load_db(const std::string& path);
PackageDb load_db_from_string(std::string_view text, const std::string& origin = "<string>");

/// The db shipped in data/packages.json, loaded once.
const PackageDb& default_db();
std::string default_db_path();

std::string_view to_string(SymbolKind kind);
std::string_view to_string(ConflictKind kind);

}  // namespace texrepair
