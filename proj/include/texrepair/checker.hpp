#pragma once

#include <set>
#include <string>
#include <string_view>

#include "texrepair/ast.hpp"
#include "texrepair/log.hpp"
#include "texrepair/package_db.hpp"
#include "texrepair/source.hpp"

namespace texrepair {

/// What a document can use: kernel, loaded packages and what they pull in, local definitions.
class DocSymbols {
public:
    DocSymbols(const Ast& ast, const PackageDb& db);

    bool command_known(std::string_view name) const;
    bool environment_known(std::string_view name) const;
    bool loaded(std::string_view package) const { return loaded_.count(std::string(package)) > 0; }
    /// A class or package the db knows nothing about is in play, so an unknown
    /// name proves nothing.
    bool open_world() const { return open_world_; }
    const std::set<std::string>& packages() const { return loaded_; }
    const std::string& document_class() const { return class_; }
    const PackageDb& db() const { return db_; }

private:
    const Ast& ast_;
    const PackageDb& db_;
    std::set<std::string> loaded_;
    std::string class_;
    bool open_world_ = false;
};

struct ProxyOptions {
    /// Look up .bib files next to the document to resolve citations.
    bool read_bib_files = true;
};

/// Writes the log an engine would plausibly produce for `doc`, using static
/// checks only. Errors come in source order with `l.<n>` contexts.
std::string synthesize_log(const SourceDocument& doc, const Ast& ast, const PackageDb& db,
                           const ProxyOptions& options = {});

struct DefinedKeys {
    std::set<std::string> labels;
    std::set<std::string> citations;
};

/// Labels and citation keys the document defines, including readable .bib files.
DefinedKeys defined_keys(const SourceDocument& doc, const Ast& ast, const ProxyOptions& options = {});

/// synthesize_log followed by parse_log.
LogReport proxy_compile(const SourceDocument& doc, const Ast& ast, const PackageDb& db,
                        const ProxyOptions& options = {});

}  // namespace texrepair
