#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "texrepair/bench.hpp"
#include "texrepair/fix_engine.hpp"
#include "texrepair/localizer.hpp"

namespace texrepair {

enum class OutputFormat { Human, Json, Csv };
enum class FixMode { Suggest, Apply, Interactive };

struct RunConfig {
    std::optional<std::string> engine_path;
    CompileMode mode = CompileMode::ParserProxy;
    std::string db_path;  // empty: the shipped db
    RemoteConfig remote;  // disabled unless endpoint is set
    OutputFormat format = OutputFormat::Human;
    FixMode fix_mode = FixMode::Suggest;
};

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitFailure = 2;

/// Token for the remote provider is read from this variable, never from a flag.
inline constexpr const char* kRemoteTokenEnv = "TEXREPAIR_REMOTE_TOKEN";

/// The whole command line, argv[0] excluded. Never throws; failures are exit 2.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// The machine-readable diagnostics document `check --format json` prints.
std::string diagnostics_json(const std::string& file, const SourceDocument& doc, const Ast& ast,
                             const std::vector<Diagnostic>& diags, const PackageDb& db,
                             const std::vector<SuggestionProvider*>& providers);

/// Empty when `text` matches the diagnostics schema, else what is wrong.
std::vector<std::string> check_diagnostics_schema(const std::string& text);

/// Writes `text` to `path` through a temp file and rename; with `backup`, the
/// old contents go to `path + ".bak"` first, the same way.
void write_file_atomic(const std::string& path, const std::string& text, bool backup);

}  // namespace texrepair
