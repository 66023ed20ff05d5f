#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "texrepair/fix_engine.hpp"
#include "texrepair/localizer.hpp"
#include "texrepair/package_db.hpp"
#include "texrepair/source.hpp"

namespace texrepair {

class NotInjectable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientCorpus : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BenchCase {
    std::string id;
    std::string seed_name;
    SourceDocument seed_doc;
    SourceDocument broken_doc;
    ErrorCategory category = ErrorCategory::UndefinedControl;
    /// Bytes of broken_doc that differ from the seed (empty for pure deletions).
    Span injection_span;
    /// Line a correct diagnosis points at.
    std::size_t truth_line = 0;
    std::string injection_rule;
    std::uint64_t rng_seed = 0;
};

/// Deterministic in (seed, category, rng_seed).
BenchCase inject(const SourceDocument& seed, ErrorCategory category, std::uint64_t rng_seed,
                 const PackageDb& db = default_db());

/// Only the "delete an \\end line" mutation, for the unclosed-environment sub-suite.
BenchCase inject_unclosed_environment(const SourceDocument& seed, std::uint64_t rng_seed,
                                      const PackageDb& db = default_db());

/// The reference category mix (112/98/74/86/79/51 of 500) scaled to `total` by largest remainder.
std::map<ErrorCategory, std::size_t> default_distribution(std::size_t total);

/// Sorted .tex files of a corpus directory (a `seeds` subdirectory wins when present).
std::vector<std::string> corpus_seeds(const std::string& corpus_dir);

std::vector<BenchCase> build_suite(const std::string& corpus_dir, const std::map<ErrorCategory, std::size_t>& counts,
                                   std::uint64_t rng_seed, const PackageDb& db = default_db());

enum class CompileMode { Engine, ParserProxy };
std::string_view to_string(CompileMode m);

struct EvalConfig {
    CompileMode mode = CompileMode::ParserProxy;
    std::string engine_path;
    int timeout_seconds = 60;
    /// Empty: the rule provider alone.
    std::vector<SuggestionProvider*> providers;
};

struct CaseResult {
    std::string case_id;
    ErrorCategory category = ErrorCategory::UndefinedControl;
    std::string injection_rule;
    bool detected = false;
    bool type_match = false;
    bool loc_match = false;
    bool fix_attempted = false;
    bool fix_valid = false;
    std::optional<bool> fix_compiles;
    bool timed_out = false;
    /// Attempt 1 failed on ParseRegression and a later attempt was valid.
    bool regenerated = false;
    int attempts = 0;
    std::int64_t runtime_ms = 0;

    /// What FA counts.
    bool fix_success() const { return fix_compiles.value_or(fix_valid); }
};

CaseResult evaluate_case(const BenchCase& c, const EvalConfig& config, const PackageDb& db = default_db());

/// Cases are independent; `jobs` workers (0: hardware concurrency). Results keep suite order.
std::vector<CaseResult> run_suite(const std::vector<BenchCase>& suite, const EvalConfig& config,
                                  const PackageDb& db = default_db(), unsigned jobs = 0);

struct Metrics {
    std::size_t n = 0;
    std::size_t da_hits = 0;
    std::size_t fa_hits = 0;
    /// Percent to one decimal; empty when n = 0.
    std::optional<double> da;
    std::optional<double> fa;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct BenchReport {
    std::map<ErrorCategory, Metrics> per_category;
    Metrics overall;
    std::map<std::string, std::string> config;

    friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

BenchReport score(const std::vector<CaseResult>& results, std::map<std::string, std::string> config = {});

enum class ReportFormat { Text, Json, Csv };

/// Extra display-only rows for the text table, e.g. published baselines.
struct BaselineRow {
    std::string system;
    BenchReport report;
};

std::string emit_report(const BenchReport& report, ReportFormat format, const std::vector<BaselineRow>& baselines = {},
                        const std::string& system_name = "texrepair");

BenchReport parse_report_json(const std::string& json_text);

}  // namespace texrepair
