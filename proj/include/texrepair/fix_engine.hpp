#pragma once

#include <memory>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "texrepair/ast.hpp"
#include "texrepair/localizer.hpp"
#include "texrepair/package_db.hpp"
#include "texrepair/patch.hpp"
#include "texrepair/source.hpp"

namespace texrepair {

struct FixCandidate {
    Patch patch;
    std::string provider_id;
    std::optional<std::string> rule_id;
    std::string rationale;
};

enum class InvalidReason { ParseRegression, DiagnosticPersists, OutOfScopeEdit, MalformedPatch };
std::string_view to_string(InvalidReason r);

struct Validation {
    std::optional<InvalidReason> reason;  // empty: valid
    std::string detail;

    bool valid() const { return !reason; }
};

struct AttemptOutcome {
    int attempt = 1;
    std::string provider_id;
    std::optional<std::string> rule_id;
    std::string description;
    Validation validation;
};

enum class RepairStatus { Fixed, Unfixable, NoCandidates };
std::string_view to_string(RepairStatus s);

struct RepairResult {
    RepairStatus status = RepairStatus::NoCandidates;
    std::optional<FixCandidate> applied;
    int attempts = 0;
    std::vector<AttemptOutcome> validation_log;
};

class SuggestionProvider {
public:
    virtual ~SuggestionProvider() = default;
    virtual std::string id() const = 0;
    /// Candidates for one attempt (1-based). Inputs are never modified.
    virtual std::vector<FixCandidate> suggest(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast,
                                              const PackageDb& db, int attempt) = 0;
};

inline constexpr int kMaxAttempts = 3;

/// Deterministic rule catalog R1-R9.
std::vector<FixCandidate> suggest_rule_based(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast,
                                             const PackageDb& db, int attempt);

class RuleProvider : public SuggestionProvider {
public:
    std::string id() const override { return "rules"; }
    std::vector<FixCandidate> suggest(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast,
                                      const PackageDb& db, int attempt) override
    {
        return suggest_rule_based(diag, doc, ast, db, attempt);
    }
};

/// Checks a candidate without compiling: the patched source must parse no
/// worse, lose the diagnostic, and stay near it.
Validation validate(const FixCandidate& candidate, const SourceDocument& doc, const Diagnostic& diag,
                    const PackageDb& db);

RepairResult repair(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast, const PackageDb& db,
                    const std::vector<SuggestionProvider*>& providers);

/// One repaired diagnostic inside a whole-document run.
struct DocumentFix {
    Diagnostic diagnostic;
    RepairResult result;
};

struct DocumentRepair {
    SourceDocument document;
    std::vector<DocumentFix> fixes;
    /// Diagnostics left after the last round.
    std::vector<Diagnostic> remaining;
};

struct RepairOptions {
    std::size_t max_rounds = 50;
    /// Diagnoses the current text; `round` counts from 0. Unset: the static proxy.
    std::function<std::vector<Diagnostic>(const SourceDocument&, const Ast&, std::size_t round)> diagnose;
    /// Asked before a Fixed patch is applied; a refusal counts as giving up on that diagnostic.
    std::function<bool(const Diagnostic&, const RepairResult&, const SourceDocument&)> accept;
};

/// Fixes diagnostics one at a time in span order, re-diagnosing between fixes.
DocumentRepair repair_document(const SourceDocument& doc, const PackageDb& db,
                               const std::vector<SuggestionProvider*>& providers, std::size_t max_rounds = 50);
DocumentRepair repair_document(const SourceDocument& doc, const PackageDb& db,
                               const std::vector<SuggestionProvider*>& providers, const RepairOptions& options);

/// Diagnostics from the static proxy log.
std::vector<Diagnostic> proxy_diagnose(const SourceDocument& doc, const Ast& ast, const PackageDb& db);

// Remote provider: POSTs {"v":1, diagnostic, window, db} as JSON, expects
// {"v":1, "candidates":[{"edits":[{"start","end","text"}], "rationale"}]}.
struct RemoteConfig {
    std::string endpoint;  // http://host:port/path; empty disables the provider
    std::string token;
    int timeout_seconds = 20;
    int retries = 1;
    std::size_t window_lines = 30;
};

class RemoteProvider : public SuggestionProvider {
public:
    explicit RemoteProvider(RemoteConfig config);
    std::string id() const override { return "remote"; }
    bool enabled() const { return !config_.endpoint.empty(); }
    std::vector<FixCandidate> suggest(const Diagnostic& diag, const SourceDocument& doc, const Ast& ast,
                                      const PackageDb& db, int attempt) override;

    /// The request body, exposed for tests.
    std::string request_body(const Diagnostic& diag, const SourceDocument& doc, const PackageDb& db,
                             int attempt) const;
    /// Parses a response body; malformed input yields no candidates.
    std::vector<FixCandidate> parse_response(const std::string& body, const SourceDocument& doc) const;

private:
    RemoteConfig config_;
};

}  // namespace texrepair
