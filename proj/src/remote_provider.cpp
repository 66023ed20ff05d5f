#include <httplib.h>

#include <json.hpp>

#include "texrepair/fix_engine.hpp"
#include "texrepair/parser.hpp"

namespace texrepair {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string base;  // scheme://host:port
    std::string path;
};

std::optional<Endpoint> split_url(const std::string& url)
{
    auto scheme = url.find("://");
    if (scheme == std::string::npos) return std::nullopt;
    if (url.compare(0, scheme, "http") != 0) return std::nullopt;  // no TLS build
    auto slash = url.find('/', scheme + 3);
    Endpoint e;
    e.base = url.substr(0, slash);
    e.path = slash == std::string::npos ? "/" : url.substr(slash);
    return e;
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteConfig config) : config_(std::move(config)) {}

std::string RemoteProvider::request_body(const Diagnostic& diag, const SourceDocument& doc, const PackageDb& db,
                                         int attempt) const
{
    std::size_t line = diag.span.line == 0 ? 1 : diag.span.line;
    std::size_t half = config_.window_lines / 2;
    std::size_t first = line > half ? line - half : 1;
    std::size_t last = std::min(doc.line_count(), first + config_.window_lines);
    std::size_t start = doc.line_start(first);
    std::size_t end = doc.line_end(last);
    if (end < doc.size()) ++end;

    json packages = json::array();
    Ast ast = parse(doc);
    for (const auto& p : ast.packages) {
        packages.push_back({{"name", p.name}, {"known", db.find(p.name) != nullptr}});
    }

    json body = {
        {"v", 1},
        {"attempt", attempt},
        {"diagnostic",
         {{"id", diag.id},
          {"category", diag.category ? std::string(to_string(*diag.category)) : std::string()},
          {"cause", diag.cause},
          {"message", diag.message},
          {"log", diag.log_message},
          {"token", diag.token},
          {"line", diag.span.line},
          {"start", diag.span.start},
          {"end", diag.span.end}}},
        {"window", {{"first_line", first}, {"start", start}, {"text", std::string(doc.slice(doc.make_span(start, end)))}}},
        {"packages", packages},
    };
    return body.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<FixCandidate> RemoteProvider::parse_response(const std::string& body, const SourceDocument& doc) const
{
    std::vector<FixCandidate> out;
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("v", 0) != 1) return out;
    auto it = j.find("candidates");
    if (it == j.end() || !it->is_array()) return out;
    for (const auto& c : *it) {
        if (!c.is_object() || !c.contains("edits") || !c["edits"].is_array()) continue;
        FixCandidate cand;
        cand.provider_id = "remote";
        bool ok = true;
        for (const auto& e : c["edits"]) {
            if (!e.is_object() || !e.contains("start") || !e.contains("end") || !e["start"].is_number_unsigned() ||
                !e["end"].is_number_unsigned()) {
                ok = false;
                break;
            }
            std::size_t a = e["start"].get<std::size_t>(), b = e["end"].get<std::size_t>();
            if (a > b || b > doc.size()) {
                ok = false;
                break;
            }
            std::string text = e.contains("text") && e["text"].is_string() ? e["text"].get<std::string>() : "";
            cand.patch.edits.push_back({doc.make_span(a, b), std::move(text)});
        }
        if (!ok) continue;
        cand.rationale = c.contains("rationale") && c["rationale"].is_string() ? c["rationale"].get<std::string>() : "";
        cand.patch.description = cand.rationale.empty() ? "remote suggestion" : cand.rationale;
        out.push_back(std::move(cand));
    }
    return out;
}

std::vector<FixCandidate> RemoteProvider::suggest(const Diagnostic& diag, const SourceDocument& doc, const Ast&,
                                                  const PackageDb& db, int attempt)
{
    if (!enabled()) return {};
    auto ep = split_url(config_.endpoint);
    if (!ep) return {};
    httplib::Client cli(ep->base);
    cli.set_connection_timeout(config_.timeout_seconds, 0);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    cli.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);
    std::string body = request_body(diag, doc, db, attempt);
    for (int i = 0; i <= std::max(0, config_.retries); ++i) {
        auto res = cli.Post(ep->path, headers, body, "application/json");
        if (!res) continue;
        if (res->status >= 500) continue;
        if (res->status != 200) return {};
        return parse_response(res->body, doc);
    }
    return {};
}

}  // namespace texrepair
