#pragma once

#include "json.hpp"
#include "texrepair/log.hpp"

namespace texrepair::testing {

template <typename T>
nlohmann::json opt(const std::optional<T>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Shape the golden files are stored in.
inline nlohmann::json to_json(const LogReport& report)
{
    nlohmann::json records = nlohmann::json::array();
    for (const auto& r : report.records) {
        records.push_back({
            {"severity", std::string(to_string(r.severity))},
            {"pattern", std::string(to_string(r.pattern))},
            {"message", r.message},
            {"raw_excerpt", r.raw_excerpt},
            {"file", r.file},
            {"reported_line", opt(r.reported_line)},
            {"token", opt(r.token)},
            {"package", opt(r.package)},
            {"referenced_line", opt(r.referenced_line)},
            {"detail", opt(r.detail)},
            {"column", opt(r.column)},
        });
    }
    return {{"engine", report.engine}, {"clean", report.clean}, {"records", records}};
}

}  // namespace texrepair::testing
