#pragma once

#include <optional>
#include <string>

#include "texrepair/log.hpp"
#include "texrepair/source.hpp"

namespace texrepair {

struct EngineRun {
    bool started = false;
    bool timed_out = false;
    int exit_status = -1;
    std::string log_text;
    LogReport log;
};

/// First of pdflatex/xelatex/lualatex found on PATH.
std::optional<std::string> find_engine();

/// Compiles `doc` in a fresh temp dir in nonstop mode and parses its .log.
EngineRun run_engine(const std::string& engine_path, const SourceDocument& doc, int timeout_seconds = 60);

}  // namespace texrepair
