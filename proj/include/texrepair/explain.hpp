#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "texrepair/localizer.hpp"

namespace texrepair {

class MissingTemplate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Plain-English explanation ending in what to do about it.
/// Throws MissingTemplate when the catalog has nothing for the diagnostic.
std::string explain(const Diagnostic& d);

/// True when a generic template exists for the pair (cause-specific ones may add to it).
bool has_template(std::optional<ErrorCategory> category, LogPattern pattern);

/// Fills {token}, {detail}, {provider}, {usepackage}, {line}, {reported}.
std::string render_template(std::string_view text, const Diagnostic& d);

}  // namespace texrepair
