#pragma once

#include "texrepair/ast.hpp"
#include "texrepair/source.hpp"

namespace texrepair {

/// Parses any byte sequence into a lossless tree. Never fails: malformed
/// regions become nodes carrying an ErrorKind.
Ast parse(const SourceDocument& doc);

/// Environments whose body is typeset in math mode.
bool is_math_environment(std::string_view name);
/// Environments whose body is kept verbatim.
bool is_verbatim_environment(std::string_view name);

}  // namespace texrepair
