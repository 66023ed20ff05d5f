#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace texrepair {

/// Levenshtein distance; stops early and returns `cap + 1` once every path exceeds `cap`.
std::size_t edit_distance(std::string_view a, std::string_view b, std::size_t cap = static_cast<std::size_t>(-1));

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with(std::string_view s, std::string_view prefix);
bool ends_with(std::string_view s, std::string_view suffix);

/// Line-based unified diff between two texts, with `context` lines around changes.
std::string unified_diff(std::string_view before, std::string_view after, const std::string& path, std::size_t context = 3);

}  // namespace texrepair
