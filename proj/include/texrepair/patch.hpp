#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "texrepair/source.hpp"

namespace texrepair {

struct Edit {
    Span span;
    std::string replacement;

    friend bool operator==(const Edit&, const Edit&) = default;
};

/// A set of non-overlapping edits against one document version.
struct Patch {
    std::vector<Edit> edits;
    std::string description;

    bool empty() const { return edits.empty(); }
    friend bool operator==(const Patch&, const Patch&) = default;
};

class PatchError : public std::runtime_error {
public:
    enum class Kind { OverlappingEdits, SpanOutOfRange };

    PatchError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Throws PatchError if any span is out of range or two spans intersect.
/// Two insertions at the same offset count as overlapping.
void check_patch(const SourceDocument& doc, const Patch& patch);

/// Applies `patch` and returns the new document; `doc` is left untouched.
SourceDocument apply_patch(const SourceDocument& doc, const Patch& patch);

/// Where `offset` in the original document lands after `patch`.
std::size_t map_offset(const Patch& patch, std::size_t offset);

}  // namespace texrepair
