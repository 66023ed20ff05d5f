#include "texrepair/patch.hpp"

#include <algorithm>

namespace texrepair {

namespace {

std::vector<const Edit*> sorted_edits(const Patch& patch)
{
    std::vector<const Edit*> edits;
    for (const auto& e : patch.edits) edits.push_back(&e);
    std::sort(edits.begin(), edits.end(), [](const Edit* a, const Edit* b) {
        return a->span.start != b->span.start ? a->span.start < b->span.start : a->span.end < b->span.end;
    });
    return edits;
}

}  // namespace

void check_patch(const SourceDocument& doc, const Patch& patch)
{
    for (const auto& e : patch.edits) {
        if (e.span.start > e.span.end || e.span.end > doc.size()) {
            throw PatchError(PatchError::Kind::SpanOutOfRange,
                             "edit span [" + std::to_string(e.span.start) + ", " + std::to_string(e.span.end) +
                                 ") exceeds document of " + std::to_string(doc.size()) + " bytes");
        }
    }
    auto edits = sorted_edits(patch);
    for (std::size_t i = 1; i < edits.size(); ++i) {
        const Span& a = edits[i - 1]->span;
        const Span& b = edits[i]->span;
        bool same_point = a.start == b.start && (a.empty() || b.empty());
        if (b.start < a.end || same_point) {
            throw PatchError(PatchError::Kind::OverlappingEdits,
                             "edits at " + std::to_string(a.start) + " and " + std::to_string(b.start) + " overlap");
        }
    }
}

SourceDocument apply_patch(const SourceDocument& doc, const Patch& patch)
{
    check_patch(doc, patch);
    auto edits = sorted_edits(patch);
    std::string text = doc.text();
    // Descending order keeps earlier offsets valid.
    for (auto it = edits.rbegin(); it != edits.rend(); ++it) {
        const Edit& e = **it;
        text.replace(e.span.start, e.span.size(), e.replacement);
    }
    return SourceDocument(std::move(text), doc.path());
}

std::size_t map_offset(const Patch& patch, std::size_t offset)
{
    long long shift = 0;
    for (const Edit* ep : sorted_edits(patch)) {
        const Edit& e = *ep;
        if (e.span.start > offset) break;
        if (e.span.end <= offset && !(e.span.empty() && e.span.start == offset)) {
            shift += static_cast<long long>(e.replacement.size()) - static_cast<long long>(e.span.size());
        } else if (e.span.empty() && e.span.start == offset) {
            // Insertions at the offset push it right.
            shift += static_cast<long long>(e.replacement.size());
        } else if (e.span.start < offset && offset < e.span.end) {
            // Inside a replaced range: clamp to the end of the replacement.
            return static_cast<std::size_t>(static_cast<long long>(e.span.start) + shift +
                                            static_cast<long long>(e.replacement.size()));
        }
    }
    return static_cast<std::size_t>(static_cast<long long>(offset) + shift);
}

}  // namespace texrepair
