#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace texrepair {

/// Half-open byte range [start, end) plus the 1-based line of `start`.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t line = 1;

    std::size_t size() const { return end - start; }
    bool empty() const { return start == end; }
    bool contains(const Span& other) const { return start <= other.start && other.end <= end; }
    bool intersects(const Span& other) const;

    friend bool operator==(const Span&, const Span&) = default;
};

/// A document held as raw bytes. Bytes are never re-encoded, so invalid
/// UTF-8 survives every round trip.
class SourceDocument {
public:
    SourceDocument() : SourceDocument(std::string{}, std::string{}) {}
    explicit SourceDocument(std::string text, std::string path = "main.tex");

    static SourceDocument from_file(const std::string& path);

    const std::string& text() const { return text_; }
    const std::string& path() const { return path_; }
    std::size_t size() const { return text_.size(); }

    /// Number of lines; a trailing newline does not open a new line.
    std::size_t line_count() const;
    /// 1-based line containing `offset` (offset == size() maps to the last line).
    std::size_t line_of(std::size_t offset) const;
    std::size_t line_start(std::size_t line) const;
    /// End of the line's content, excluding the line terminator.
    std::size_t line_end(std::size_t line) const;
    /// Content span of a line (no terminator). Lines past the end clamp.
    Span line_span(std::size_t line) const;
    std::string_view line_text(std::size_t line) const;

    Span make_span(std::size_t start, std::size_t end) const { return {start, end, line_of(start)}; }

    std::string_view slice(const Span& s) const { return std::string_view(text_).substr(s.start, s.size()); }

private:
    std::string text_;
    std::string path_;
    std::vector<std::size_t> line_starts_;
};

}  // namespace texrepair
