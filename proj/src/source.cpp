#include "texrepair/source.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace texrepair {

bool Span::intersects(const Span& other) const
{
    if (empty() || other.empty()) {
        // A point intersects a range that strictly contains it, or an equal point.
        if (empty() && other.empty()) return start == other.start;
        const Span& point = empty() ? *this : other;
        const Span& range = empty() ? other : *this;
        return range.start <= point.start && point.start < range.end;
    }
    return start < other.end && other.start < end;
}

SourceDocument::SourceDocument(std::string text, std::string path) : text_(std::move(text)), path_(std::move(path))
{
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text_.size(); ++i) {
        if (text_[i] == '\n' && i + 1 < text_.size()) line_starts_.push_back(i + 1);
    }
}

SourceDocument SourceDocument::from_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return SourceDocument(buf.str(), path);
}

std::size_t SourceDocument::line_count() const { return text_.empty() ? 0 : line_starts_.size(); }

std::size_t SourceDocument::line_of(std::size_t offset) const
{
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    return static_cast<std::size_t>(it - line_starts_.begin());
}

std::size_t SourceDocument::line_start(std::size_t line) const
{
    if (line == 0) return 0;
    if (line > line_starts_.size()) return text_.size();
    return line_starts_[line - 1];
}

std::size_t SourceDocument::line_end(std::size_t line) const
{
    if (line == 0) line = 1;
    if (line > line_starts_.size()) return text_.size();
    std::size_t end = line < line_starts_.size() ? line_starts_[line] : text_.size();
    if (end > line_starts_[line - 1] && text_[end - 1] == '\n') --end;
    if (end > line_starts_[line - 1] && text_[end - 1] == '\r') --end;
    return end;
}

Span SourceDocument::line_span(std::size_t line) const
{
    if (line == 0) line = 1;
    if (line > line_starts_.size()) line = line_starts_.size();
    return {line_start(line), line_end(line), line};
}

std::string_view SourceDocument::line_text(std::size_t line) const { return slice(line_span(line)); }

}  // namespace texrepair
