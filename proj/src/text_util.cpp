#include "texrepair/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace texrepair {

std::size_t edit_distance(std::string_view a, std::string_view b, std::size_t cap)
{
    // optimal string alignment: an adjacent swap is one slip, not two
    std::size_t n = a.size(), m = b.size();
    if ((n > m ? n - m : m - n) > cap) return cap + 1;
    std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    std::size_t prev_min = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        std::size_t row_min = cur[0];
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) cur[j] = std::min(cur[j], prev2[j - 2] + 1);
            row_min = std::min(row_min, cur[j]);
        }
        // a swap reaches back two rows, so both must be over the cap
        if (row_min > cap && prev_min > cap) return cap + 1;
        prev_min = row_min;
        std::swap(prev2, prev);
        std::swap(prev, cur);
    }
    return std::min(prev[m], cap + 1);
}

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

bool ends_with(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

namespace {

std::vector<std::string_view> lines_of(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, nl - start + 1));
        start = nl + 1;
    }
    return out;
}

enum class Op { Keep, Del, Add };

std::string hunk_range(std::size_t start, std::size_t count)
{
    // unified diff convention: empty ranges point at the line before
    std::size_t shown = count == 0 ? start : start + 1;
    if (count == 1) return std::to_string(shown);
    return std::to_string(shown) + "," + std::to_string(count);
}

}  // namespace

std::string unified_diff(std::string_view before, std::string_view after, const std::string& path, std::size_t context)
{
    auto a = lines_of(before);
    auto b = lines_of(after);
    std::size_t pre = 0;
    while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) ++pre;
    std::size_t suf = 0;
    while (suf < a.size() - pre && suf < b.size() - pre && a[a.size() - 1 - suf] == b[b.size() - 1 - suf]) ++suf;
    if (pre == a.size() && pre == b.size()) return {};

    // LCS over the changed middle; fixes are local so this stays small.
    std::size_t n = a.size() - pre - suf, m = b.size() - pre - suf;
    std::vector<std::pair<Op, std::size_t>> script;  // index into a (Keep/Del) or b (Add)
    for (std::size_t i = 0; i < pre; ++i) script.push_back({Op::Keep, i});
    if (n * m <= 4'000'000) {
        std::vector<std::vector<unsigned>> L(n + 1, std::vector<unsigned>(m + 1, 0));
        for (std::size_t i = n; i-- > 0;)
            for (std::size_t j = m; j-- > 0;)
                L[i][j] = a[pre + i] == b[pre + j] ? L[i + 1][j + 1] + 1 : std::max(L[i + 1][j], L[i][j + 1]);
        std::size_t i = 0, j = 0;
        while (i < n || j < m) {
            if (i < n && j < m && a[pre + i] == b[pre + j]) {
                script.push_back({Op::Keep, pre + i});
                ++i, ++j;
            } else if (i < n && (j == m || L[i + 1][j] >= L[i][j + 1])) {
                // removals before additions, like diff(1)
                script.push_back({Op::Del, pre + i});
                ++i;
            } else {
                script.push_back({Op::Add, pre + j});
                ++j;
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) script.push_back({Op::Del, pre + i});
        for (std::size_t j = 0; j < m; ++j) script.push_back({Op::Add, pre + j});
    }
    for (std::size_t i = 0; i < suf; ++i) script.push_back({Op::Keep, a.size() - suf + i});

    std::ostringstream out;
    std::string_view shown = path;
    while (!shown.empty() && shown.front() == '/') shown.remove_prefix(1);
    out << "--- a/" << shown << "\n+++ b/" << shown << "\n";
    auto text_of = [&](const std::pair<Op, std::size_t>& s) {
        std::string_view l = s.first == Op::Add ? b[s.second] : a[s.second];
        std::string line(l);
        if (line.empty() || line.back() != '\n') line += "\n\\ No newline at end of file\n";
        return line;
    };

    std::size_t k = 0;
    while (k < script.size()) {
        while (k < script.size() && script[k].first == Op::Keep) ++k;
        if (k == script.size()) break;
        std::size_t hs = k >= context ? k - context : 0;
        // extend the hunk while changes are within 2*context of each other
        std::size_t he = k;
        while (true) {
            while (he < script.size() && script[he].first != Op::Keep) ++he;
            std::size_t next = he;
            while (next < script.size() && script[next].first == Op::Keep) ++next;
            if (next < script.size() && next - he <= 2 * context) {
                he = next;
                continue;
            }
            he = std::min(script.size(), he + context);
            break;
        }
        // line numbers at hunk start
        std::size_t a_start = 0, b_start = 0, a_count = 0, b_count = 0;
        for (std::size_t t = 0; t < hs; ++t) {
            if (script[t].first != Op::Add) ++a_start;
            if (script[t].first != Op::Del) ++b_start;
        }
        for (std::size_t t = hs; t < he; ++t) {
            if (script[t].first != Op::Add) ++a_count;
            if (script[t].first != Op::Del) ++b_count;
        }
        out << "@@ -" << hunk_range(a_start, a_count) << " +" << hunk_range(b_start, b_count) << " @@\n";
        for (std::size_t t = hs; t < he; ++t) {
            char mark = script[t].first == Op::Keep ? ' ' : script[t].first == Op::Del ? '-' : '+';
            out << mark << text_of(script[t]);
        }
        k = he;
    }
    return out.str();
}

}  // namespace texrepair
