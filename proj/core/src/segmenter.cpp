#include "natsel/segmenter.hpp"

#include "natsel/errors.hpp"
#include "natsel/util.hpp"

#include <algorithm>
#include <utility>

namespace natsel {

using util::Utf8Char;

void SegmenterConfig::validate() const {
    for (const auto& a : abbreviations) {
        if (a.empty() || a.back() != '.') {
            throw ValidationError("segmenter: abbreviation \"" + a + "\" must end with '.'");
        }
    }
}

namespace {

bool is_terminal(char32_t cp) {
    return cp == U'.' || cp == U'!' || cp == U'?' ||
           cp == U'。' || cp == U'！' || cp == U'？';
}

bool is_ascii_alnum(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Spans of code point indices covered by $...$ or $$...$$ math. An unpaired
// dollar is literal text.
std::vector<std::pair<std::size_t, std::size_t>> math_spans(const std::vector<Utf8Char>& cs) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    const std::size_t n = cs.size();
    std::size_t i = 0;
    while (i < n) {
        if (cs[i].cp != U'$') {
            ++i;
            continue;
        }
        if (i + 1 < n && cs[i + 1].cp == U'$') {
            std::size_t j = i + 2;
            while (j + 1 < n && !(cs[j].cp == U'$' && cs[j + 1].cp == U'$')) ++j;
            if (j + 1 < n) {
                spans.emplace_back(i, j + 2);
                i = j + 2;
                continue;
            }
            i += 2;
            continue;
        }
        std::size_t j = i + 1;
        while (j < n && cs[j].cp != U'$') ++j;
        if (j < n) {
            spans.emplace_back(i, j + 1);
            i = j + 1;
            continue;
        }
        ++i;
    }
    return spans;
}

// True when the '.' at cs[i] closes a configured abbreviation starting at a
// word boundary.
bool closes_abbreviation(std::string_view text, const std::vector<Utf8Char>& cs, std::size_t i,
                         const std::vector<std::string>& abbreviations) {
    const std::size_t dot_end = cs[i].offset + cs[i].length;
    for (const auto& abbr : abbreviations) {
        if (abbr.size() > dot_end) continue;
        const std::size_t start = dot_end - abbr.size();
        if (text.compare(start, abbr.size(), abbr) != 0) continue;
        if (start == 0 || !is_ascii_alnum(text[start - 1])) return true;
    }
    return false;
}

} // namespace

std::vector<Step> segment(std::string_view text, const SegmenterConfig& config) {
    if (text.empty()) throw ValidationError("segment: empty text");
    config.validate();

    const auto cs = util::decode_utf8(text);
    const std::size_t n = cs.size();

    std::vector<std::pair<std::size_t, std::size_t>> math;
    if (config.protect_math_spans) math = math_spans(cs);
    std::size_t math_idx = 0;

    std::vector<std::size_t> cuts; // code point index of each step start (> 0)
    bool has_content = false;      // non-whitespace seen since the last cut

    std::size_t i = 0;
    while (i < n) {
        // Skip math spans wholesale; their content never produces boundaries.
        while (math_idx < math.size() && math[math_idx].second <= i) ++math_idx;
        if (math_idx < math.size() && math[math_idx].first <= i && i < math[math_idx].second) {
            has_content = true;
            i = math[math_idx].second;
            continue;
        }

        const char32_t cp = cs[i].cp;
        if (!util::is_ascii_space(cp)) has_content = true;

        if (is_terminal(cp)) {
            bool protected_dot = false;
            if (cp == U'.') {
                const bool decimal = i > 0 && i + 1 < n && util::is_ascii_digit(cs[i - 1].cp) &&
                                     util::is_ascii_digit(cs[i + 1].cp);
                protected_dot = decimal ||
                                closes_abbreviation(text, cs, i, config.abbreviations);
            }
            const std::size_t next = i + 1;
            if (!protected_dot && (next >= n || util::is_ascii_space(cs[next].cp))) {
                std::size_t j = next;
                while (j < n && util::is_ascii_space(cs[j].cp)) ++j;
                if (j < n) {
                    cuts.push_back(j);
                    has_content = false;
                }
                i = j;
                continue;
            }
        } else if (config.split_on_blank_line && cp == U'\n' && has_content) {
            // A blank line (newline, optional spaces/tabs, newline) also ends
            // the step; the whole whitespace run stays with it.
            std::size_t j = i + 1;
            while (j < n && (cs[j].cp == U' ' || cs[j].cp == U'\t' || cs[j].cp == U'\r')) ++j;
            if (j < n && cs[j].cp == U'\n') {
                std::size_t run_end = i;
                while (run_end < n && util::is_ascii_space(cs[run_end].cp)) ++run_end;
                if (run_end < n) {
                    cuts.push_back(run_end);
                    has_content = false;
                }
                i = run_end;
                continue;
            }
        }
        ++i;
    }

    std::vector<Step> steps;
    steps.reserve(cuts.size() + 1);
    std::size_t begin = 0;
    int index = 0;
    for (const std::size_t cut : cuts) {
        const std::size_t end = cs[cut].offset;
        steps.push_back(Step{++index, std::string(text.substr(begin, end - begin))});
        begin = end;
    }
    steps.push_back(Step{++index, std::string(text.substr(begin))});
    return steps;
}

} // namespace natsel
