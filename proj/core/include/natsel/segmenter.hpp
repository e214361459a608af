#pragma once

#include "natsel/record.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace natsel {

// Rule-based sentence segmentation. Boundaries fall after sentence-terminal
// punctuation (. ! ? and fullwidth 。！？) followed by whitespace or
// end-of-text, and at blank lines. No boundary fires inside a decimal number,
// a configured abbreviation, or a $…$ / $$…$$ math span. Trailing whitespace
// belongs to the preceding step, so reconstruct(segment(t)) == t byte for
// byte.
struct SegmenterConfig {
    // Entries must end with '.'; matched case-sensitively at word start.
    std::vector<std::string> abbreviations = {"e.g.", "i.e.", "Dr.", "Mr.",
                                              "Eq.", "Fig.", "vs."};
    bool split_on_blank_line = true;
    bool protect_math_spans = true;

    void validate() const;
};

// Splits text into steps 1..p partitioning it exactly. Text with no boundary
// is a single step. Throws ValidationError on empty text.
std::vector<Step> segment(std::string_view text, const SegmenterConfig& config = {});

} // namespace natsel
