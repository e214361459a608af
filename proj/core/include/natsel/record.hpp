#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace natsel {

// One input prompt x, with the optional ground-truth final answer used by the
// correctness filter.
struct PromptRecord {
    std::string prompt_id;
    std::string text;
    std::optional<std::string> ground_truth;

    bool operator==(const PromptRecord&) const = default;
};

// One logical step s_i of a response. index is 1-based; text carries the
// step's trailing delimiter/whitespace so concatenating steps reproduces the
// response byte-for-byte.
struct Step {
    int index = 0;
    std::string text;

    bool operator==(const Step&) const = default;
};

// Concatenation of step texts (the inverse of segmentation).
std::string reconstruct(const std::vector<Step>& steps);

// One teacher response y to a prompt. steps is empty until segmentation runs.
struct CandidateResponse {
    std::string prompt_id;
    std::string teacher_id;
    int candidate_index = 0;
    std::string text;
    std::vector<Step> steps;
    std::optional<bool> answer_correct;

    bool operator==(const CandidateResponse&) const = default;
};

// How many preceding steps a step's scoring context may contain.
//   fixed    - at most k preceding steps
//   fraction - at most ceil(f * (i-1)) preceding steps for step i
//   full     - all preceding steps (local score degenerates to global)
struct WindowPolicy {
    enum class Kind { fixed, fraction, full };

    Kind kind = Kind::fixed;
    int k = 4;
    double fraction = 0.0;

    static WindowPolicy fixed_k(int k);
    static WindowPolicy fractional(double fraction);
    static WindowPolicy full();

    // Accepts "fixed:K", "fraction:F" and "full".
    static WindowPolicy parse(std::string_view text);
    std::string to_string() const;

    // Number of preceding steps included in the context of step i (1-based),
    // already clamped to the i-1 steps that exist.
    int window_for_step(int step_index) const;

    void validate() const;

    bool operator==(const WindowPolicy&) const = default;
};

// Scores for one candidate under one scorer and window policy. global_lp and
// every step_lps entry are token-mean log-probs in nats; local_lp is the
// unweighted mean of step_lps.
struct ScoreRecord {
    std::string prompt_id;
    std::string teacher_id;
    int candidate_index = 0;
    std::string scorer_id;
    std::int64_t token_count = 0;
    double global_lp = 0.0;
    std::vector<double> step_lps;
    double local_lp = 0.0;
    WindowPolicy window_policy;

    // Checks the invariants listed above; throws ValidationError.
    void validate() const;

    bool operator==(const ScoreRecord&) const = default;
};

} // namespace natsel
