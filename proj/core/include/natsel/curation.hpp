#pragma once

#include "natsel/record.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace natsel {

enum class StrategyKind {
    random,
    global_highest,
    global_lowest,
    global_middle,
    local_highest,
    local_lowest,
    all_teachers,
};

struct SelectionStrategy {
    StrategyKind kind = StrategyKind::local_highest;
    std::optional<std::uint64_t> seed; // required iff kind == random

    static SelectionStrategy parse(std::string_view kind_text,
                                   std::optional<std::uint64_t> seed = std::nullopt);
    std::string kind_name() const;
    void validate() const;
};

// The chosen candidate for one prompt (one record per candidate for
// all_teachers). score_used is the score the strategy keyed on (local_lp for
// random/all_teachers, reported for audit).
struct SelectionRecord {
    std::string prompt_id;
    std::string teacher_id;
    int candidate_index = 0;
    std::string strategy; // kind name
    std::optional<std::uint64_t> seed;
    double score_used = 0.0;
    bool tie_broken = false;

    bool operator==(const SelectionRecord&) const = default;
};

struct TeacherRow {
    std::string teacher_id;
    double mean_local_lp = 0.0;
    double mean_global_lp = 0.0;
    std::int64_t n_prompts = 0;
    bool tied = false; // mean_local_lp within 1e-12 of a neighbour
};

// Teachers ordered by mean local log-prob, descending. subset_prompt_ids is
// non-empty only for subset rankings (audit trail).
struct TeacherRanking {
    std::vector<TeacherRow> rows;
    std::vector<std::string> subset_prompt_ids;
};

// Per-prompt selection. Scores must share one scorer_id and window policy;
// ties resolve to the lexicographically smallest (teacher_id,
// candidate_index) and are flagged. The random strategy draws per prompt from
// SHA-256(seed, prompt_id), so edits to one prompt never perturb another
// prompt's draw.
std::vector<SelectionRecord> select(const std::vector<ScoreRecord>& scores,
                                    const SelectionStrategy& strategy);

TeacherRanking rank_teachers(const std::vector<ScoreRecord>& scores);

// Ranking over a uniform sample of n_prompts prompts, drawn without
// replacement with the given seed.
TeacherRanking rank_teachers_subset(const std::vector<ScoreRecord>& scores, int n_prompts,
                                    std::uint64_t seed);

struct CompositionRow {
    std::string teacher_id;
    std::int64_t wins = 0;
    double percent = 0.0; // rounded to one decimal
};

// Share of prompts won per teacher for a single-strategy selection.
std::vector<CompositionRow> composition_report(const std::vector<SelectionRecord>& selections);

// Keeps candidates whose extracted final answer matches the prompt's ground
// truth; candidates without ground truth pass through with a warning.
// Kept candidates get answer_correct = true.
std::vector<CandidateResponse> filter_correct(const std::vector<CandidateResponse>& candidates,
                                              const std::vector<PromptRecord>& prompts);

// Last \boxed{...} span if present, else the tail of the last line after an
// "answer is" marker. nullopt when neither applies.
std::optional<std::string> extract_final_answer(std::string_view response);

// Whitespace trim + surrounding-brace strip + trailing sentence punctuation
// strip, applied to both sides of the comparison.
std::string normalize_answer(std::string_view answer);

struct SftRecord {
    std::string prompt;
    std::string response;
    std::string teacher_id;

    bool operator==(const SftRecord&) const = default;
};

// Writes {"prompt", "response", "teacher_id"} JSONL in prompt-id order.
void emit_sft_dataset(const std::vector<SelectionRecord>& selections,
                      const std::vector<PromptRecord>& prompts,
                      const std::vector<CandidateResponse>& candidates,
                      const std::filesystem::path& path);

std::vector<SftRecord> load_sft(const std::filesystem::path& path);

// Selection JSONL round-trip (for the report subcommand).
std::string to_line(const SelectionRecord& r);
void write_selections(const std::vector<SelectionRecord>& selections,
                      const std::filesystem::path& path);
std::vector<SelectionRecord> load_selections(const std::filesystem::path& path);

// CSV reports: header row, UTF-8, LF line endings.
std::string ranking_to_csv(const TeacherRanking& ranking);
std::string composition_to_csv(const std::vector<CompositionRow>& rows);

} // namespace natsel
