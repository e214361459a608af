#pragma once

#include "natsel/record.hpp"
#include "natsel/scorer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace natsel {

// Context-construction and dispatch settings for a scoring run.
struct ScoringJob {
    WindowPolicy window_policy = WindowPolicy::fixed_k(4);
    // true: the prompt is in every step's context. false: only while the
    // window still covers all preceding steps (the narrow reading of the
    // conditioning prose).
    bool include_prompt = true;
    int parallelism = 1;
    // Inserted between prompt text and response/window text when the prompt
    // is part of the context and non-empty.
    std::string separator = "\n";

    void validate() const;
};

// Token-mean log-prob of the whole response given the prompt (nats/token).
double global_logprob(Scorer& scorer, const PromptRecord& prompt, std::string_view response,
                      std::string_view separator = "\n");

struct LocalScores {
    double local_lp = 0.0;                    // unweighted mean of step_lps
    std::vector<double> step_lps;             // token-mean log-prob per step
    std::vector<std::int64_t> step_token_counts;
    double token_weighted_lp = 0.0;           // sum(count_i * step_lps[i]) / sum(count_i)
};

// Per-step scoring: step i is scored as a continuation of
//   [prompt + separator +] window steps (byte-exact, with stored whitespace)
// where the window holds the last min(k_i, i-1) steps under the policy.
LocalScores local_logprob(Scorer& scorer, const PromptRecord& prompt,
                          const std::vector<Step>& steps, const WindowPolicy& policy,
                          bool include_prompt = true, std::string_view separator = "\n");

// Scores every candidate (which must be segmented) under the job's policy.
// Output order equals input order regardless of parallel completion order;
// route the scorer through a CachingScorer to make interrupted runs
// resumable.
std::vector<ScoreRecord> score_dataset(const std::vector<PromptRecord>& prompts,
                                       const std::vector<CandidateResponse>& candidates,
                                       Scorer& scorer, const ScoringJob& job);

// One row of the window ablation: mean score per teacher, either under a
// fractional window (fraction set) or the global score (fraction empty).
struct AblationRow {
    std::optional<double> fraction;
    std::string teacher_id;
    double mean_lp = 0.0;
    std::int64_t n_candidates = 0;
};

std::vector<AblationRow> window_ablation(const std::vector<PromptRecord>& prompts,
                                         const std::vector<CandidateResponse>& candidates,
                                         Scorer& scorer, const std::vector<double>& fractions,
                                         const ScoringJob& base_job = {});

// Default ablation fractions.
std::vector<double> default_ablation_fractions();

} // namespace natsel
