#include "natsel/metrics.hpp"

#include "natsel/errors.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace natsel {

namespace {

// Extended-precision accumulation keeps token means exact when every term is
// identical (the uniform-scorer invariant) and tightens rounding generally.
double mean(const std::vector<double>& values) {
    long double sum = 0.0L;
    for (double v : values) sum += v;
    return static_cast<double>(sum / static_cast<long double>(values.size()));
}

std::string build_context(const PromptRecord& prompt, bool with_prompt,
                          std::string_view separator, const std::vector<Step>& steps,
                          std::size_t window_begin, std::size_t window_end) {
    std::string context;
    if (with_prompt && !prompt.text.empty()) {
        context += prompt.text;
        context += separator;
    }
    for (std::size_t j = window_begin; j < window_end; ++j) context += steps[j].text;
    return context;
}

} // namespace

void ScoringJob::validate() const {
    window_policy.validate();
    if (parallelism < 1) throw ValidationError("scoring job: parallelism must be >= 1");
}

double global_logprob(Scorer& scorer, const PromptRecord& prompt, std::string_view response,
                      std::string_view separator) {
    if (response.empty()) throw ValidationError("global_logprob: empty response");
    std::string context;
    if (!prompt.text.empty()) {
        context = prompt.text;
        context += separator;
    }
    const TokenScores scores = scorer.token_logprobs(context, response);
    scores.validate();
    if (scores.token_logprobs.empty()) {
        throw ValidationError("global_logprob: scorer returned no token scores");
    }
    return mean(scores.token_logprobs);
}

LocalScores local_logprob(Scorer& scorer, const PromptRecord& prompt,
                          const std::vector<Step>& steps, const WindowPolicy& policy,
                          bool include_prompt, std::string_view separator) {
    if (steps.empty()) throw ValidationError("local_logprob: empty steps");
    policy.validate();

    LocalScores out;
    out.step_lps.reserve(steps.size());
    out.step_token_counts.reserve(steps.size());

    long double weighted_sum = 0.0L;
    long double total_tokens = 0.0L;
    for (std::size_t idx = 0; idx < steps.size(); ++idx) {
        const int i = static_cast<int>(idx) + 1;
        const int window = policy.window_for_step(i);
        const std::size_t window_begin = idx - static_cast<std::size_t>(window);
        // The prompt always conditions the step unless the caller asked for
        // the narrow reading, which drops it once the window no longer covers
        // all preceding steps.
        const bool with_prompt =
            include_prompt || window == static_cast<int>(idx);
        const std::string context =
            build_context(prompt, with_prompt, separator, steps, window_begin, idx);

        const TokenScores scores = scorer.token_logprobs(context, steps[idx].text);
        scores.validate();
        if (scores.token_logprobs.empty()) {
            throw ValidationError("local_logprob: scorer returned no token scores");
        }
        const double step_lp = mean(scores.token_logprobs);
        out.step_lps.push_back(step_lp);
        out.step_token_counts.push_back(scores.token_count());
        weighted_sum += static_cast<long double>(step_lp) *
                        static_cast<long double>(scores.token_count());
        total_tokens += static_cast<long double>(scores.token_count());
    }
    out.local_lp = mean(out.step_lps);
    out.token_weighted_lp = static_cast<double>(weighted_sum / total_tokens);
    return out;
}

std::vector<ScoreRecord> score_dataset(const std::vector<PromptRecord>& prompts,
                                       const std::vector<CandidateResponse>& candidates,
                                       Scorer& scorer, const ScoringJob& job) {
    job.validate();

    std::unordered_map<std::string, const PromptRecord*> by_id;
    by_id.reserve(prompts.size());
    for (const auto& p : prompts) by_id.emplace(p.prompt_id, &p);

    for (const auto& c : candidates) {
        if (!by_id.count(c.prompt_id)) {
            throw ValidationError("score_dataset: candidate references unknown prompt_id \"" +
                                  c.prompt_id + "\"");
        }
        if (c.steps.empty()) {
            throw ValidationError("score_dataset: candidate (" + c.prompt_id + ", " +
                                  c.teacher_id + ", " + std::to_string(c.candidate_index) +
                                  ") is not segmented");
        }
        if (reconstruct(c.steps) != c.text) {
            throw ValidationError("score_dataset: steps do not reconstruct candidate (" +
                                  c.prompt_id + ", " + c.teacher_id + ", " +
                                  std::to_string(c.candidate_index) + ")");
        }
    }

    std::vector<ScoreRecord> records(candidates.size());
    const auto score_one = [&](std::size_t i) {
        const auto& c = candidates[i];
        const auto& prompt = *by_id.at(c.prompt_id);

        ScoreRecord r;
        r.prompt_id = c.prompt_id;
        r.teacher_id = c.teacher_id;
        r.candidate_index = c.candidate_index;
        r.scorer_id = scorer.scorer_id();
        r.window_policy = job.window_policy;

        std::string context;
        if (!prompt.text.empty()) {
            context = prompt.text;
            context += job.separator;
        }
        const TokenScores global = scorer.token_logprobs(context, c.text);
        global.validate();
        r.token_count = global.token_count();
        r.global_lp = mean(global.token_logprobs);

        const LocalScores local = local_logprob(scorer, prompt, c.steps, job.window_policy,
                                                job.include_prompt, job.separator);
        r.step_lps = local.step_lps;
        r.local_lp = local.local_lp;
        r.validate();
        records[i] = std::move(r);
    };

    if (job.parallelism == 1 || candidates.size() <= 1) {
        for (std::size_t i = 0; i < candidates.size(); ++i) score_one(i);
        return records;
    }

    // Bounded worker pool; results land by input index so completion order
    // never shows. On the first error workers stop pulling work; everything
    // already scored sits in the cache, so a rerun resumes from there.
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mu;
    std::size_t first_error_index = candidates.size();
    std::exception_ptr first_error;

    const int n_workers = std::min<int>(job.parallelism, static_cast<int>(candidates.size()));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= candidates.size() || failed.load()) return;
                try {
                    score_one(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (i < first_error_index) {
                        first_error_index = i;
                        first_error = std::current_exception();
                    }
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return records;
}

std::vector<double> default_ablation_fractions() { return {0.05, 0.25, 0.50, 0.75}; }

std::vector<AblationRow> window_ablation(const std::vector<PromptRecord>& prompts,
                                         const std::vector<CandidateResponse>& candidates,
                                         Scorer& scorer, const std::vector<double>& fractions,
                                         const ScoringJob& base_job) {
    if (fractions.empty()) throw ValidationError("window_ablation: no fractions given");
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw ValidationError("window_ablation: fractions must lie in (0, 1]");
        }
    }

    std::vector<AblationRow> rows;
    std::map<std::string, std::pair<long double, std::int64_t>> global_acc;
    bool have_global = false;

    for (double f : fractions) {
        ScoringJob job = base_job;
        job.window_policy = WindowPolicy::fractional(f);
        const auto records = score_dataset(prompts, candidates, scorer, job);

        std::map<std::string, std::pair<long double, std::int64_t>> acc;
        for (const auto& r : records) {
            auto& [sum, n] = acc[r.teacher_id];
            sum += r.local_lp;
            ++n;
            if (!have_global) {
                auto& [gsum, gn] = global_acc[r.teacher_id];
                gsum += r.global_lp;
                ++gn;
            }
        }
        have_global = true;
        for (const auto& [teacher, sum_n] : acc) {
            rows.push_back({f, teacher,
                            static_cast<double>(sum_n.first / static_cast<long double>(sum_n.second)),
                            sum_n.second});
        }
    }
    for (const auto& [teacher, sum_n] : global_acc) {
        rows.push_back({std::nullopt, teacher,
                        static_cast<double>(sum_n.first / static_cast<long double>(sum_n.second)),
                        sum_n.second});
    }
    return rows;
}

} // namespace natsel
