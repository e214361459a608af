#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <natsel/cache.hpp>
#include <natsel/errors.hpp>
#include <natsel/jsonl.hpp>
#include <natsel/metrics.hpp>
#include <natsel/reference_lm.hpp>
#include <natsel/segmenter.hpp>

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

using namespace natsel;
using testsupport::TempDir;

namespace {

// Delegating scorer that records every (context, continuation) call, for
// context-construction assertions.
class RecordingScorer final : public Scorer {
public:
    explicit RecordingScorer(Scorer& inner) : inner_(inner) {}

    const std::string& scorer_id() const override { return inner_.scorer_id(); }

    TokenScores token_logprobs(std::string_view context, std::string_view continuation) override {
        {
            std::lock_guard lock(mu_);
            calls.emplace_back(context, continuation);
        }
        return inner_.token_logprobs(context, continuation);
    }

    std::vector<std::pair<std::string, std::string>> calls;

private:
    Scorer& inner_;
    std::mutex mu_;
};

// Scorer that fails whenever the continuation contains a marker substring.
class FlakyScorer final : public Scorer {
public:
    FlakyScorer(Scorer& inner, std::string marker) : inner_(inner), marker_(std::move(marker)) {}

    const std::string& scorer_id() const override { return inner_.scorer_id(); }

    TokenScores token_logprobs(std::string_view context, std::string_view continuation) override {
        if (continuation.find(marker_) != std::string_view::npos) {
            throw TransportError("injected failure");
        }
        return inner_.token_logprobs(context, continuation);
    }

private:
    Scorer& inner_;
    std::string marker_;
};

PromptRecord prompt(const std::string& id, const std::string& text) {
    PromptRecord p;
    p.prompt_id = id;
    p.text = text;
    return p;
}

CandidateResponse candidate(const std::string& pid, const std::string& teacher, int index,
                            const std::string& text) {
    CandidateResponse c;
    c.prompt_id = pid;
    c.teacher_id = teacher;
    c.candidate_index = index;
    c.text = text;
    c.steps = segment(text);
    return c;
}

} // namespace

TEST_CASE("global over a uniform scorer is exactly -log V") {
    auto lm = ReferenceLm::uniform(3, U"abcd", "u4");
    const auto p = prompt("p1", "any prompt");
    CHECK(global_logprob(lm, p, "a response. of any length!") == -std::log(4.0));
    CHECK(global_logprob(lm, p, "x") == -std::log(4.0));
}

TEST_CASE("a probability-one token scores zero") {
    // Unigram over a single-symbol alphabet: P(a) = (4+1)/(4+1) = 1.
    auto lm = ReferenceLm::train("aaaa", 1, "onehot");
    const auto p = prompt("p1", "ignored");
    CHECK(global_logprob(lm, p, "a") == 0.0);
}

TEST_CASE("global matches the hand-enumerated bigram example") {
    // Trained on "abab"; empty prompt; response "ab".
    // First char: BOS-padded context, unseen -> log(2/4); then log P(b|a) = log(3/4).
    auto lm = ReferenceLm::train("abab", 2, "bigram");
    const auto p = prompt("p1", "");
    const double expected = (std::log(2.0 / 4.0) + std::log(3.0 / 4.0)) / 2.0;
    CHECK(global_logprob(lm, p, "ab") == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("single-step responses reduce local to global exactly") {
    auto lm = ReferenceLm::train("the cat sat on the mat. again and again.", 3, "reduction");
    const auto p = prompt("p1", "what did the cat do");
    const std::string response = "the cat sat on the mat again without any terminal";
    const auto steps = segment(response);
    REQUIRE(steps.size() == 1);
    for (const auto policy : {WindowPolicy::fixed_k(4), WindowPolicy::fractional(0.25),
                              WindowPolicy::full()}) {
        const auto local = local_logprob(lm, p, steps, policy);
        CHECK(local.local_lp == global_logprob(lm, p, response));
    }
}

TEST_CASE("full-window step scores are slices of the global token scores") {
    auto lm = ReferenceLm::train(
        "one sentence here. two sentences here. three sentences make a corpus.", 3, "fullwin");
    const auto p = prompt("p1", "a prompt");
    const std::string response = "alpha beta. gamma delta! epsilon zeta? eta theta.";
    const auto steps = segment(response);
    REQUIRE(steps.size() == 4);

    const std::string context = p.text + "\n";
    const auto global_tokens = lm.token_logprobs(context, response);
    const auto local = local_logprob(lm, p, steps, WindowPolicy::full());

    // Stitch per-step token scores by scoring each step after the exact
    // response prefix (the definition of the full window).
    std::vector<double> stitched;
    std::string prefix;
    for (const auto& s : steps) {
        const auto part = lm.token_logprobs(context + prefix, s.text);
        stitched.insert(stitched.end(), part.token_logprobs.begin(), part.token_logprobs.end());
        prefix += s.text;
    }
    REQUIRE(stitched == global_tokens.token_logprobs);

    // Token-weighted mean of step scores equals the global mean.
    const double global_lp = global_logprob(lm, p, response);
    CHECK(local.token_weighted_lp == doctest::Approx(global_lp).epsilon(1e-12));
}

TEST_CASE("uniform scorer makes local equal -log V under every policy") {
    auto lm = ReferenceLm::uniform(2, U"abcdefgh", "u8");
    const auto p = prompt("p1", "prompt text");
    const std::string response = "first part. second part. third part! fourth?";
    const auto steps = segment(response);
    REQUIRE(steps.size() >= 3);
    const std::vector<WindowPolicy> policies = {
        WindowPolicy::fixed_k(0),  WindowPolicy::fixed_k(1),       WindowPolicy::fixed_k(4),
        WindowPolicy::fractional(0.05), WindowPolicy::fractional(0.5), WindowPolicy::fractional(1.0),
        WindowPolicy::full()};
    for (const auto& policy : policies) {
        const auto local = local_logprob(lm, p, steps, policy);
        CHECK(local.local_lp == -std::log(8.0));
        for (double lp : local.step_lps) CHECK(lp == -std::log(8.0));
    }
    CHECK(global_logprob(lm, p, response) == -std::log(8.0));
}

TEST_CASE("fractional windows round up") {
    const auto policy = WindowPolicy::fractional(0.05);
    CHECK(policy.window_for_step(1) == 0);
    for (int i = 2; i <= 10; ++i) CHECK(policy.window_for_step(i) == 1);
    const auto three_quarters = WindowPolicy::fractional(0.75);
    CHECK(three_quarters.window_for_step(5) == 3);  // ceil(0.75*4)
    CHECK(three_quarters.window_for_step(2) == 1);  // ceil(0.75*1)
    const auto full_fraction = WindowPolicy::fractional(1.0);
    for (int i = 1; i <= 6; ++i) CHECK(full_fraction.window_for_step(i) == i - 1);
}

TEST_CASE("policy parsing round-trips the CLI forms") {
    CHECK(WindowPolicy::parse("fixed:4") == WindowPolicy::fixed_k(4));
    CHECK(WindowPolicy::parse("fraction:0.25") == WindowPolicy::fractional(0.25));
    CHECK(WindowPolicy::parse("full") == WindowPolicy::full());
    CHECK_THROWS_AS(WindowPolicy::parse("fixed:-1"), ValidationError);
    CHECK_THROWS_AS(WindowPolicy::parse("fraction:0"), ValidationError);
    CHECK_THROWS_AS(WindowPolicy::parse("sideways"), ValidationError);
}

TEST_CASE("window contexts grow by suffix-extension as k increases") {
    auto lm = ReferenceLm::train("abcdefgh. ijklmnop. qrstuvwx.", 2, "contain");
    const auto p = prompt("p1", "the prompt");
    const std::string response = "aa bb. cc dd. ee ff. gg hh. ii jj.";
    const auto steps = segment(response);
    REQUIRE(steps.size() == 5);

    // Every context is [prompt + separator] + window; the prompt prefix is
    // shared, and the window part under k+1 must suffix-extend the one under
    // k (the window only ever grows backwards).
    const std::string prefix = p.text + "\n";
    std::vector<std::vector<std::string>> windows_by_k;
    for (int k = 0; k <= 4; ++k) {
        RecordingScorer rec(lm);
        local_logprob(rec, p, steps, WindowPolicy::fixed_k(k));
        std::vector<std::string> windows;
        for (const auto& [ctx, cont] : rec.calls) {
            REQUIRE(ctx.substr(0, prefix.size()) == prefix);
            windows.push_back(ctx.substr(prefix.size()));
        }
        windows_by_k.push_back(std::move(windows));
    }
    for (int k = 0; k + 1 <= 4; ++k) {
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& narrow = windows_by_k[static_cast<std::size_t>(k)][i];
            const auto& wide = windows_by_k[static_cast<std::size_t>(k) + 1][i];
            REQUIRE(wide.size() >= narrow.size());
            CHECK(wide.substr(wide.size() - narrow.size()) == narrow);
        }
    }
}

TEST_CASE("include_prompt=false drops the prompt once the window truncates") {
    auto lm = ReferenceLm::train("xy. yz. zx.", 2, "noprompt");
    const auto p = prompt("p1", "PROMPT");
    const std::string response = "aa. bb. cc.";
    const auto steps = segment(response);
    REQUIRE(steps.size() == 3);

    RecordingScorer rec(lm);
    local_logprob(rec, p, steps, WindowPolicy::fixed_k(1), /*include_prompt=*/false);
    REQUIRE(rec.calls.size() == 3);
    // Step 1: no preceding steps, window covers everything -> prompt included.
    CHECK(rec.calls[0].first == "PROMPT\n");
    // Step 2: window of 1 covers the single preceding step -> prompt included.
    CHECK(rec.calls[1].first == "PROMPT\naa. ");
    // Step 3: window of 1 out of 2 preceding steps -> prompt dropped.
    CHECK(rec.calls[2].first == "bb. ");

    RecordingScorer rec2(lm);
    local_logprob(rec2, p, steps, WindowPolicy::fixed_k(1), /*include_prompt=*/true);
    CHECK(rec2.calls[2].first == "PROMPT\nbb. ");
}

TEST_CASE("empty prompts add no separator to contexts") {
    auto lm = ReferenceLm::train("ab. cd.", 2, "nosep");
    const auto p = prompt("p1", "");
    const auto steps = segment("ab. cd.");
    RecordingScorer rec(lm);
    local_logprob(rec, p, steps, WindowPolicy::full());
    REQUIRE(rec.calls.size() == 2);
    CHECK(rec.calls[0].first == "");
    CHECK(rec.calls[1].first == "ab. ");
}

TEST_CASE("score_dataset fills records in input order with the default policy") {
    auto lm = ReferenceLm::train("some corpus text. with sentences.", 2, "ds");
    const std::vector<PromptRecord> prompts = {prompt("p1", "first prompt"),
                                               prompt("p2", "second prompt")};
    std::vector<CandidateResponse> cands = {
        candidate("p2", "t1", 0, "answer two. done."),
        candidate("p1", "t1", 0, "answer one. done."),
        candidate("p1", "t2", 1, "another answer. here."),
    };
    ScoringJob job;
    CHECK(job.window_policy == WindowPolicy::fixed_k(4));

    const auto records = score_dataset(prompts, cands, lm, job);
    REQUIRE(records.size() == 3);
    CHECK(records[0].prompt_id == "p2");
    CHECK(records[1].prompt_id == "p1");
    CHECK(records[2].teacher_id == "t2");
    for (const auto& r : records) {
        CHECK(r.scorer_id == lm.scorer_id());
        CHECK(r.step_lps.size() == 2);
        CHECK(r.token_count > 0);
        CHECK(r.global_lp <= 0.0);
    }
}

TEST_CASE("score_dataset validates segmentation and prompt references") {
    auto lm = ReferenceLm::train("corpus.", 2, "val");
    const std::vector<PromptRecord> prompts = {prompt("p1", "prompt")};

    std::vector<CandidateResponse> unsegmented = {
        candidate("p1", "t", 0, "text. here."),
    };
    unsegmented[0].steps.clear();
    CHECK_THROWS_WITH_AS(score_dataset(prompts, unsegmented, lm, {}),
                         doctest::Contains("not segmented"), ValidationError);

    std::vector<CandidateResponse> dangling = {candidate("p9", "t", 0, "text.")};
    CHECK_THROWS_WITH_AS(score_dataset(prompts, dangling, lm, {}),
                         doctest::Contains("unknown prompt_id"), ValidationError);

    std::vector<CandidateResponse> lossy = {candidate("p1", "t", 0, "text. here.")};
    lossy[0].steps[1].text = "nope.";
    CHECK_THROWS_WITH_AS(score_dataset(prompts, lossy, lm, {}),
                         doctest::Contains("reconstruct"), ValidationError);
}

TEST_CASE("parallel scoring is byte-identical to sequential scoring") {
    auto lm = ReferenceLm::train("a corpus with words. several of them. more text here.", 3,
                                 "par");
    testsupport::FuzzText fuzz(0xBEEF);
    std::vector<PromptRecord> prompts;
    std::vector<CandidateResponse> cands;
    for (int i = 0; i < 60; ++i) {
        const auto pid = "p" + std::to_string(i);
        prompts.push_back(prompt(pid, fuzz.text(1)));
        cands.push_back(candidate(pid, "t" + std::to_string(i % 3), 0, fuzz.text(2 + fuzz.below(4))));
    }
    ScoringJob seq;
    seq.parallelism = 1;
    ScoringJob par;
    par.parallelism = 8;
    const auto a = score_dataset(prompts, cands, lm, seq);
    const auto b = score_dataset(prompts, cands, lm, par);
    CHECK(jsonl::to_jsonl(a) == jsonl::to_jsonl(b));
}

TEST_CASE("a rerun over an unchanged dataset is all cache hits") {
    TempDir dir("rerun");
    auto lm = std::make_shared<ReferenceLm>(
        ReferenceLm::train("cached corpus. of text.", 2, "cachetest"));
    auto cache = std::make_shared<ScoreCache>(dir / "cache");
    CachingScorer scorer(lm, cache);

    const std::vector<PromptRecord> prompts = {prompt("p1", "prompt one")};
    const std::vector<CandidateResponse> cands = {
        candidate("p1", "t1", 0, "step one. step two. step three."),
    };
    const auto first = score_dataset(prompts, cands, scorer, {});
    CHECK(scorer.stats().misses > 0);

    scorer.reset_stats();
    const auto second = score_dataset(prompts, cands, scorer, {});
    CHECK(scorer.stats().misses == 0);
    CHECK(jsonl::to_jsonl(first) == jsonl::to_jsonl(second));
}

TEST_CASE("a failing scorer aborts the run but keeps cached work") {
    TempDir dir("abort");
    auto lm = std::make_shared<ReferenceLm>(ReferenceLm::train("resume corpus.", 2, "resume"));
    auto cache = std::make_shared<ScoreCache>(dir / "cache");

    std::vector<PromptRecord> prompts;
    std::vector<CandidateResponse> cands;
    for (int i = 0; i < 10; ++i) {
        const auto pid = "p" + std::to_string(i);
        prompts.push_back(prompt(pid, "prompt"));
        cands.push_back(candidate(pid, "t", 0,
                                  i == 7 ? std::string("POISON step. more.")
                                         : "fine step " + std::to_string(i) + ". more."));
    }

    {
        CachingScorer caching(lm, cache);
        FlakyScorer flaky(caching, "POISON");
        CHECK_THROWS_AS(score_dataset(prompts, cands, flaky, {}), TransportError);
    }
    // Rerun without the fault: prior work is served from the cache.
    CachingScorer caching(lm, cache);
    const auto records = score_dataset(prompts, cands, caching, {});
    CHECK(records.size() == 10);
    CHECK(caching.stats().hits > 0);
}

TEST_CASE("window ablation reports per-teacher means and global rows") {
    auto lm = ReferenceLm::train("ablation corpus text. more of it. and more.", 3, "abl");
    std::vector<PromptRecord> prompts;
    std::vector<CandidateResponse> cands;
    for (int i = 0; i < 6; ++i) {
        const auto pid = "p" + std::to_string(i);
        prompts.push_back(prompt(pid, "prompt " + std::to_string(i)));
        cands.push_back(candidate(pid, i % 2 ? "teacher_a" : "teacher_b", 0,
                                  "first step. second step. third step. fourth step."));
    }

    CHECK(default_ablation_fractions() == std::vector<double>{0.05, 0.25, 0.50, 0.75});

    const auto rows = window_ablation(prompts, cands, lm, {0.25, 1.0}, {});
    // 2 fractions x 2 teachers + 2 global rows.
    REQUIRE(rows.size() == 6);
    int global_rows = 0;
    for (const auto& row : rows) {
        if (!row.fraction) ++global_rows;
        CHECK(row.n_candidates == 3);
    }
    CHECK(global_rows == 2);

    // Fraction 1.0: per-teacher token-weighted means equal global means.
    std::map<std::string, std::pair<long double, int>> weighted;
    for (const auto& c : cands) {
        const auto& p = *std::find_if(prompts.begin(), prompts.end(), [&](const PromptRecord& q) {
            return q.prompt_id == c.prompt_id;
        });
        const auto local = local_logprob(lm, p, c.steps, WindowPolicy::fractional(1.0));
        auto& [sum, n] = weighted[c.teacher_id];
        sum += local.token_weighted_lp;
        ++n;
    }
    for (const auto& row : rows) {
        if (row.fraction) continue;
        const auto& [sum, n] = weighted.at(row.teacher_id);
        const double mean_weighted = static_cast<double>(sum / n);
        CHECK(mean_weighted == doctest::Approx(row.mean_lp).epsilon(1e-10));
    }

    CHECK_THROWS_AS(window_ablation(prompts, cands, lm, {0.0}, {}), ValidationError);
    CHECK_THROWS_AS(window_ablation(prompts, cands, lm, {}, {}), ValidationError);
}

TEST_CASE("emitted scores are finite and non-positive on fuzzed datasets") {
    auto lm = ReferenceLm::train("bounded corpus. text here. and here.", 2, "bounds");
    testsupport::FuzzText fuzz(0xB0B);
    std::vector<PromptRecord> prompts;
    std::vector<CandidateResponse> cands;
    for (int i = 0; i < 25; ++i) {
        const auto pid = "p" + std::to_string(i);
        prompts.push_back(prompt(pid, fuzz.text(1)));
        cands.push_back(candidate(pid, "t", 0, fuzz.text(1 + fuzz.below(5))));
    }
    const auto records = score_dataset(prompts, cands, lm, {});
    for (const auto& r : records) {
        CHECK(std::isfinite(r.global_lp));
        CHECK(r.global_lp <= 0.0);
        CHECK(std::isfinite(r.local_lp));
        CHECK(r.local_lp <= 0.0);
        for (double lp : r.step_lps) {
            CHECK(std::isfinite(lp));
            CHECK(lp <= 0.0);
        }
    }
}
