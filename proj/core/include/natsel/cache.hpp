#pragma once

#include "natsel/scorer.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace natsel {

// On-disk content-addressed store for token scores. Keys are the SHA-256 of
// (scorer_id, context bytes, continuation bytes) with length framing; entries
// live under a two-level hex fan-out. Writes go through temp file + rename,
// so concurrent stores of the same key leave one intact value and a crash
// never leaves a torn entry. A corrupted entry reads as a miss (with a
// warning on stderr) and is overwritten by the next store.
class ScoreCache {
public:
    explicit ScoreCache(std::filesystem::path dir);

    std::optional<TokenScores> lookup(std::string_view scorer_id, std::string_view context,
                                      std::string_view continuation) const;

    void store(std::string_view scorer_id, std::string_view context,
               std::string_view continuation, const TokenScores& scores);

    const std::filesystem::path& dir() const { return dir_; }

    static std::string key_hash(std::string_view scorer_id, std::string_view context,
                                std::string_view continuation);

private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::filesystem::path dir_;
};

// Scorer decorator that routes every call through a ScoreCache.
class CachingScorer final : public Scorer {
public:
    CachingScorer(std::shared_ptr<Scorer> inner, std::shared_ptr<ScoreCache> cache);

    const std::string& scorer_id() const override { return inner_->scorer_id(); }
    TokenScores token_logprobs(std::string_view context, std::string_view continuation) override;

    struct Stats {
        std::uint64_t hits = 0;
        std::uint64_t misses = 0;
    };
    Stats stats() const;
    void reset_stats();

private:
    std::shared_ptr<Scorer> inner_;
    std::shared_ptr<ScoreCache> cache_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

} // namespace natsel
