#include "natsel/cache.hpp"

#include "natsel/errors.hpp"
#include "natsel/hash.hpp"
#include "natsel/jsonl.hpp"
#include "natsel/util.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace natsel {

using nlohmann::json;

ScoreCache::ScoreCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string ScoreCache::key_hash(std::string_view scorer_id, std::string_view context,
                                 std::string_view continuation) {
    return hash::sha256_hex({scorer_id, context, continuation});
}

std::filesystem::path ScoreCache::entry_path(const std::string& key) const {
    return dir_ / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

std::optional<TokenScores> ScoreCache::lookup(std::string_view scorer_id,
                                              std::string_view context,
                                              std::string_view continuation) const {
    const auto path = entry_path(key_hash(scorer_id, context, continuation));
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;

    std::string content;
    try {
        content = util::read_file(path);
    } catch (const IoError&) {
        return std::nullopt;
    }
    json doc = json::parse(content, nullptr, false);
    const auto corrupt = [&](const char* why) -> std::optional<TokenScores> {
        std::fprintf(stderr, "natsel: warning: corrupted cache entry %s (%s), treating as miss\n",
                     path.string().c_str(), why);
        return std::nullopt;
    };
    if (doc.is_discarded() || !doc.is_object()) return corrupt("malformed JSON");
    const auto lp = doc.find("token_logprobs");
    const auto tc = doc.find("token_count");
    if (lp == doc.end() || !lp->is_array() || tc == doc.end() || !tc->is_number_integer()) {
        return corrupt("missing fields");
    }
    TokenScores scores;
    scores.token_logprobs.reserve(lp->size());
    for (const auto& v : *lp) {
        if (!v.is_number()) return corrupt("non-numeric log-prob");
        scores.token_logprobs.push_back(v.get<double>());
    }
    if (scores.token_count() != tc->get<std::int64_t>()) return corrupt("token_count mismatch");
    try {
        scores.validate();
    } catch (const ValidationError& e) {
        return corrupt(e.what());
    }
    return scores;
}

void ScoreCache::store(std::string_view scorer_id, std::string_view context,
                       std::string_view continuation, const TokenScores& scores) {
    scores.validate();
    const auto path = entry_path(key_hash(scorer_id, context, continuation));

    std::string body = "{\"token_logprobs\":[";
    for (std::size_t i = 0; i < scores.token_logprobs.size(); ++i) {
        if (i) body.push_back(',');
        jsonl::append_json_double(body, scores.token_logprobs[i]);
    }
    body += "],\"token_count\":" + std::to_string(scores.token_count()) + "}";
    util::write_file_atomic(path, body);
}

CachingScorer::CachingScorer(std::shared_ptr<Scorer> inner, std::shared_ptr<ScoreCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

TokenScores CachingScorer::token_logprobs(std::string_view context, std::string_view continuation) {
    if (auto hit = cache_->lookup(inner_->scorer_id(), context, continuation)) {
        hits_.fetch_add(1, std::memory_order_relaxed);
        return std::move(*hit);
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    TokenScores scores = inner_->token_logprobs(context, continuation);
    cache_->store(inner_->scorer_id(), context, continuation, scores);
    return scores;
}

CachingScorer::Stats CachingScorer::stats() const {
    return {hits_.load(std::memory_order_relaxed), misses_.load(std::memory_order_relaxed)};
}

void CachingScorer::reset_stats() {
    hits_.store(0, std::memory_order_relaxed);
    misses_.store(0, std::memory_order_relaxed);
}

} // namespace natsel
