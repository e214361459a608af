#pragma once

#include "natsel/scorer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>

namespace natsel {

// Exact character n-gram language model with add-one smoothing. This is the
// desk-scale stand-in for a student model: every probability has a closed
// form that an independent count script can reproduce, which is what the
// metric tests lean on.
//
// Conventions:
//  - Symbols are Unicode code points; step boundaries therefore always fall
//    on token boundaries, so full-window local scoring matches global
//    scoring token for token.
//  - Counts cover interior n-grams of each training line only. A context
//    shorter than n-1 symbols is padded with the reserved BOS symbol at
//    scoring time; padded (or otherwise unseen) contexts have zero counts
//    and add-one smoothing yields the uniform 1/V distribution.
//  - The smoothed successor distribution ranges over the V real alphabet
//    symbols: P(c | ctx) = (count(ctx, c) + 1) / (count(ctx, .) + V).
class ReferenceLm final : public Scorer {
public:
    // Counts n-grams per line of the corpus text. Throws on empty corpus or
    // n < 1.
    static ReferenceLm train(std::string_view corpus, int order, std::string scorer_id);
    static ReferenceLm train_file(const std::filesystem::path& corpus_path, int order,
                                  std::string scorer_id);

    // A model with the given alphabet and no counts: every continuation
    // symbol in the alphabet scores exactly log(1/V).
    static ReferenceLm uniform(int order, std::u32string alphabet, std::string scorer_id);

    // JSON model file {"n": int, "vocab": [str], "counts": {ctx: {char: n}}}.
    // save/load round-trip bit-exactly; load derives the scorer_id from the
    // file bytes unless one is given.
    void save(const std::filesystem::path& path) const;
    static ReferenceLm load(const std::filesystem::path& path, std::string scorer_id = "");
    std::string to_json_text() const;
    static ReferenceLm from_json_text(std::string_view text, std::string scorer_id);

    const std::string& scorer_id() const override { return scorer_id_; }
    TokenScores token_logprobs(std::string_view context, std::string_view continuation) override;

    // Smoothed log P(symbol | last n-1 symbols of prefix), the single-step
    // form token_logprobs is folded from.
    double symbol_logprob(const std::u32string& prefix, char32_t symbol) const;

    int order() const { return order_; }
    std::size_t alphabet_size() const { return alphabet_.size(); }
    bool in_alphabet(char32_t cp) const { return alphabet_.count(cp) != 0; }
    std::u32string alphabet() const;

    // Deterministic sampling helper for synthetic experiments: draws `length`
    // symbols from the smoothed distribution, extending `prefix`.
    std::u32string sample(std::u32string prefix, std::size_t length, std::uint64_t& rng_state) const;

    // Reserved padding symbols (never part of the real alphabet).
    static constexpr char32_t kBos = 0x0002;
    static constexpr char32_t kEos = 0x0003;

private:
    ReferenceLm() = default;

    struct ContextCounts {
        std::map<char32_t, std::int64_t> successors;
        std::int64_t total = 0;
    };

    std::u32string context_key(const std::u32string& prefix) const;

    int order_ = 1;
    std::map<char32_t, int> alphabet_; // symbol -> index (sorted, serialization order)
    std::map<std::u32string, ContextCounts> counts_;
    std::string scorer_id_;
};

} // namespace natsel
