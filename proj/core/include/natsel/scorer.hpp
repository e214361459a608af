#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace natsel {

// Per-token conditional log-probabilities (nats) of a continuation.
struct TokenScores {
    std::vector<double> token_logprobs;

    std::int64_t token_count() const { return static_cast<std::int64_t>(token_logprobs.size()); }

    // Entries must be finite and <= 0; non-empty for non-empty continuations.
    void validate() const;

    bool operator==(const TokenScores&) const = default;
};

// The log P(continuation tokens | context) primitive Eqs. of the scoring
// pipeline are built from. Implementations must be deterministic for a fixed
// scorer_id.
class Scorer {
public:
    virtual ~Scorer() = default;

    // Stable identity; changes whenever any score-affecting parameter changes.
    virtual const std::string& scorer_id() const = 0;

    // Throws ValidationError on empty continuation.
    virtual TokenScores token_logprobs(std::string_view context, std::string_view continuation) = 0;
};

// Identity + parameters of a scorer backend, as stored in scorer config
// files. params_json is backend-specific:
//   reference_ngram: {"model_file": path} or {"train_corpus": path, "n": int}
//   remote:          {"endpoint": url, "model": name, ...transport overrides}
struct ScorerRef {
    std::string scorer_id; // empty = derive from params
    std::string kind;      // "reference_ngram" | "remote"
    std::string params_json;

    static ScorerRef load(const std::filesystem::path& path);
    static ScorerRef from_json_text(std::string_view text);
};

// Instantiates the backend named by ref. Relative paths inside params resolve
// against base_dir (usually the config file's directory).
std::unique_ptr<Scorer> make_scorer(const ScorerRef& ref,
                                    const std::filesystem::path& base_dir = ".");

} // namespace natsel
