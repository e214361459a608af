#include "natsel/scorer.hpp"

#include "natsel/errors.hpp"
#include "natsel/hash.hpp"
#include "natsel/reference_lm.hpp"
#include "natsel/remote_scorer.hpp"
#include "natsel/util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace natsel {

using nlohmann::json;

void TokenScores::validate() const {
    for (double v : token_logprobs) {
        if (std::isnan(v) || std::isinf(v)) {
            throw ValidationError("token scores: non-finite log-prob");
        }
        if (v > 0.0) throw ValidationError("token scores: positive log-prob");
    }
}

ScorerRef ScorerRef::from_json_text(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError("scorer config: malformed JSON");
    }
    ScorerRef ref;
    if (!doc.contains("kind") || !doc["kind"].is_string()) {
        throw ValidationError("scorer config: missing \"kind\"");
    }
    ref.kind = doc["kind"].get<std::string>();
    if (ref.kind != "reference_ngram" && ref.kind != "remote") {
        throw ValidationError("scorer config: unknown kind \"" + ref.kind +
                              "\" (expected reference_ngram or remote)");
    }
    if (doc.contains("scorer_id")) {
        if (!doc["scorer_id"].is_string()) {
            throw ValidationError("scorer config: non-string \"scorer_id\"");
        }
        ref.scorer_id = doc["scorer_id"].get<std::string>();
    }
    json params = doc;
    params.erase("kind");
    params.erase("scorer_id");
    ref.params_json = params.dump();
    return ref;
}

ScorerRef ScorerRef::load(const std::filesystem::path& path) {
    return from_json_text(util::read_file(path));
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::unique_ptr<Scorer> make_reference_scorer(const ScorerRef& ref, const json& params,
                                              const std::filesystem::path& base_dir) {
    const bool has_model = params.contains("model_file");
    const bool has_corpus = params.contains("train_corpus");
    if (has_model == has_corpus) {
        throw ValidationError(
            "scorer config: reference_ngram needs exactly one of \"model_file\" or "
            "\"train_corpus\"");
    }
    if (has_model) {
        if (!params["model_file"].is_string()) {
            throw ValidationError("scorer config: non-string \"model_file\"");
        }
        const auto path = resolve(base_dir, params["model_file"].get<std::string>());
        return std::make_unique<ReferenceLm>(ReferenceLm::load(path, ref.scorer_id));
    }
    if (!params["train_corpus"].is_string()) {
        throw ValidationError("scorer config: non-string \"train_corpus\"");
    }
    if (!params.contains("n") || !params["n"].is_number_integer()) {
        throw ValidationError("scorer config: \"train_corpus\" requires integer \"n\"");
    }
    const auto path = resolve(base_dir, params["train_corpus"].get<std::string>());
    return std::make_unique<ReferenceLm>(
        ReferenceLm::train_file(path, params["n"].get<int>(), ref.scorer_id));
}

std::unique_ptr<Scorer> make_remote_scorer(const ScorerRef& ref, const json& params) {
    if (!params.contains("endpoint") || !params["endpoint"].is_string()) {
        throw ValidationError("scorer config: remote requires string \"endpoint\"");
    }
    if (!params.contains("model") || !params["model"].is_string()) {
        throw ValidationError("scorer config: remote requires string \"model\"");
    }
    TransportConfig tc;
    const auto opt_num = [&](const char* key, auto& out) {
        if (const auto it = params.find(key); it != params.end()) {
            if (!it->is_number()) {
                throw ValidationError(std::string("scorer config: non-numeric \"") + key + "\"");
            }
            out = static_cast<std::remove_reference_t<decltype(out)>>(it->get<double>());
        }
    };
    opt_num("max_attempts", tc.max_attempts);
    opt_num("base_delay_ms", tc.base_delay_ms);
    opt_num("backoff_factor", tc.backoff_factor);
    opt_num("max_delay_ms", tc.max_delay_ms);
    opt_num("timeout_s", tc.timeout_s);
    opt_num("max_in_flight", tc.max_in_flight);
    std::string scorer_id = ref.scorer_id;
    if (scorer_id.empty()) {
        scorer_id = "remote:" + hash::sha256_hex({params["endpoint"].get<std::string>(),
                                                  params["model"].get<std::string>()});
    }
    return std::make_unique<RemoteScorer>(params["endpoint"].get<std::string>(),
                                          params["model"].get<std::string>(), tc,
                                          std::move(scorer_id));
}

} // namespace

std::unique_ptr<Scorer> make_scorer(const ScorerRef& ref, const std::filesystem::path& base_dir) {
    json params = json::parse(ref.params_json.empty() ? std::string("{}") : ref.params_json,
                              nullptr, false);
    if (params.is_discarded() || !params.is_object()) {
        throw ValidationError("scorer config: malformed params");
    }
    if (ref.kind == "reference_ngram") return make_reference_scorer(ref, params, base_dir);
    if (ref.kind == "remote") return make_remote_scorer(ref, params);
    throw ValidationError("scorer config: unknown kind \"" + ref.kind + "\"");
}

} // namespace natsel
