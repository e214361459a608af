#include "natsel/reference_lm.hpp"

#include "natsel/errors.hpp"
#include "natsel/hash.hpp"
#include "natsel/util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

namespace natsel {

using nlohmann::json;

namespace {

std::vector<std::u32string> split_lines(std::string_view corpus) {
    std::vector<std::u32string> lines;
    std::size_t begin = 0;
    while (begin <= corpus.size()) {
        const auto nl = corpus.find('\n', begin);
        const auto end = nl == std::string_view::npos ? corpus.size() : nl;
        lines.push_back(util::decode_utf8_cps(corpus.substr(begin, end - begin)));
        if (nl == std::string_view::npos) break;
        begin = nl + 1;
    }
    return lines;
}

} // namespace

ReferenceLm ReferenceLm::train(std::string_view corpus, int order, std::string scorer_id) {
    if (order < 1) throw ValidationError("reference LM: order must be >= 1");
    if (corpus.empty()) throw ValidationError("reference LM: empty training corpus");

    ReferenceLm lm;
    lm.order_ = order;
    const auto lines = split_lines(corpus);
    for (const auto& line : lines) {
        for (char32_t cp : line) lm.alphabet_.emplace(cp, 0);
        const std::size_t ctx_len = static_cast<std::size_t>(order - 1);
        if (line.size() < ctx_len + 1) continue;
        for (std::size_t pos = ctx_len; pos < line.size(); ++pos) {
            auto& ctx = lm.counts_[line.substr(pos - ctx_len, ctx_len)];
            ++ctx.successors[line[pos]];
            ++ctx.total;
        }
    }
    if (lm.alphabet_.empty()) throw ValidationError("reference LM: empty training corpus");
    int idx = 0;
    for (auto& [cp, i] : lm.alphabet_) i = idx++;

    if (scorer_id.empty()) {
        scorer_id = "refngram:" + hash::sha256_hex({std::to_string(order), corpus});
    }
    lm.scorer_id_ = std::move(scorer_id);
    return lm;
}

ReferenceLm ReferenceLm::train_file(const std::filesystem::path& corpus_path, int order,
                                    std::string scorer_id) {
    return train(util::read_file(corpus_path), order, std::move(scorer_id));
}

ReferenceLm ReferenceLm::uniform(int order, std::u32string alphabet, std::string scorer_id) {
    if (order < 1) throw ValidationError("reference LM: order must be >= 1");
    if (alphabet.empty()) throw ValidationError("reference LM: empty alphabet");
    ReferenceLm lm;
    lm.order_ = order;
    int idx = 0;
    for (char32_t cp : alphabet) lm.alphabet_.emplace(cp, 0);
    for (auto& [cp, i] : lm.alphabet_) i = idx++;
    if (scorer_id.empty()) {
        scorer_id = "refngram-uniform:" +
                    hash::sha256_hex({std::to_string(order), util::encode_utf8(alphabet)});
    }
    lm.scorer_id_ = std::move(scorer_id);
    return lm;
}

std::u32string ReferenceLm::alphabet() const {
    std::u32string out;
    out.reserve(alphabet_.size());
    for (const auto& [cp, unused] : alphabet_) out.push_back(cp);
    return out;
}

std::u32string ReferenceLm::context_key(const std::u32string& prefix) const {
    const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
    std::u32string key;
    key.reserve(ctx_len);
    if (prefix.size() >= ctx_len) {
        key = prefix.substr(prefix.size() - ctx_len);
    } else {
        key.assign(ctx_len - prefix.size(), kBos);
        key += prefix;
    }
    return key;
}

double ReferenceLm::symbol_logprob(const std::u32string& prefix, char32_t symbol) const {
    const auto key = context_key(prefix);
    std::int64_t count = 0;
    std::int64_t total = 0;
    if (const auto it = counts_.find(key); it != counts_.end()) {
        total = it->second.total;
        if (const auto sit = it->second.successors.find(symbol); sit != it->second.successors.end()) {
            count = sit->second;
        }
    }
    // Add-one over the V real alphabet symbols; out-of-alphabet symbols get
    // the unseen-successor mass.
    const double p = static_cast<double>(count + 1) /
                     static_cast<double>(total + static_cast<std::int64_t>(alphabet_.size()));
    return std::log(p);
}

TokenScores ReferenceLm::token_logprobs(std::string_view context, std::string_view continuation) {
    if (continuation.empty()) {
        throw ValidationError("token_logprobs: empty continuation");
    }
    const auto ctx_cps = util::decode_utf8_cps(context);
    const auto cont_cps = util::decode_utf8_cps(continuation);

    // Rolling window of the last order-1 symbols of the full prefix.
    const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
    std::u32string window;
    if (ctx_cps.size() >= ctx_len) {
        window = ctx_cps.substr(ctx_cps.size() - ctx_len);
    } else {
        window = ctx_cps;
    }

    TokenScores scores;
    scores.token_logprobs.reserve(cont_cps.size());
    for (char32_t cp : cont_cps) {
        scores.token_logprobs.push_back(symbol_logprob(window, cp));
        window.push_back(cp);
        if (window.size() > ctx_len) window.erase(0, window.size() - ctx_len);
    }
    return scores;
}

std::u32string ReferenceLm::sample(std::u32string prefix, std::size_t length,
                                   std::uint64_t& rng_state) const {
    std::u32string out = std::move(prefix);
    const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
    for (std::size_t step = 0; step < length; ++step) {
        const std::u32string window =
            out.size() >= ctx_len ? out.substr(out.size() - ctx_len) : out;
        const auto key = context_key(window);
        const ContextCounts* ctx = nullptr;
        if (const auto it = counts_.find(key); it != counts_.end()) ctx = &it->second;
        const std::int64_t total =
            (ctx ? ctx->total : 0) + static_cast<std::int64_t>(alphabet_.size());

        // Inverse-CDF draw on integer weights (count+1 per alphabet symbol).
        const std::uint64_t r = util::bounded_rand(rng_state, static_cast<std::uint64_t>(total));
        std::int64_t acc = 0;
        char32_t chosen = alphabet_.begin()->first;
        for (const auto& [cp, unused] : alphabet_) {
            std::int64_t c = 1;
            if (ctx) {
                if (const auto sit = ctx->successors.find(cp); sit != ctx->successors.end()) {
                    c += sit->second;
                }
            }
            acc += c;
            if (static_cast<std::int64_t>(r) < acc) {
                chosen = cp;
                break;
            }
        }
        out.push_back(chosen);
    }
    return out;
}

std::string ReferenceLm::to_json_text() const {
    json vocab = json::array();
    vocab.push_back("<bos>");
    vocab.push_back("<eos>");
    for (const auto& [cp, unused] : alphabet_) {
        std::string s;
        util::append_utf8(s, cp);
        vocab.push_back(s);
    }
    json counts = json::object();
    for (const auto& [ctx, cc] : counts_) {
        json row = json::object();
        for (const auto& [cp, n] : cc.successors) {
            std::string s;
            util::append_utf8(s, cp);
            row[s] = n;
        }
        counts[util::encode_utf8(ctx)] = std::move(row);
    }
    json doc;
    doc["n"] = order_;
    doc["vocab"] = std::move(vocab);
    doc["counts"] = std::move(counts);
    return doc.dump();
}

ReferenceLm ReferenceLm::from_json_text(std::string_view text, std::string scorer_id) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError("reference LM file: malformed JSON");
    }
    ReferenceLm lm;
    if (!doc.contains("n") || !doc["n"].is_number_integer()) {
        throw ValidationError("reference LM file: missing \"n\"");
    }
    lm.order_ = doc["n"].get<int>();
    if (lm.order_ < 1) throw ValidationError("reference LM file: n must be >= 1");
    if (!doc.contains("vocab") || !doc["vocab"].is_array()) {
        throw ValidationError("reference LM file: missing \"vocab\"");
    }
    for (const auto& entry : doc["vocab"]) {
        if (!entry.is_string()) throw ValidationError("reference LM file: non-string vocab entry");
        const auto s = entry.get<std::string>();
        if (s == "<bos>" || s == "<eos>") continue;
        const auto cps = util::decode_utf8_cps(s);
        if (cps.size() != 1) {
            throw ValidationError("reference LM file: vocab entry \"" + s +
                                  "\" is not a single character");
        }
        lm.alphabet_.emplace(cps[0], 0);
    }
    if (lm.alphabet_.empty()) throw ValidationError("reference LM file: empty vocabulary");
    int idx = 0;
    for (auto& [cp, i] : lm.alphabet_) i = idx++;
    if (doc.contains("counts")) {
        if (!doc["counts"].is_object()) {
            throw ValidationError("reference LM file: \"counts\" must be an object");
        }
        for (const auto& [ctx_text, row] : doc["counts"].items()) {
            const auto ctx = util::decode_utf8_cps(ctx_text);
            if (ctx.size() != static_cast<std::size_t>(lm.order_ - 1)) {
                throw ValidationError("reference LM file: context \"" + ctx_text +
                                      "\" has wrong length for n=" + std::to_string(lm.order_));
            }
            if (!row.is_object()) throw ValidationError("reference LM file: bad counts row");
            auto& cc = lm.counts_[ctx];
            for (const auto& [ch_text, n] : row.items()) {
                const auto ch = util::decode_utf8_cps(ch_text);
                if (ch.size() != 1 || !n.is_number_integer() || n.get<std::int64_t>() < 0) {
                    throw ValidationError("reference LM file: bad count entry");
                }
                cc.successors[ch[0]] = n.get<std::int64_t>();
                cc.total += n.get<std::int64_t>();
            }
        }
    }
    if (scorer_id.empty()) {
        scorer_id = "refngram:" + hash::sha256_hex(text);
    }
    lm.scorer_id_ = std::move(scorer_id);
    return lm;
}

void ReferenceLm::save(const std::filesystem::path& path) const {
    util::write_file_atomic(path, to_json_text());
}

ReferenceLm ReferenceLm::load(const std::filesystem::path& path, std::string scorer_id) {
    return from_json_text(util::read_file(path), std::move(scorer_id));
}

} // namespace natsel
