#pragma once

// Shared test scaffolding: temp dirs, deterministic fuzz text, and the
// independent count-based n-gram oracle the scoring tests check against.
// The oracle deliberately re-derives everything from scratch (its own
// counting loop, its own probability formula) so it shares no code path with
// the library implementation it verifies.

#include <natsel/util.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace testsupport {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        std::uint64_t state = std::hash<std::string>{}(tag) ^
                              static_cast<std::uint64_t>(
                                  std::chrono::steady_clock::now().time_since_epoch().count());
        for (int i = 0; i < 100; ++i) {
            auto candidate = base / ("natsel_test_" + tag + "_" +
                                     std::to_string(natsel::util::splitmix64_next(state)));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("TempDir: could not create a fresh directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Brute-force character n-gram model: direct count lookup per character,
// add-one smoothing over the observed alphabet. Interior n-grams per line
// only; contexts shorter than n-1 are unseen by construction.
class NgramOracle {
public:
    NgramOracle(std::string_view corpus, int order) : order_(order) {
        std::vector<std::u32string> lines;
        std::u32string current;
        for (char32_t cp : natsel::util::decode_utf8_cps(corpus)) {
            if (cp == U'\n') {
                lines.push_back(current);
                current.clear();
            } else {
                current.push_back(cp);
            }
        }
        lines.push_back(current);
        for (const auto& line : lines) {
            for (char32_t cp : line) alphabet_[cp] = true;
            const int ctx = order_ - 1;
            for (std::size_t pos = static_cast<std::size_t>(ctx); pos < line.size(); ++pos) {
                counts_[line.substr(pos - static_cast<std::size_t>(ctx),
                                    static_cast<std::size_t>(ctx))][line[pos]] += 1;
            }
        }
    }

    double char_logprob(const std::u32string& full_prefix, char32_t symbol) const {
        const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
        if (full_prefix.size() < ctx_len) {
            // Padded context: never counted, so add-one gives uniform.
            return std::log(1.0 / static_cast<double>(alphabet_.size()));
        }
        const auto key = full_prefix.substr(full_prefix.size() - ctx_len);
        std::int64_t count = 0;
        std::int64_t total = 0;
        if (const auto it = counts_.find(key); it != counts_.end()) {
            for (const auto& [cp, c] : it->second) total += c;
            if (const auto sit = it->second.find(symbol); sit != it->second.end()) {
                count = sit->second;
            }
        }
        const double p = static_cast<double>(count + 1) /
                         static_cast<double>(total + static_cast<std::int64_t>(alphabet_.size()));
        return std::log(p);
    }

    std::vector<double> token_logprobs(std::string_view context,
                                       std::string_view continuation) const {
        std::u32string prefix = natsel::util::decode_utf8_cps(context);
        std::vector<double> out;
        for (char32_t cp : natsel::util::decode_utf8_cps(continuation)) {
            out.push_back(char_logprob(prefix, cp));
            prefix.push_back(cp);
        }
        return out;
    }

    std::size_t alphabet_size() const { return alphabet_.size(); }

private:
    int order_;
    std::map<char32_t, bool> alphabet_;
    std::map<std::u32string, std::map<char32_t, std::int64_t>> counts_;
};

// Deterministic fuzz text. The pool mixes plain sentences, decimals,
// abbreviations, $-math, fullwidth punctuation and multi-byte characters so
// segmentation and scoring see realistic shapes.
class FuzzText {
public:
    explicit FuzzText(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return natsel::util::splitmix64_next(state_); }
    std::size_t below(std::size_t bound) {
        return static_cast<std::size_t>(natsel::util::bounded_rand(state_, bound));
    }

    std::string snippet() {
        static const std::vector<std::string> pool = {
            "The value is 3.14 exactly",
            "So B is 3",
            "x equals y",
            "e.g. a small case",
            "see Fig. 2 for details",
            "Dr. Who said so",
            "since $x. y$ holds",
            "we get $$a+b. c$$ here",
            "合計は 42 です",
            "答えは次の通り。",
            "αβγ δε",
            "check vs. the baseline",
            "then 2.5 + 0.75 = 3.25",
            "done",
            "well spaced",
            "Ответ готов",
        };
        return pool[below(pool.size())];
    }

    std::string terminator() {
        static const std::vector<std::string> pool = {". ", "! ", "? ", ".\n", "。", "！ ",
                                                      "？\n", ".  ", "\n\n", " "};
        return pool[below(pool.size())];
    }

    // A paragraph of n_snippets snippets joined by random terminators.
    std::string text(std::size_t n_snippets) {
        std::string out;
        for (std::size_t i = 0; i < n_snippets; ++i) {
            out += snippet();
            if (i + 1 < n_snippets) out += terminator();
        }
        if (out.empty()) out = "x";
        return out;
    }

    // Random string over a small alphabet (useful for scorer fuzz).
    std::string word(std::string_view alphabet, std::size_t length) {
        std::string out;
        for (std::size_t i = 0; i < length; ++i) out.push_back(alphabet[below(alphabet.size())]);
        return out;
    }

private:
    std::uint64_t state_;
};

} // namespace testsupport
