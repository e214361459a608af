#include "natsel/remote_scorer.hpp"

#include "natsel/errors.hpp"
#include "natsel/hash.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <random>
#include <thread>

namespace natsel {

using nlohmann::json;

void TransportConfig::validate() const {
    if (max_attempts < 1) throw ValidationError("transport: max_attempts must be >= 1");
    if (base_delay_ms < 0 || backoff_factor < 1.0 || max_delay_ms < 0) {
        throw ValidationError("transport: invalid backoff parameters");
    }
    if (timeout_s <= 0) throw ValidationError("transport: timeout must be positive");
    if (max_in_flight < 1) throw ValidationError("transport: max_in_flight must be >= 1");
}

// Counting gate for the in-flight request cap.
struct RemoteScorer::Gate {
    explicit Gate(int slots) : available(slots) {}

    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard lock(mu);
            ++available;
        }
        cv.notify_one();
    }

    std::mutex mu;
    std::condition_variable cv;
    int available;

    struct Guard {
        Gate& gate;
        explicit Guard(Gate& g) : gate(g) { gate.acquire(); }
        ~Guard() { gate.release(); }
    };
};

namespace {

// Splits "http://host:port/base" into (scheme://host:port, /base).
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw ValidationError("remote scorer: endpoint must include a scheme: " + endpoint);
    }
    const auto path_start = endpoint.find('/', scheme + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string base = endpoint.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();
    return {endpoint.substr(0, path_start), base};
}

double full_jitter_delay_ms(const TransportConfig& cfg, int attempt) {
    const double cap =
        std::min(cfg.max_delay_ms, cfg.base_delay_ms * std::pow(cfg.backoff_factor, attempt));
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> dist(0.0, cap);
    return dist(rng);
}

TokenScores parse_score_response(const std::string& body, std::size_t continuation_size) {
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ProtocolError("remote scorer: response is not a JSON object");
    }
    const auto tokens = doc.find("tokens");
    const auto lps = doc.find("token_logprobs");
    if (tokens == doc.end() || !tokens->is_array() || lps == doc.end() || !lps->is_array()) {
        throw ProtocolError("remote scorer: response missing \"tokens\"/\"token_logprobs\"");
    }
    if (tokens->size() != lps->size()) {
        throw ProtocolError("remote scorer: tokens/token_logprobs length mismatch (" +
                            std::to_string(tokens->size()) + " vs " +
                            std::to_string(lps->size()) + ")");
    }
    if (lps->empty() && continuation_size > 0) {
        throw ProtocolError("remote scorer: empty token scores for non-empty continuation");
    }
    TokenScores scores;
    scores.token_logprobs.reserve(lps->size());
    for (const auto& v : *lps) {
        if (!v.is_number()) throw ProtocolError("remote scorer: non-numeric log-prob");
        const double lp = v.get<double>();
        if (std::isnan(lp) || std::isinf(lp)) {
            throw ProtocolError("remote scorer: non-finite log-prob");
        }
        if (lp > 0.0) {
            throw ProtocolError("remote scorer: positive log-prob " + std::to_string(lp));
        }
        scores.token_logprobs.push_back(lp);
    }
    return scores;
}

} // namespace

RemoteScorer::RemoteScorer(std::string endpoint, std::string model, TransportConfig config,
                           std::string scorer_id)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), config_(config) {
    config_.validate();
    split_endpoint(endpoint_); // validate eagerly
    scorer_id_ = scorer_id.empty()
                     ? "remote:" + hash::sha256_hex({endpoint_, model_})
                     : std::move(scorer_id);
    gate_ = std::make_unique<Gate>(config_.max_in_flight);
}

RemoteScorer::~RemoteScorer() = default;

TokenScores RemoteScorer::token_logprobs(std::string_view context, std::string_view continuation) {
    if (continuation.empty()) {
        throw ValidationError("token_logprobs: empty continuation");
    }

    json req;
    req["model"] = model_;
    req["context"] = std::string(context);
    req["continuation"] = std::string(continuation);
    const std::string body = req.dump();

    const auto [host, base] = split_endpoint(endpoint_);
    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            const auto delay = full_jitter_delay_ms(config_, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
        }

        Gate::Guard guard(*gate_);
        httplib::Client client(host);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
        client.set_write_timeout(std::chrono::duration<double>(config_.timeout_s));

        auto res = client.Post(base + "/v1/score", body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error: HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status >= 400) {
            std::string detail = res->body;
            json err = json::parse(detail, nullptr, false);
            if (err.is_object() && err.contains("error") && err["error"].is_string()) {
                detail = err["error"].get<std::string>();
            }
            throw ProtocolError("remote scorer: HTTP " + std::to_string(res->status) + ": " +
                                detail);
        }
        return parse_score_response(res->body, continuation.size());
    }
    throw TransportError("remote scorer: " + std::to_string(config_.max_attempts) +
                         " attempts exhausted; last error: " + last_error);
}

} // namespace natsel
