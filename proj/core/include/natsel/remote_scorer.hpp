#pragma once

#include "natsel/scorer.hpp"

#include <memory>
#include <string>

namespace natsel {

// Retry/backoff and concurrency knobs for the HTTP scoring client.
struct TransportConfig {
    int max_attempts = 5;        // total tries, not retries
    double base_delay_ms = 200;  // backoff = base * factor^attempt, full jitter
    double backoff_factor = 2.0;
    double max_delay_ms = 10000;
    double timeout_s = 120;      // per-request read timeout (long continuations)
    int max_in_flight = 8;       // client-side concurrent request cap

    void validate() const;
};

// Client of a student-model log-likelihood service:
//   POST {endpoint}/v1/score  {"model", "context", "continuation"}
//   200: {"tokens": [str], "token_logprobs": [float]}
// The server scores the continuation as a forced continuation of the context
// (no sampling) and returns only continuation-token log-probs, in nats.
// Transport errors and 5xx are retried with exponential backoff and full
// jitter; 4xx and protocol violations are not.
class RemoteScorer final : public Scorer {
public:
    RemoteScorer(std::string endpoint, std::string model, TransportConfig config = {},
                 std::string scorer_id = "");
    ~RemoteScorer() override;

    const std::string& scorer_id() const override { return scorer_id_; }
    TokenScores token_logprobs(std::string_view context, std::string_view continuation) override;

    const std::string& endpoint() const { return endpoint_; }
    const std::string& model() const { return model_; }

private:
    std::string endpoint_;
    std::string model_;
    TransportConfig config_;
    std::string scorer_id_;

    struct Gate; // bounds in-flight requests
    std::unique_ptr<Gate> gate_;
};

} // namespace natsel
