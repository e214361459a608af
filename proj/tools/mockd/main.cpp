// natsel-mockd: a reference scoring service speaking the /v1/score protocol.
//
// Backed by a character n-gram model, so a `remote` scorer pointed at it
// returns the same numbers as the `reference_ngram` backend scoring the same
// model file. Useful for end-to-end runs of the remote path and for client
// conformance testing; failure injection is available via --fail-first.

#include <natsel/errors.hpp>
#include <natsel/reference_lm.hpp>
#include <natsel/util.hpp>
#include <natsel/version.hpp>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

using namespace natsel;
using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"natsel-mockd: mock student-model scoring service"};

    std::string host = "127.0.0.1";
    int port = 8411;
    std::string lm_file;
    std::string train_corpus;
    int order = 3;
    int fail_first = 0;
    int latency_ms = 0;

    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "bind port");
    app.add_option("--lm", lm_file, "reference LM model file to serve");
    app.add_option("--train", train_corpus, "train an LM from this corpus file instead");
    app.add_option("-n,--order", order, "n-gram order when training");
    app.add_option("--fail-first", fail_first, "respond 503 to the first N requests");
    app.add_option("--latency-ms", latency_ms, "artificial response delay");

    CLI11_PARSE(app, argc, argv);

    std::unique_ptr<ReferenceLm> lm;
    try {
        if (!lm_file.empty()) {
            lm = std::make_unique<ReferenceLm>(ReferenceLm::load(lm_file));
        } else if (!train_corpus.empty()) {
            lm = std::make_unique<ReferenceLm>(ReferenceLm::train_file(train_corpus, order, ""));
        } else {
            std::fprintf(stderr, "natsel-mockd: need --lm or --train\n");
            return 1;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "natsel-mockd: %s\n", e.what());
        return 1;
    }

    httplib::Server server;
    std::atomic<int> remaining_failures{fail_first};

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok\n", "text/plain");
    });

    server.Post("/v1/score", [&](const httplib::Request& req, httplib::Response& res) {
        if (latency_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms));
        }
        if (remaining_failures.fetch_sub(1) > 0) {
            res.status = 503;
            res.set_content(R"({"error":"injected failure"})", "application/json");
            return;
        }
        remaining_failures.store(0);

        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("context") ||
            !body.contains("continuation") || !body["context"].is_string() ||
            !body["continuation"].is_string()) {
            res.status = 400;
            res.set_content(R"({"error":"expected {model, context, continuation}"})",
                            "application/json");
            return;
        }
        const auto context = body["context"].get<std::string>();
        const auto continuation = body["continuation"].get<std::string>();
        if (continuation.empty()) {
            res.status = 400;
            res.set_content(R"({"error":"empty continuation"})", "application/json");
            return;
        }

        const auto scores = lm->token_logprobs(context, continuation);
        json tokens = json::array();
        for (const auto& c : util::decode_utf8(continuation)) {
            tokens.push_back(std::string(continuation.substr(c.offset, c.length)));
        }
        json out;
        out["tokens"] = std::move(tokens);
        out["token_logprobs"] = scores.token_logprobs;
        res.set_content(out.dump(), "application/json");
    });

    std::fprintf(stderr, "natsel-mockd %s serving scorer %s on %s:%d\n", NATSEL_VERSION_STRING,
                 lm->scorer_id().c_str(), host.c_str(), port);
    if (!server.listen(host, port)) {
        std::fprintf(stderr, "natsel-mockd: failed to bind %s:%d\n", host.c_str(), port);
        return 2;
    }
    return 0;
}
