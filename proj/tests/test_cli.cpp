#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// Drives the installed `natsel` binary end to end. The binary path arrives
// via the NATSEL_BIN environment variable (set by CTest).

#include <natsel/util.hpp>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

using natsel::util::read_file;
using nlohmann::json;
using testsupport::TempDir;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string binary() {
    const char* bin = std::getenv("NATSEL_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "NATSEL_BIN must point at the natsel binary");
    return bin;
}

RunResult run_in(const TempDir& dir, const std::string& args, const std::string& env = "") {
    const auto out_path = dir / ".stdout";
    const auto err_path = dir / ".stderr";
    const std::string cmd = "cd '" + dir.path().string() + "' && " + env + (env.empty() ? "" : " ") +
                            "'" + binary() + "' " + args + " >'" + out_path.string() + "' 2>'" +
                            err_path.string() + "'";
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

// prompts + candidates + a trainable scorer config.
void write_fixture(const TempDir& dir) {
    std::string prompts;
    std::string candidates;
    for (int i = 0; i < 6; ++i) {
        const std::string id = "p" + std::to_string(i);
        prompts += "{\"prompt_id\":\"" + id + "\",\"text\":\"question " + std::to_string(i) +
                   "\",\"ground_truth\":\"4\"}\n";
        for (const std::string teacher : {"alpha", "beta"}) {
            candidates += "{\"prompt_id\":\"" + id + "\",\"teacher_id\":\"" + teacher +
                          "\",\"candidate_index\":0,\"text\":\"step one for " + teacher +
                          ". step two here. The answer is 4.\"}\n";
        }
    }
    write_text(dir / "prompts.jsonl", prompts);
    write_text(dir / "candidates.jsonl", candidates);
    write_text(dir / "corpus.txt", "step one for teachers. step two here. the answer is 4.\n");
    write_text(dir / "scorer.json",
               "{\"kind\":\"reference_ngram\",\"train_corpus\":\"corpus.txt\",\"n\":3}");
}

} // namespace

TEST_CASE("version prints and exits zero") {
    TempDir dir("cli_version");
    const auto result = run_in(dir, "version");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("natsel 0.1.0") != std::string::npos);
}

TEST_CASE("unknown flags exit 1 with usage text") {
    TempDir dir("cli_badflag");
    const auto result = run_in(dir, "score --definitely-not-a-flag");
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("--definitely-not-a-flag") != std::string::npos);
    CHECK(result.err.find("Usage") != std::string::npos);
}

TEST_CASE("unknown subcommands exit 1") {
    TempDir dir("cli_badcmd");
    const auto result = run_in(dir, "frobnicate");
    CHECK(result.exit_code == 1);
}

TEST_CASE("missing input files are validation errors, exit 1") {
    TempDir dir("cli_missing");
    const auto result = run_in(dir, "segment --in nope.jsonl --out out.jsonl");
    CHECK(result.exit_code == 1);
}

TEST_CASE("the pipeline runs end to end with manifests") {
    TempDir dir("cli_pipeline");
    write_fixture(dir);

    CHECK(run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl").exit_code == 0);
    CHECK(run_in(dir, "score --prompts prompts.jsonl --candidates segmented.jsonl "
                      "--scorer scorer.json --window fixed:4 --out scores.jsonl")
              .exit_code == 0);
    CHECK(run_in(dir, "select --scores scores.jsonl --strategy local_highest "
                      "--out selection.jsonl --prompts prompts.jsonl "
                      "--candidates candidates.jsonl --sft-out sft.jsonl")
              .exit_code == 0);

    // Manifests accompany every output and carry input/output hashes.
    for (const std::string name :
         {"segmented.jsonl", "scores.jsonl", "selection.jsonl", "sft.jsonl"}) {
        const auto manifest_path = dir / (name + ".manifest.json");
        REQUIRE_MESSAGE(std::filesystem::exists(manifest_path), name);
        const json manifest = json::parse(read_file(manifest_path));
        CHECK(manifest.contains("inputs"));
        CHECK(manifest.contains("outputs"));
        CHECK(manifest.contains("config"));
        for (const auto& [path, digest] : manifest["outputs"].items()) {
            (void)path;
            CHECK(digest.get<std::string>().rfind("sha256:", 0) == 0);
        }
    }

    // The scores manifest pins the scorer identity.
    const json scores_manifest = json::parse(read_file(dir / "scores.jsonl.manifest.json"));
    CHECK(scores_manifest["scorer_id"].get<std::string>().rfind("refngram:", 0) == 0);

    // rank-teachers and report print CSV to stdout.
    const auto rank = run_in(dir, "rank-teachers --scores scores.jsonl");
    CHECK(rank.exit_code == 0);
    CHECK(rank.out.rfind("teacher_id,mean_local_lp,mean_global_lp,n_prompts,tied\n", 0) == 0);

    const auto report = run_in(dir, "report composition --selection selection.jsonl");
    CHECK(report.exit_code == 0);
    CHECK(report.out.rfind("teacher_id,wins,percent\n", 0) == 0);

    // filter-correct keeps everything (every response says "answer is 4").
    const auto filtered =
        run_in(dir, "filter-correct --prompts prompts.jsonl --candidates candidates.jsonl "
                    "--out filtered.jsonl");
    CHECK(filtered.exit_code == 0);
    CHECK(read_file(dir / "filtered.jsonl").find("\"answer_correct\":true") != std::string::npos);
}

TEST_CASE("reruns produce identical bytes and hit the cache") {
    TempDir dir("cli_determinism");
    write_fixture(dir);
    REQUIRE(run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl").exit_code == 0);

    const std::string score_cmd = "score --prompts prompts.jsonl --candidates segmented.jsonl "
                                  "--scorer scorer.json --out scores.jsonl";
    REQUIRE(run_in(dir, score_cmd).exit_code == 0);
    const auto first = read_file(dir / "scores.jsonl");
    const auto second_run = run_in(dir, score_cmd);
    REQUIRE(second_run.exit_code == 0);
    CHECK(read_file(dir / "scores.jsonl") == first);
    CHECK(second_run.err.find(" 0 misses") != std::string::npos);

    const std::string select_cmd =
        "select --scores scores.jsonl --strategy local_highest --out selection.jsonl";
    REQUIRE(run_in(dir, select_cmd).exit_code == 0);
    const auto selection = read_file(dir / "selection.jsonl");
    REQUIRE(run_in(dir, select_cmd).exit_code == 0);
    CHECK(read_file(dir / "selection.jsonl") == selection);
}

TEST_CASE("config file fills gaps, flags beat the file, env beats flags") {
    TempDir dir("cli_config");
    write_fixture(dir);
    REQUIRE(run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl").exit_code == 0);
    write_text(dir / "natsel.json", "{\"window\":\"fraction:0.5\",\"parallelism\":2}");

    // File value applies when no flag is given.
    REQUIRE(run_in(dir, "score --config natsel.json --prompts prompts.jsonl "
                        "--candidates segmented.jsonl --scorer scorer.json --out s1.jsonl")
                .exit_code == 0);
    CHECK(read_file(dir / "s1.jsonl").find("\"kind\":\"fraction\"") != std::string::npos);

    // Flag overrides the file.
    REQUIRE(run_in(dir, "score --config natsel.json --window fixed:2 --prompts prompts.jsonl "
                        "--candidates segmented.jsonl --scorer scorer.json --out s2.jsonl")
                .exit_code == 0);
    CHECK(read_file(dir / "s2.jsonl").find("\"kind\":\"fixed\",\"k\":2") != std::string::npos);

    // Environment overrides both.
    REQUIRE(run_in(dir,
                   "score --config natsel.json --window fixed:2 --prompts prompts.jsonl "
                   "--candidates segmented.jsonl --scorer scorer.json --out s3.jsonl",
                   "NATSEL_WINDOW=full").exit_code == 0);
    CHECK(read_file(dir / "s3.jsonl").find("\"kind\":\"full\"") != std::string::npos);

    // Unknown config keys are rejected.
    write_text(dir / "bad.json", "{\"window\":\"full\"}");
    const auto bad = run_in(dir, "score --config bad.json --prompts prompts.jsonl "
                                 "--candidates segmented.jsonl --scorer scorer.json "
                                 "--out s4.jsonl");
    CHECK(bad.exit_code == 1);
    CHECK(bad.err.find("unknown key") != std::string::npos);
}

TEST_CASE("subset rankings record the sampled prompts for audit") {
    TempDir dir("cli_subset");
    write_fixture(dir);
    REQUIRE(run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl").exit_code == 0);
    REQUIRE(run_in(dir, "score --prompts prompts.jsonl --candidates segmented.jsonl "
                        "--scorer scorer.json --out scores.jsonl")
                .exit_code == 0);
    REQUIRE(run_in(dir, "rank-teachers --scores scores.jsonl --subset 3 --seed 7 "
                        "--out ranking.csv")
                .exit_code == 0);
    const json audit = json::parse(read_file(dir / "ranking.csv.subset.json"));
    CHECK(audit["subset"] == 3);
    CHECK(audit["seed"] == 7);
    CHECK(audit["prompt_ids"].size() == 3);
}

TEST_CASE("a live lock blocks a second process, a stale lock does not") {
    TempDir dir("cli_lock");
    write_fixture(dir);

    // Lock owned by this (alive) test process.
    write_text(dir / ".natsel.lock", std::to_string(getpid()) + "\n");
    const auto blocked = run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl");
    CHECK(blocked.exit_code == 2);
    CHECK(blocked.err.find("locked") != std::string::npos);

    // Stale lock: pid that cannot exist.
    write_text(dir / ".natsel.lock", "999999999\n");
    CHECK(run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl").exit_code == 0);
    CHECK(!std::filesystem::exists(dir / ".natsel.lock")); // released on exit
}

TEST_CASE("window ablation writes fraction and global rows") {
    TempDir dir("cli_ablate");
    write_fixture(dir);
    REQUIRE(run_in(dir, "segment --in candidates.jsonl --out segmented.jsonl").exit_code == 0);
    REQUIRE(run_in(dir, "ablate-window --prompts prompts.jsonl --candidates segmented.jsonl "
                        "--scorer scorer.json --fractions 0.25,0.75 --out ablation.csv")
                .exit_code == 0);
    const auto csv = read_file(dir / "ablation.csv");
    CHECK(csv.rfind("window,teacher_id,mean_lp,n_candidates\n", 0) == 0);
    CHECK(csv.find("fraction:0.25,alpha,") != std::string::npos);
    CHECK(csv.find("fraction:0.75,beta,") != std::string::npos);
    CHECK(csv.find("global,alpha,") != std::string::npos);
}
