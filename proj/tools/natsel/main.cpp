// natsel: score candidate teacher responses with a student model's token
// log-probabilities and curate distillation data from the scores.
//
// Pipeline: segment -> score -> select / rank-teachers / ablate-window /
// report, plus filter-correct for answer-checked corpora.

#include "config.hpp"
#include "lockfile.hpp"
#include "manifest.hpp"

#include <natsel/cache.hpp>
#include <natsel/curation.hpp>
#include <natsel/errors.hpp>
#include <natsel/jsonl.hpp>
#include <natsel/metrics.hpp>
#include <natsel/segmenter.hpp>
#include <natsel/util.hpp>
#include <natsel/version.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <functional>
#include <memory>

namespace natsel::cli {
namespace {

using nlohmann::json;

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

void info(const RunConfig& config, const std::string& message) {
    if (config.verbose()) std::fprintf(stderr, "natsel: %s\n", message.c_str());
}

json effective_config_json(const RunConfig& c) {
    json doc;
    const auto put = [&](const char* key, const std::string& value) {
        if (!value.empty()) doc[key] = value;
    };
    put("prompts", c.prompts);
    put("candidates", c.candidates);
    put("scores", c.scores);
    put("selection", c.selection);
    put("scorer", c.scorer);
    put("in", c.in);
    put("out", c.out);
    put("sft_out", c.sft_out);
    put("cache_dir", c.cache_dir);
    put("window", c.window);
    put("strategy", c.strategy);
    put("fractions", c.fractions);
    doc["separator"] = c.separator;
    doc["include_prompt"] = c.include_prompt;
    doc["parallelism"] = c.parallelism;
    if (c.subset > 0) doc["subset"] = c.subset;
    if (c.seed) doc["seed"] = *c.seed;
    return doc;
}

struct LoadedScorer {
    std::shared_ptr<Scorer> backend;
    std::shared_ptr<ScoreCache> cache;
    std::shared_ptr<CachingScorer> caching;

    Scorer& scorer() { return *caching; }
};

LoadedScorer load_scorer(const RunConfig& config) {
    require(!config.scorer.empty(), "missing --scorer");
    const std::filesystem::path path(config.scorer);
    const auto ref = ScorerRef::load(path);
    LoadedScorer loaded;
    loaded.backend = make_scorer(ref, path.has_parent_path() ? path.parent_path()
                                                             : std::filesystem::path("."));
    loaded.cache = std::make_shared<ScoreCache>(config.cache_dir);
    loaded.caching = std::make_shared<CachingScorer>(loaded.backend, loaded.cache);
    return loaded;
}

ScoringJob scoring_job(const RunConfig& config) {
    ScoringJob job;
    job.window_policy = WindowPolicy::parse(config.window);
    job.include_prompt = config.include_prompt;
    job.parallelism = config.parallelism;
    job.separator = config.separator;
    job.validate();
    return job;
}

std::filesystem::path out_dir(const std::string& out) {
    const std::filesystem::path p(out);
    return p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
}

int cmd_version() {
    std::printf("natsel %s\n", NATSEL_VERSION_STRING);
    return 0;
}

int cmd_segment(const RunConfig& config, const SegmenterConfig& seg_config) {
    require(!config.in.empty(), "missing --in");
    require(!config.out.empty(), "missing --out");
    DirLock lock(out_dir(config.out));

    auto candidates = jsonl::load_candidates(config.in);
    for (auto& c : candidates) c.steps = segment(c.text, seg_config);
    jsonl::write_jsonl(candidates, config.out);
    write_manifest(config.out, "segment", {config.in}, effective_config_json(config));
    info(config, "segmented " + std::to_string(candidates.size()) + " candidates -> " +
                     config.out);
    return 0;
}

int cmd_score(const RunConfig& config) {
    require(!config.prompts.empty(), "missing --prompts");
    require(!config.candidates.empty(), "missing --candidates");
    require(!config.out.empty(), "missing --out");
    DirLock lock(out_dir(config.out));

    const auto prompts = jsonl::load_prompts(config.prompts);
    const auto candidates = jsonl::load_candidates(config.candidates);
    auto loaded = load_scorer(config);
    const auto job = scoring_job(config);

    const auto records = score_dataset(prompts, candidates, loaded.scorer(), job);
    jsonl::write_jsonl(records, config.out);
    write_manifest(config.out, "score", {config.prompts, config.candidates, config.scorer},
                   effective_config_json(config), loaded.backend->scorer_id());

    const auto stats = loaded.caching->stats();
    info(config, "scored " + std::to_string(records.size()) + " candidates (cache: " +
                     std::to_string(stats.hits) + " hits, " + std::to_string(stats.misses) +
                     " misses) -> " + config.out);
    return 0;
}

int cmd_select(const RunConfig& config) {
    require(!config.scores.empty(), "missing --scores");
    require(!config.out.empty(), "missing --out");
    require(!config.strategy.empty(), "missing --strategy");
    DirLock lock(out_dir(config.out));

    const auto scores = jsonl::load_scores(config.scores);
    const auto strategy = SelectionStrategy::parse(config.strategy, config.seed);
    const auto selections = select(scores, strategy);
    write_selections(selections, config.out);
    write_manifest(config.out, "select", {config.scores}, effective_config_json(config),
                   scores.empty() ? "" : scores.front().scorer_id);
    info(config, "selected " + std::to_string(selections.size()) + " records -> " + config.out);

    if (!config.sft_out.empty()) {
        require(!config.prompts.empty(), "--sft-out requires --prompts");
        require(!config.candidates.empty(), "--sft-out requires --candidates");
        const auto prompts = jsonl::load_prompts(config.prompts);
        const auto candidates = jsonl::load_candidates(config.candidates);
        emit_sft_dataset(selections, prompts, candidates, config.sft_out);
        write_manifest(config.sft_out, "select",
                       {config.scores, config.prompts, config.candidates},
                       effective_config_json(config));
        info(config, "wrote SFT dataset -> " + config.sft_out);
    }
    return 0;
}

int cmd_rank_teachers(const RunConfig& config) {
    require(!config.scores.empty(), "missing --scores");
    const auto scores = jsonl::load_scores(config.scores);

    TeacherRanking ranking;
    if (config.subset > 0) {
        ranking = rank_teachers_subset(scores, config.subset, config.seed.value_or(0));
    } else {
        ranking = rank_teachers(scores);
    }
    const auto csv = ranking_to_csv(ranking);

    if (config.out.empty()) {
        std::fputs(csv.c_str(), stdout);
        return 0;
    }
    DirLock lock(out_dir(config.out));
    util::write_file_atomic(config.out, csv);
    std::vector<std::filesystem::path> extra;
    if (!ranking.subset_prompt_ids.empty()) {
        json audit;
        audit["subset"] = config.subset;
        audit["seed"] = config.seed.value_or(0);
        audit["prompt_ids"] = ranking.subset_prompt_ids;
        const auto audit_path = config.out + ".subset.json";
        util::write_file_atomic(audit_path, audit.dump(2) + "\n");
        extra.push_back(audit_path);
    }
    write_manifest(config.out, "rank-teachers", {config.scores}, effective_config_json(config),
                   scores.empty() ? "" : scores.front().scorer_id, extra);
    info(config, "ranked " + std::to_string(ranking.rows.size()) + " teachers -> " + config.out);
    return 0;
}

int cmd_ablate_window(const RunConfig& config) {
    require(!config.prompts.empty(), "missing --prompts");
    require(!config.candidates.empty(), "missing --candidates");
    require(!config.out.empty(), "missing --out");
    DirLock lock(out_dir(config.out));

    const auto prompts = jsonl::load_prompts(config.prompts);
    const auto candidates = jsonl::load_candidates(config.candidates);
    auto loaded = load_scorer(config);
    ScoringJob job = scoring_job(config);

    const auto fractions = parse_fractions(config.fractions);
    const auto rows = window_ablation(prompts, candidates, loaded.scorer(), fractions, job);

    std::string csv = "window,teacher_id,mean_lp,n_candidates\n";
    for (const auto& row : rows) {
        if (row.fraction) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "fraction:%g", *row.fraction);
            csv += buf;
        } else {
            csv += "global";
        }
        csv.push_back(',');
        csv += row.teacher_id;
        csv.push_back(',');
        csv += util::format_double(row.mean_lp);
        csv.push_back(',');
        csv += std::to_string(row.n_candidates);
        csv.push_back('\n');
    }
    util::write_file_atomic(config.out, csv);
    write_manifest(config.out, "ablate-window",
                   {config.prompts, config.candidates, config.scorer},
                   effective_config_json(config), loaded.backend->scorer_id());
    info(config, "ablation over " + std::to_string(fractions.size()) + " fractions -> " +
                     config.out);
    return 0;
}

int cmd_filter_correct(const RunConfig& config) {
    require(!config.prompts.empty(), "missing --prompts");
    require(!config.candidates.empty(), "missing --candidates");
    require(!config.out.empty(), "missing --out");
    DirLock lock(out_dir(config.out));

    const auto prompts = jsonl::load_prompts(config.prompts);
    const auto candidates = jsonl::load_candidates(config.candidates);
    const auto kept = filter_correct(candidates, prompts);
    jsonl::write_jsonl(kept, config.out);
    write_manifest(config.out, "filter-correct", {config.prompts, config.candidates},
                   effective_config_json(config));
    info(config, "kept " + std::to_string(kept.size()) + " of " +
                     std::to_string(candidates.size()) + " candidates -> " + config.out);
    return 0;
}

int cmd_report_composition(const RunConfig& config) {
    require(!config.selection.empty(), "missing --selection");
    const auto selections = load_selections(config.selection);
    const auto rows = composition_report(selections);
    const auto csv = composition_to_csv(rows);
    if (config.out.empty()) {
        std::fputs(csv.c_str(), stdout);
        return 0;
    }
    DirLock lock(out_dir(config.out));
    util::write_file_atomic(config.out, csv);
    write_manifest(config.out, "report composition", {config.selection},
                   effective_config_json(config));
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"natsel: local-naturalness scoring and curation for reasoning distillation"};
    app.require_subcommand(1);

    RunConfig config;
    std::string config_file;
    app.add_option("--config", config_file, "JSON config file (flags override it)")
        ->expected(1);

    SegmenterConfig seg_config;
    bool no_blank_split = false;
    bool no_math_protect = false;

    // Options register per subcommand; names double as config-file keys.
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--log-level", config.log_level, "quiet|info|debug");
    };

    auto* version = app.add_subcommand("version", "print the tool version");
    (void)version;

    auto* segment_cmd = app.add_subcommand("segment", "split responses into sentence steps");
    segment_cmd->add_option("--in", config.in, "candidates.jsonl to segment")->expected(1);
    segment_cmd->add_option("--out", config.out, "segmented candidates.jsonl")->expected(1);
    segment_cmd->add_option("--abbrev", seg_config.abbreviations,
                            "extra abbreviations protected from splitting");
    segment_cmd->add_flag("--no-blank-split", no_blank_split,
                          "do not split on blank lines");
    segment_cmd->add_flag("--no-math-protect", no_math_protect,
                          "do not protect $...$ spans");
    add_common(segment_cmd);

    auto* score_cmd = app.add_subcommand("score", "compute global and local log-probabilities");
    score_cmd->add_option("--prompts", config.prompts, "prompts.jsonl")->expected(1);
    score_cmd->add_option("--candidates", config.candidates, "segmented candidates.jsonl")
        ->expected(1);
    score_cmd->add_option("--scorer", config.scorer, "scorer config JSON")->expected(1);
    score_cmd->add_option("--window", config.window, "fixed:K | fraction:F | full");
    score_cmd->add_option("--out", config.out, "scores.jsonl")->expected(1);
    score_cmd->add_option("--cache-dir", config.cache_dir, "score cache directory");
    score_cmd->add_option("--parallelism", config.parallelism, "concurrent scorer calls");
    score_cmd->add_option("--separator", config.separator, "prompt/response separator");
    score_cmd->add_flag("--include-prompt,!--no-include-prompt", config.include_prompt,
                        "condition every step on the prompt");
    add_common(score_cmd);

    auto* select_cmd = app.add_subcommand("select", "choose responses per prompt from scores");
    select_cmd->add_option("--scores", config.scores, "scores.jsonl")->expected(1);
    select_cmd->add_option("--strategy", config.strategy,
                           "random|global_highest|global_lowest|global_middle|local_highest|"
                           "local_lowest|all_teachers");
    select_cmd->add_option("--seed", config.seed, "seed for the random strategy");
    select_cmd->add_option("--out", config.out, "selection.jsonl")->expected(1);
    select_cmd->add_option("--prompts", config.prompts, "prompts.jsonl (for --sft-out)");
    select_cmd->add_option("--candidates", config.candidates, "candidates.jsonl (for --sft-out)");
    select_cmd->add_option("--sft-out", config.sft_out, "also emit an SFT dataset");
    add_common(select_cmd);

    auto* rank_cmd = app.add_subcommand("rank-teachers", "rank teachers by mean local score");
    rank_cmd->add_option("--scores", config.scores, "scores.jsonl")->expected(1);
    rank_cmd->add_option("--subset", config.subset, "rank on a sampled prompt subset");
    rank_cmd->add_option("--seed", config.seed, "subset sampling seed");
    rank_cmd->add_option("--out", config.out, "ranking CSV (stdout when omitted)");
    add_common(rank_cmd);

    auto* ablate_cmd = app.add_subcommand("ablate-window",
                                          "sweep fractional windows and report teacher means");
    ablate_cmd->add_option("--prompts", config.prompts, "prompts.jsonl")->expected(1);
    ablate_cmd->add_option("--candidates", config.candidates, "segmented candidates.jsonl")
        ->expected(1);
    ablate_cmd->add_option("--scorer", config.scorer, "scorer config JSON")->expected(1);
    ablate_cmd->add_option("--fractions", config.fractions, "comma-separated fractions in (0,1]");
    ablate_cmd->add_option("--out", config.out, "ablation CSV")->expected(1);
    ablate_cmd->add_option("--cache-dir", config.cache_dir, "score cache directory");
    ablate_cmd->add_option("--parallelism", config.parallelism, "concurrent scorer calls");
    ablate_cmd->add_option("--separator", config.separator, "prompt/response separator");
    ablate_cmd->add_flag("--include-prompt,!--no-include-prompt", config.include_prompt,
                         "condition every step on the prompt");
    add_common(ablate_cmd);

    auto* filter_cmd = app.add_subcommand("filter-correct",
                                          "keep candidates whose final answer matches");
    filter_cmd->add_option("--prompts", config.prompts, "prompts.jsonl with ground_truth")
        ->expected(1);
    filter_cmd->add_option("--candidates", config.candidates, "candidates.jsonl")->expected(1);
    filter_cmd->add_option("--out", config.out, "filtered candidates.jsonl")->expected(1);
    add_common(filter_cmd);

    auto* report_cmd = app.add_subcommand("report", "reports over curation outputs");
    report_cmd->require_subcommand(1);
    auto* composition_cmd =
        report_cmd->add_subcommand("composition", "per-teacher share of won prompts");
    composition_cmd->add_option("--selection", config.selection, "selection.jsonl")->expected(1);
    composition_cmd->add_option("--out", config.out, "composition CSV (stdout when omitted)");
    add_common(composition_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        // Flags already sit in config; note which keys they set, then layer
        // the config file underneath and environment variables on top.
        std::vector<std::string> set_keys;
        const std::function<void(const CLI::App*)> collect = [&](const CLI::App* cmd) {
            for (const CLI::Option* opt : cmd->get_options()) {
                if (opt->count() == 0) continue;
                std::string name = opt->get_name();
                if (name.rfind("--", 0) == 0) name = name.substr(2);
                for (auto& ch : name) {
                    if (ch == '-') ch = '_';
                }
                set_keys.push_back(name);
            }
            for (const CLI::App* nested : cmd->get_subcommands()) collect(nested);
        };
        for (const CLI::App* cmd : app.get_subcommands()) collect(cmd);
        if (!config_file.empty()) apply_config_file(config, config_file, set_keys);
        apply_env_overrides(config);

        seg_config.split_on_blank_line = !no_blank_split;
        seg_config.protect_math_spans = !no_math_protect;

        if (app.got_subcommand("version")) return cmd_version();
        if (app.got_subcommand("segment")) return cmd_segment(config, seg_config);
        if (app.got_subcommand("score")) return cmd_score(config);
        if (app.got_subcommand("select")) return cmd_select(config);
        if (app.got_subcommand("rank-teachers")) return cmd_rank_teachers(config);
        if (app.got_subcommand("ablate-window")) return cmd_ablate_window(config);
        if (app.got_subcommand("filter-correct")) return cmd_filter_correct(config);
        if (app.got_subcommand("report")) return cmd_report_composition(config);
        throw ValidationError("no subcommand given");
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "natsel: error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "natsel: error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "natsel: unexpected error: %s\n", e.what());
        return 2;
    }
}

} // namespace
} // namespace natsel::cli

int main(int argc, char** argv) { return natsel::cli::run(argc, argv); }
