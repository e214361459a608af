#include "natsel/curation.hpp"

#include "natsel/errors.hpp"
#include "natsel/hash.hpp"
#include "natsel/jsonl.hpp"
#include "natsel/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

namespace natsel {

using nlohmann::json;

namespace {

constexpr double kTieTolerance = 1e-12;

struct KindName {
    StrategyKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {StrategyKind::random, "random"},
    {StrategyKind::global_highest, "global_highest"},
    {StrategyKind::global_lowest, "global_lowest"},
    {StrategyKind::global_middle, "global_middle"},
    {StrategyKind::local_highest, "local_highest"},
    {StrategyKind::local_lowest, "local_lowest"},
    {StrategyKind::all_teachers, "all_teachers"},
};

} // namespace

SelectionStrategy SelectionStrategy::parse(std::string_view kind_text,
                                           std::optional<std::uint64_t> seed) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind_text == name) {
            SelectionStrategy s;
            s.kind = kind;
            s.seed = seed;
            s.validate();
            return s;
        }
    }
    throw ValidationError("unknown selection strategy \"" + std::string(kind_text) + "\"");
}

std::string SelectionStrategy::kind_name() const {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == this->kind) return name;
    }
    return "?";
}

void SelectionStrategy::validate() const {
    if (kind == StrategyKind::random && !seed) {
        throw ValidationError("random strategy requires a seed");
    }
}

namespace {

// Per-prompt deterministic draw: the index comes from a keyed hash rather
// than a sequential stream, so adding or removing prompts never perturbs the
// draw of any other prompt.
std::size_t seeded_draw(std::uint64_t seed, const std::string& prompt_id, std::size_t n) {
    const auto digest = hash::sha256_hex({std::to_string(seed), prompt_id});
    std::uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = digest[i];
        v = (v << 4) | static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return static_cast<std::size_t>(v % n);
}

double strategy_score(const ScoreRecord& r, StrategyKind kind) {
    switch (kind) {
    case StrategyKind::global_highest:
    case StrategyKind::global_lowest:
    case StrategyKind::global_middle:
        return r.global_lp;
    default:
        return r.local_lp;
    }
}

bool canonical_less(const ScoreRecord* a, const ScoreRecord* b) {
    return std::tie(a->teacher_id, a->candidate_index) <
           std::tie(b->teacher_id, b->candidate_index);
}

SelectionRecord make_record(const ScoreRecord& r, const SelectionStrategy& strategy,
                            double score, bool tie_broken) {
    SelectionRecord s;
    s.prompt_id = r.prompt_id;
    s.teacher_id = r.teacher_id;
    s.candidate_index = r.candidate_index;
    s.strategy = strategy.kind_name();
    s.seed = strategy.seed;
    s.score_used = score;
    s.tie_broken = tie_broken;
    return s;
}

} // namespace

std::vector<SelectionRecord> select(const std::vector<ScoreRecord>& scores,
                                    const SelectionStrategy& strategy) {
    strategy.validate();
    if (scores.empty()) throw ValidationError("select: no scores");

    for (const auto& r : scores) {
        if (r.scorer_id != scores.front().scorer_id) {
            throw ValidationError("select: mixed scorer_ids (" + scores.front().scorer_id +
                                  " vs " + r.scorer_id + ")");
        }
        if (!(r.window_policy == scores.front().window_policy)) {
            throw ValidationError("select: mixed window policies");
        }
    }

    std::map<std::string, std::vector<const ScoreRecord*>> groups;
    for (const auto& r : scores) groups[r.prompt_id].push_back(&r);
    for (auto& [id, group] : groups) std::sort(group.begin(), group.end(), canonical_less);

    std::vector<SelectionRecord> out;
    for (const auto& [prompt_id, group] : groups) {
        switch (strategy.kind) {
        case StrategyKind::all_teachers:
            for (const ScoreRecord* r : group) {
                out.push_back(make_record(*r, strategy, r->local_lp, false));
            }
            break;
        case StrategyKind::random: {
            const ScoreRecord* r = group[seeded_draw(*strategy.seed, prompt_id, group.size())];
            out.push_back(make_record(*r, strategy, r->local_lp, false));
            break;
        }
        case StrategyKind::global_middle: {
            auto sorted = group;
            std::stable_sort(sorted.begin(), sorted.end(),
                             [](const ScoreRecord* a, const ScoreRecord* b) {
                                 if (a->global_lp != b->global_lp) {
                                     return a->global_lp < b->global_lp;
                                 }
                                 return canonical_less(a, b);
                             });
            const ScoreRecord* chosen = sorted[(sorted.size() - 1) / 2];
            bool tied = false;
            for (const ScoreRecord* r : sorted) {
                if (r != chosen && r->global_lp == chosen->global_lp) tied = true;
            }
            out.push_back(make_record(*chosen, strategy, chosen->global_lp, tied));
            break;
        }
        default: {
            const bool highest = strategy.kind == StrategyKind::global_highest ||
                                 strategy.kind == StrategyKind::local_highest;
            const ScoreRecord* best = nullptr;
            int n_best = 0;
            for (const ScoreRecord* r : group) {
                const double score = strategy_score(*r, strategy.kind);
                if (!best) {
                    best = r;
                    n_best = 1;
                    continue;
                }
                const double best_score = strategy_score(*best, strategy.kind);
                if (score == best_score) {
                    ++n_best; // canonical order already puts the winner first
                } else if (highest ? score > best_score : score < best_score) {
                    best = r;
                    n_best = 1;
                }
            }
            out.push_back(
                make_record(*best, strategy, strategy_score(*best, strategy.kind), n_best > 1));
            break;
        }
        }
    }
    return out;
}

namespace {

struct TeacherAcc {
    long double local_sum = 0.0L;
    long double global_sum = 0.0L;
    std::int64_t n_records = 0;
    std::set<std::string> prompt_ids;
};

TeacherRanking rank_from_accumulators(std::map<std::string, TeacherAcc>& acc) {
    TeacherRanking ranking;
    for (const auto& [teacher, a] : acc) {
        TeacherRow row;
        row.teacher_id = teacher;
        row.mean_local_lp = static_cast<double>(a.local_sum / static_cast<long double>(a.n_records));
        row.mean_global_lp =
            static_cast<double>(a.global_sum / static_cast<long double>(a.n_records));
        row.n_prompts = static_cast<std::int64_t>(a.prompt_ids.size());
        ranking.rows.push_back(std::move(row));
    }
    std::sort(ranking.rows.begin(), ranking.rows.end(), [](const TeacherRow& a, const TeacherRow& b) {
        if (a.mean_local_lp != b.mean_local_lp) return a.mean_local_lp > b.mean_local_lp;
        return a.teacher_id < b.teacher_id;
    });
    for (std::size_t i = 0; i + 1 < ranking.rows.size(); ++i) {
        if (std::fabs(ranking.rows[i].mean_local_lp - ranking.rows[i + 1].mean_local_lp) <=
            kTieTolerance) {
            ranking.rows[i].tied = true;
            ranking.rows[i + 1].tied = true;
        }
    }
    return ranking;
}

} // namespace

TeacherRanking rank_teachers(const std::vector<ScoreRecord>& scores) {
    if (scores.empty()) throw ValidationError("rank_teachers: no scores");

    std::map<std::string, TeacherAcc> acc;
    for (const auto& r : scores) {
        auto& a = acc[r.teacher_id];
        a.local_sum += r.local_lp;
        a.global_sum += r.global_lp;
        ++a.n_records;
        a.prompt_ids.insert(r.prompt_id);
    }

    const std::int64_t coverage = static_cast<std::int64_t>(acc.begin()->second.prompt_ids.size());
    for (const auto& [teacher, a] : acc) {
        if (static_cast<std::int64_t>(a.prompt_ids.size()) != coverage) {
            std::fprintf(stderr,
                         "natsel: warning: unequal prompt coverage across teachers "
                         "(%s covers %zu prompts, %s covers %zu)\n",
                         acc.begin()->first.c_str(), acc.begin()->second.prompt_ids.size(),
                         teacher.c_str(), a.prompt_ids.size());
            break;
        }
    }
    return rank_from_accumulators(acc);
}

TeacherRanking rank_teachers_subset(const std::vector<ScoreRecord>& scores, int n_prompts,
                                    std::uint64_t seed) {
    if (scores.empty()) throw ValidationError("rank_teachers_subset: no scores");

    std::set<std::string> distinct;
    for (const auto& r : scores) distinct.insert(r.prompt_id);
    std::vector<std::string> ids(distinct.begin(), distinct.end());

    if (n_prompts <= 0 || static_cast<std::size_t>(n_prompts) > ids.size()) {
        throw ValidationError("rank_teachers_subset: n_prompts must be in [1, " +
                              std::to_string(ids.size()) + "], got " + std::to_string(n_prompts));
    }

    // Partial Fisher-Yates over the sorted id list, seeded; deterministic
    // across platforms.
    std::uint64_t state = seed;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_prompts); ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(util::bounded_rand(state, ids.size() - i));
        std::swap(ids[i], ids[j]);
    }
    ids.resize(static_cast<std::size_t>(n_prompts));
    std::sort(ids.begin(), ids.end());
    const std::set<std::string> subset(ids.begin(), ids.end());

    std::vector<ScoreRecord> filtered;
    for (const auto& r : scores) {
        if (subset.count(r.prompt_id)) filtered.push_back(r);
    }
    TeacherRanking ranking = rank_teachers(filtered);
    ranking.subset_prompt_ids = std::move(ids);
    return ranking;
}

std::vector<CompositionRow> composition_report(const std::vector<SelectionRecord>& selections) {
    if (selections.empty()) throw ValidationError("composition_report: empty selections");
    for (const auto& s : selections) {
        if (s.strategy != selections.front().strategy) {
            throw ValidationError("composition_report: selections mix strategies (" +
                                  selections.front().strategy + " vs " + s.strategy + ")");
        }
    }
    std::map<std::string, std::int64_t> wins;
    for (const auto& s : selections) ++wins[s.teacher_id];

    std::vector<CompositionRow> rows;
    for (const auto& [teacher, n] : wins) {
        CompositionRow row;
        row.teacher_id = teacher;
        row.wins = n;
        const double pct = 100.0 * static_cast<double>(n) / static_cast<double>(selections.size());
        row.percent = std::round(pct * 10.0) / 10.0;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const CompositionRow& a, const CompositionRow& b) {
        if (a.wins != b.wins) return a.wins > b.wins;
        return a.teacher_id < b.teacher_id;
    });
    return rows;
}

namespace {

bool is_terminal_punct(char c) {
    return c == '.' || c == '!' || c == '?';
}

std::optional<std::string> extract_boxed(std::string_view response) {
    const auto pos = response.rfind("\\boxed{");
    if (pos == std::string_view::npos) return std::nullopt;
    const std::size_t open = pos + 7; // past "\boxed{"
    int depth = 1;
    for (std::size_t i = open; i < response.size(); ++i) {
        if (response[i] == '{') ++depth;
        if (response[i] == '}') {
            if (--depth == 0) return std::string(response.substr(open, i - open));
        }
    }
    return std::nullopt; // unbalanced span
}

std::optional<std::string> extract_answer_is(std::string_view response) {
    // Walk lines from the end; the last non-blank one must carry the marker.
    std::size_t end = response.size();
    while (end > 0) {
        const auto nl = response.rfind('\n', end - 1);
        const std::size_t begin = nl == std::string_view::npos ? 0 : nl + 1;
        const auto line = response.substr(begin, end - begin);
        if (!util::trim(line).empty()) {
            // Case-insensitive search for the marker.
            std::string lower(line);
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            const auto marker = lower.rfind("answer is");
            if (marker == std::string::npos) return std::nullopt;
            return std::string(line.substr(marker + 9));
        }
        if (begin == 0) break;
        end = begin - 1;
    }
    return std::nullopt;
}

} // namespace

std::optional<std::string> extract_final_answer(std::string_view response) {
    if (auto boxed = extract_boxed(response)) return boxed;
    return extract_answer_is(response);
}

std::string normalize_answer(std::string_view answer) {
    std::string s(util::trim(answer));
    for (;;) {
        const std::string before = s;
        while (!s.empty() && is_terminal_punct(s.back())) s.pop_back();
        s = std::string(util::trim(s));
        if (s.size() >= 2 && s.front() == '{' && s.back() == '}') {
            s = std::string(util::trim(std::string_view(s).substr(1, s.size() - 2)));
        }
        if (s == before) return s;
    }
}

std::vector<CandidateResponse> filter_correct(const std::vector<CandidateResponse>& candidates,
                                              const std::vector<PromptRecord>& prompts) {
    std::unordered_map<std::string, const PromptRecord*> by_id;
    for (const auto& p : prompts) by_id.emplace(p.prompt_id, &p);

    std::vector<CandidateResponse> kept;
    for (const auto& c : candidates) {
        const auto it = by_id.find(c.prompt_id);
        const PromptRecord* prompt = it == by_id.end() ? nullptr : it->second;
        if (!prompt || !prompt->ground_truth) {
            std::fprintf(stderr,
                         "natsel: warning: no ground truth for prompt \"%s\"; candidate (%s, %d) "
                         "passes through unfiltered\n",
                         c.prompt_id.c_str(), c.teacher_id.c_str(), c.candidate_index);
            kept.push_back(c);
            continue;
        }
        const auto answer = extract_final_answer(c.text);
        if (answer && normalize_answer(*answer) == normalize_answer(*prompt->ground_truth)) {
            CandidateResponse copy = c;
            copy.answer_correct = true;
            kept.push_back(std::move(copy));
        }
    }
    return kept;
}

void emit_sft_dataset(const std::vector<SelectionRecord>& selections,
                      const std::vector<PromptRecord>& prompts,
                      const std::vector<CandidateResponse>& candidates,
                      const std::filesystem::path& path) {
    std::unordered_map<std::string, const PromptRecord*> prompt_by_id;
    for (const auto& p : prompts) prompt_by_id.emplace(p.prompt_id, &p);
    std::map<std::tuple<std::string, std::string, int>, const CandidateResponse*> cand_by_key;
    for (const auto& c : candidates) {
        cand_by_key.emplace(std::make_tuple(c.prompt_id, c.teacher_id, c.candidate_index), &c);
    }

    auto sorted = selections;
    std::sort(sorted.begin(), sorted.end(), [](const SelectionRecord& a, const SelectionRecord& b) {
        return std::tie(a.prompt_id, a.teacher_id, a.candidate_index) <
               std::tie(b.prompt_id, b.teacher_id, b.candidate_index);
    });

    std::string out;
    for (const auto& s : sorted) {
        const auto pit = prompt_by_id.find(s.prompt_id);
        const auto cit = cand_by_key.find(std::make_tuple(s.prompt_id, s.teacher_id, s.candidate_index));
        if (pit == prompt_by_id.end() || cit == cand_by_key.end()) {
            throw ValidationError("emit_sft_dataset: dangling selection (" + s.prompt_id + ", " +
                                  s.teacher_id + ", " + std::to_string(s.candidate_index) + ")");
        }
        std::string line = "{\"prompt\":";
        jsonl::append_json_string(line, pit->second->text);
        line += ",\"response\":";
        jsonl::append_json_string(line, cit->second->text);
        line += ",\"teacher_id\":";
        jsonl::append_json_string(line, s.teacher_id);
        line += "}\n";
        out += line;
    }
    util::write_file_atomic(path, out);
}

std::vector<SftRecord> load_sft(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::vector<SftRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("prompt") ||
            !obj.contains("response") || !obj.contains("teacher_id")) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": malformed SFT record");
        }
        out.push_back(SftRecord{obj["prompt"].get<std::string>(),
                                obj["response"].get<std::string>(),
                                obj["teacher_id"].get<std::string>()});
    }
    return out;
}

std::string to_line(const SelectionRecord& r) {
    std::string out = "{\"prompt_id\":";
    jsonl::append_json_string(out, r.prompt_id);
    out += ",\"teacher_id\":";
    jsonl::append_json_string(out, r.teacher_id);
    out += ",\"candidate_index\":" + std::to_string(r.candidate_index);
    out += ",\"strategy\":";
    jsonl::append_json_string(out, r.strategy);
    if (r.seed) out += ",\"seed\":" + std::to_string(*r.seed);
    out += ",\"score_used\":";
    jsonl::append_json_double(out, r.score_used);
    out += ",\"tie_broken\":";
    out += r.tie_broken ? "true" : "false";
    out.push_back('}');
    return out;
}

void write_selections(const std::vector<SelectionRecord>& selections,
                      const std::filesystem::path& path) {
    std::string out;
    for (const auto& s : selections) {
        out += to_line(s);
        out.push_back('\n');
    }
    util::write_file_atomic(path, out);
}

std::vector<SelectionRecord> load_selections(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::vector<SelectionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        const auto fail = [&](const char* why) -> ValidationError {
            return ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw fail("malformed JSON object");
        SelectionRecord r;
        try {
            r.prompt_id = obj.at("prompt_id").get<std::string>();
            r.teacher_id = obj.at("teacher_id").get<std::string>();
            r.candidate_index = obj.at("candidate_index").get<int>();
            r.strategy = obj.at("strategy").get<std::string>();
            if (obj.contains("seed")) r.seed = obj["seed"].get<std::uint64_t>();
            r.score_used = obj.at("score_used").get<double>();
            r.tie_broken = obj.at("tie_broken").get<bool>();
        } catch (const json::exception&) {
            throw fail("missing or mistyped selection field");
        }
        if (r.strategy == "random" && !r.seed) throw fail("random selection without seed");
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace

std::string ranking_to_csv(const TeacherRanking& ranking) {
    std::string out = "teacher_id,mean_local_lp,mean_global_lp,n_prompts,tied\n";
    for (const auto& row : ranking.rows) {
        out += csv_escape(row.teacher_id);
        out.push_back(',');
        out += util::format_double(row.mean_local_lp);
        out.push_back(',');
        out += util::format_double(row.mean_global_lp);
        out.push_back(',');
        out += std::to_string(row.n_prompts);
        out.push_back(',');
        out += row.tied ? "true" : "false";
        out.push_back('\n');
    }
    return out;
}

std::string composition_to_csv(const std::vector<CompositionRow>& rows) {
    std::string out = "teacher_id,wins,percent\n";
    for (const auto& row : rows) {
        char pct[32];
        std::snprintf(pct, sizeof pct, "%.1f", row.percent);
        out += csv_escape(row.teacher_id);
        out.push_back(',');
        out += std::to_string(row.wins);
        out.push_back(',');
        out += pct;
        out.push_back('\n');
    }
    return out;
}

} // namespace natsel
