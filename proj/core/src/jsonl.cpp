#include "natsel/jsonl.hpp"

#include "natsel/errors.hpp"
#include "natsel/util.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <tuple>

namespace natsel::jsonl {

using nlohmann::json;

namespace {

// Calls fn(line_number, parsed_object) for every non-empty line.
template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (util::trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": malformed JSON object");
        }
        fn(lineno, obj);
    }
    if (in.bad()) throw IoError("read failed: " + path.string());
}

std::string context(const std::filesystem::path& path, std::size_t lineno) {
    return path.string() + ":" + std::to_string(lineno);
}

std::string require_string(const json& obj, const char* key,
                           const std::filesystem::path& path, std::size_t lineno) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw ValidationError(context(path, lineno) + ": missing or non-string \"" +
                              key + "\"");
    }
    return it->get<std::string>();
}

std::int64_t require_int(const json& obj, const char* key,
                         const std::filesystem::path& path, std::size_t lineno) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_integer()) {
        throw ValidationError(context(path, lineno) + ": missing or non-integer \"" +
                              key + "\"");
    }
    return it->get<std::int64_t>();
}

WindowPolicy window_policy_from_json(const json& obj, const std::filesystem::path& path,
                                     std::size_t lineno) {
    const auto kind = require_string(obj, "kind", path, lineno);
    if (kind == "fixed") return WindowPolicy::fixed_k(static_cast<int>(require_int(obj, "k", path, lineno)));
    if (kind == "fraction") {
        const auto it = obj.find("fraction");
        if (it == obj.end() || !it->is_number()) {
            throw ValidationError(context(path, lineno) + ": missing \"fraction\"");
        }
        return WindowPolicy::fractional(it->get<double>());
    }
    if (kind == "full") return WindowPolicy::full();
    throw ValidationError(context(path, lineno) + ": unknown window policy kind \"" + kind + "\"");
}

} // namespace

std::vector<PromptRecord> load_prompts(const std::filesystem::path& path) {
    std::vector<PromptRecord> out;
    std::set<std::string> seen;
    for_each_line(path, [&](std::size_t lineno, const json& obj) {
        PromptRecord r;
        r.prompt_id = require_string(obj, "prompt_id", path, lineno);
        r.text = require_string(obj, "text", path, lineno);
        if (util::trim(r.text).empty()) {
            throw ValidationError(context(path, lineno) + ": empty text for prompt \"" +
                                  r.prompt_id + "\"");
        }
        if (const auto it = obj.find("ground_truth"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) {
                throw ValidationError(context(path, lineno) + ": non-string \"ground_truth\"");
            }
            r.ground_truth = it->get<std::string>();
        }
        if (!seen.insert(r.prompt_id).second) {
            throw ValidationError(context(path, lineno) + ": duplicate prompt_id \"" +
                                  r.prompt_id + "\"");
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<CandidateResponse> load_candidates(const std::filesystem::path& path) {
    std::vector<CandidateResponse> out;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for_each_line(path, [&](std::size_t lineno, const json& obj) {
        CandidateResponse r;
        r.prompt_id = require_string(obj, "prompt_id", path, lineno);
        r.teacher_id = require_string(obj, "teacher_id", path, lineno);
        const auto idx = require_int(obj, "candidate_index", path, lineno);
        if (idx < 0) {
            throw ValidationError(context(path, lineno) + ": negative candidate_index");
        }
        r.candidate_index = static_cast<int>(idx);
        r.text = require_string(obj, "text", path, lineno);
        if (util::trim(r.text).empty()) {
            throw ValidationError(context(path, lineno) + ": empty text");
        }
        if (const auto it = obj.find("steps"); it != obj.end() && !it->is_null()) {
            if (!it->is_array()) {
                throw ValidationError(context(path, lineno) + ": \"steps\" must be an array");
            }
            int index = 0;
            for (const auto& s : *it) {
                if (!s.is_string()) {
                    throw ValidationError(context(path, lineno) + ": step entries must be strings");
                }
                r.steps.push_back(Step{++index, s.get<std::string>()});
            }
            if (!r.steps.empty() && reconstruct(r.steps) != r.text) {
                throw ValidationError(context(path, lineno) +
                                      ": steps do not reconstruct the response text");
            }
        }
        if (const auto it = obj.find("answer_correct"); it != obj.end() && !it->is_null()) {
            if (!it->is_boolean()) {
                throw ValidationError(context(path, lineno) + ": non-boolean \"answer_correct\"");
            }
            r.answer_correct = it->get<bool>();
        }
        if (!seen.insert({r.prompt_id, r.teacher_id, r.candidate_index}).second) {
            throw ValidationError(context(path, lineno) + ": duplicate candidate key (" +
                                  r.prompt_id + ", " + r.teacher_id + ", " +
                                  std::to_string(r.candidate_index) + ")");
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) {
    std::vector<ScoreRecord> out;
    for_each_line(path, [&](std::size_t lineno, const json& obj) {
        ScoreRecord r;
        r.prompt_id = require_string(obj, "prompt_id", path, lineno);
        r.teacher_id = require_string(obj, "teacher_id", path, lineno);
        r.candidate_index = static_cast<int>(require_int(obj, "candidate_index", path, lineno));
        r.scorer_id = require_string(obj, "scorer_id", path, lineno);
        r.token_count = require_int(obj, "token_count", path, lineno);
        const auto num = [&](const char* key) {
            const auto it = obj.find(key);
            if (it == obj.end() || !it->is_number()) {
                throw ValidationError(context(path, lineno) + ": missing or non-numeric \"" +
                                      std::string(key) + "\"");
            }
            return it->get<double>();
        };
        r.global_lp = num("global_lp");
        const auto it = obj.find("step_lps");
        if (it == obj.end() || !it->is_array()) {
            throw ValidationError(context(path, lineno) + ": missing \"step_lps\" array");
        }
        for (const auto& v : *it) {
            if (!v.is_number()) {
                throw ValidationError(context(path, lineno) + ": non-numeric step_lps entry");
            }
            r.step_lps.push_back(v.get<double>());
        }
        r.local_lp = num("local_lp");
        const auto wp = obj.find("window_policy");
        if (wp == obj.end() || !wp->is_object()) {
            throw ValidationError(context(path, lineno) + ": missing \"window_policy\"");
        }
        r.window_policy = window_policy_from_json(*wp, path, lineno);
        try {
            r.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(context(path, lineno) + ": " + e.what());
        }
        out.push_back(std::move(r));
    });
    return out;
}

void append_json_string(std::string& out, std::string_view s) {
    out += json(s).dump();
}

void append_json_double(std::string& out, double v) {
    out += util::format_double(v);
}

namespace {

void append_window_policy(std::string& out, const WindowPolicy& p) {
    out += "{\"kind\":";
    switch (p.kind) {
    case WindowPolicy::Kind::fixed:
        out += "\"fixed\",\"k\":" + std::to_string(p.k);
        break;
    case WindowPolicy::Kind::fraction:
        out += "\"fraction\",\"fraction\":";
        append_json_double(out, p.fraction);
        break;
    case WindowPolicy::Kind::full:
        out += "\"full\"";
        break;
    }
    out.push_back('}');
}

} // namespace

std::string to_line(const PromptRecord& r) {
    std::string out = "{\"prompt_id\":";
    append_json_string(out, r.prompt_id);
    out += ",\"text\":";
    append_json_string(out, r.text);
    if (r.ground_truth) {
        out += ",\"ground_truth\":";
        append_json_string(out, *r.ground_truth);
    }
    out.push_back('}');
    return out;
}

std::string to_line(const CandidateResponse& r) {
    std::string out = "{\"prompt_id\":";
    append_json_string(out, r.prompt_id);
    out += ",\"teacher_id\":";
    append_json_string(out, r.teacher_id);
    out += ",\"candidate_index\":" + std::to_string(r.candidate_index);
    out += ",\"text\":";
    append_json_string(out, r.text);
    if (!r.steps.empty()) {
        out += ",\"steps\":[";
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            if (i) out.push_back(',');
            append_json_string(out, r.steps[i].text);
        }
        out.push_back(']');
    }
    if (r.answer_correct) {
        out += ",\"answer_correct\":";
        out += *r.answer_correct ? "true" : "false";
    }
    out.push_back('}');
    return out;
}

std::string to_line(const ScoreRecord& r) {
    r.validate();
    std::string out = "{\"prompt_id\":";
    append_json_string(out, r.prompt_id);
    out += ",\"teacher_id\":";
    append_json_string(out, r.teacher_id);
    out += ",\"candidate_index\":" + std::to_string(r.candidate_index);
    out += ",\"scorer_id\":";
    append_json_string(out, r.scorer_id);
    out += ",\"token_count\":" + std::to_string(r.token_count);
    out += ",\"global_lp\":";
    append_json_double(out, r.global_lp);
    out += ",\"step_lps\":[";
    for (std::size_t i = 0; i < r.step_lps.size(); ++i) {
        if (i) out.push_back(',');
        append_json_double(out, r.step_lps[i]);
    }
    out += "],\"local_lp\":";
    append_json_double(out, r.local_lp);
    out += ",\"window_policy\":";
    append_window_policy(out, r.window_policy);
    out.push_back('}');
    return out;
}

template <class Record>
void write_jsonl(const std::vector<Record>& records, const std::filesystem::path& path) {
    util::write_file_atomic(path, to_jsonl(records));
}

template void write_jsonl<PromptRecord>(const std::vector<PromptRecord>&,
                                        const std::filesystem::path&);
template void write_jsonl<CandidateResponse>(const std::vector<CandidateResponse>&,
                                             const std::filesystem::path&);
template void write_jsonl<ScoreRecord>(const std::vector<ScoreRecord>&,
                                       const std::filesystem::path&);

} // namespace natsel::jsonl
