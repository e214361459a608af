#pragma once

#include "natsel/record.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace natsel::jsonl {

// Loaders keep file order and fail with the offending line number.
// load_prompts rejects duplicate prompt_id and empty (post-trim) text.
std::vector<PromptRecord> load_prompts(const std::filesystem::path& path);

// load_candidates rejects duplicate (prompt_id, teacher_id, candidate_index)
// and negative candidate_index. "steps" and "answer_correct" are optional so
// segmented/filtered files load back.
std::vector<CandidateResponse> load_candidates(const std::filesystem::path& path);

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);

// One JSON object per line, keys in the documented fixed order, doubles with
// 17 significant digits. NaN/Inf throw.
std::string to_line(const PromptRecord& r);
std::string to_line(const CandidateResponse& r);
std::string to_line(const ScoreRecord& r);

template <class Record>
std::string to_jsonl(const std::vector<Record>& records) {
    std::string out;
    for (const auto& r : records) {
        out += to_line(r);
        out.push_back('\n');
    }
    return out;
}

// Atomic write (temp file + rename).
template <class Record>
void write_jsonl(const std::vector<Record>& records, const std::filesystem::path& path);

// Building blocks shared with the curation serializers.
void append_json_string(std::string& out, std::string_view s);
void append_json_double(std::string& out, double v);

} // namespace natsel::jsonl
