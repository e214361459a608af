#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace natsel::cli {

// Machine-readable provenance for one output file, written next to it as
// <output>.manifest.json. Holds the tool version, the subcommand, SHA-256 of
// every input and output, the scorer identity when one was used, and the
// effective config — enough to reproduce the output from the inputs.
// extra_outputs covers sidecar files produced by the same run.
void write_manifest(const std::filesystem::path& output,
                    const std::string& subcommand,
                    const std::vector<std::filesystem::path>& inputs,
                    const nlohmann::json& effective_config,
                    const std::string& scorer_id = "",
                    const std::vector<std::filesystem::path>& extra_outputs = {});

} // namespace natsel::cli
