#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace natsel::cli {

// Effective settings for one invocation. Layering, lowest to highest
// precedence: built-in defaults, config file (--config), command-line flags,
// NATSEL_* environment variables.
struct RunConfig {
    std::string prompts;
    std::string candidates;
    std::string scores;
    std::string selection;
    std::string scorer;
    std::string in;
    std::string out;
    std::string sft_out;
    std::string cache_dir = "natsel-cache";
    std::string window = "fixed:4";
    std::string strategy;
    std::string separator = "\n";
    std::string fractions = "0.05,0.25,0.5,0.75";
    std::string log_level = "info";
    int parallelism = 1;
    int subset = 0; // 0 = use every prompt
    std::optional<std::uint64_t> seed;
    bool include_prompt = true;

    bool verbose() const { return log_level == "info" || log_level == "debug"; }
};

// Applies the JSON config file to fields the command line did not set.
// Unknown keys are rejected.
void apply_config_file(RunConfig& config, const std::filesystem::path& path,
                       const std::vector<std::string>& cli_set_keys);

// Applies NATSEL_<KEY> environment overrides on top of everything.
void apply_env_overrides(RunConfig& config);

std::vector<double> parse_fractions(const std::string& text);

} // namespace natsel::cli
