#include "manifest.hpp"

#include <natsel/hash.hpp>
#include <natsel/util.hpp>
#include <natsel/version.hpp>

namespace natsel::cli {

void write_manifest(const std::filesystem::path& output, const std::string& subcommand,
                    const std::vector<std::filesystem::path>& inputs,
                    const nlohmann::json& effective_config, const std::string& scorer_id,
                    const std::vector<std::filesystem::path>& extra_outputs) {
    nlohmann::json doc;
    doc["tool"] = "natsel " NATSEL_VERSION_STRING;
    doc["subcommand"] = subcommand;
    nlohmann::json in = nlohmann::json::object();
    for (const auto& path : inputs) {
        in[path.string()] = "sha256:" + hash::sha256_file_hex(path);
    }
    doc["inputs"] = std::move(in);
    if (!scorer_id.empty()) doc["scorer_id"] = scorer_id;
    doc["config"] = effective_config;
    nlohmann::json out = nlohmann::json::object();
    out[output.string()] = "sha256:" + hash::sha256_file_hex(output);
    for (const auto& path : extra_outputs) {
        out[path.string()] = "sha256:" + hash::sha256_file_hex(path);
    }
    doc["outputs"] = std::move(out);

    util::write_file_atomic(output.string() + ".manifest.json", doc.dump(2) + "\n");
}

} // namespace natsel::cli
