#include "config.hpp"

#include <natsel/errors.hpp>
#include <natsel/util.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>

namespace natsel::cli {

using nlohmann::json;

namespace {

struct Field {
    const char* key;
    void (*set_from_json)(RunConfig&, const json&);
    void (*set_from_text)(RunConfig&, const std::string&);
};

void expect(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

std::uint64_t parse_u64(const std::string& text, const char* key) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(text, &used);
        expect(used == text.size(), "");
        return v;
    } catch (...) {
        throw ValidationError(std::string("config: invalid integer for \"") + key + "\": " + text);
    }
}

int parse_int(const std::string& text, const char* key) {
    try {
        std::size_t used = 0;
        const auto v = std::stoi(text, &used);
        expect(used == text.size(), "");
        return v;
    } catch (...) {
        throw ValidationError(std::string("config: invalid integer for \"") + key + "\": " + text);
    }
}

bool parse_bool(const std::string& text, const char* key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ValidationError(std::string("config: invalid boolean for \"") + key + "\": " + text);
}

#define STRING_FIELD(name)                                                                 \
    Field{#name,                                                                           \
          [](RunConfig& c, const json& v) {                                                \
              expect(v.is_string(), "config: \"" #name "\" must be a string");             \
              c.name = v.get<std::string>();                                               \
          },                                                                               \
          [](RunConfig& c, const std::string& v) { c.name = v; }}

const Field kFields[] = {
    STRING_FIELD(prompts),
    STRING_FIELD(candidates),
    STRING_FIELD(scores),
    STRING_FIELD(selection),
    STRING_FIELD(scorer),
    STRING_FIELD(in),
    STRING_FIELD(out),
    STRING_FIELD(sft_out),
    STRING_FIELD(cache_dir),
    STRING_FIELD(window),
    STRING_FIELD(strategy),
    STRING_FIELD(separator),
    STRING_FIELD(fractions),
    STRING_FIELD(log_level),
    Field{"parallelism",
          [](RunConfig& c, const json& v) {
              expect(v.is_number_integer(), "config: \"parallelism\" must be an integer");
              c.parallelism = v.get<int>();
          },
          [](RunConfig& c, const std::string& v) { c.parallelism = parse_int(v, "parallelism"); }},
    Field{"subset",
          [](RunConfig& c, const json& v) {
              expect(v.is_number_integer(), "config: \"subset\" must be an integer");
              c.subset = v.get<int>();
          },
          [](RunConfig& c, const std::string& v) { c.subset = parse_int(v, "subset"); }},
    Field{"seed",
          [](RunConfig& c, const json& v) {
              expect(v.is_number_unsigned() || v.is_number_integer(),
                     "config: \"seed\" must be an integer");
              c.seed = v.get<std::uint64_t>();
          },
          [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v, "seed"); }},
    Field{"include_prompt",
          [](RunConfig& c, const json& v) {
              expect(v.is_boolean(), "config: \"include_prompt\" must be a boolean");
              c.include_prompt = v.get<bool>();
          },
          [](RunConfig& c, const std::string& v) {
              c.include_prompt = parse_bool(v, "include_prompt");
          }},
};

#undef STRING_FIELD

} // namespace

void apply_config_file(RunConfig& config, const std::filesystem::path& path,
                       const std::vector<std::string>& cli_set_keys) {
    json doc = json::parse(util::read_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ValidationError("config file " + path.string() + ": malformed JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        const auto field = std::find_if(std::begin(kFields), std::end(kFields),
                                        [&](const Field& f) { return key == f.key; });
        if (field == std::end(kFields)) {
            throw ValidationError("config file " + path.string() + ": unknown key \"" + key +
                                  "\"");
        }
        // Flags beat the file.
        if (std::find(cli_set_keys.begin(), cli_set_keys.end(), key) != cli_set_keys.end()) {
            continue;
        }
        field->set_from_json(config, value);
    }
}

void apply_env_overrides(RunConfig& config) {
    for (const auto& field : kFields) {
        std::string env_name = "NATSEL_";
        for (const char* p = field.key; *p; ++p) {
            env_name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(*p))));
        }
        if (const char* value = std::getenv(env_name.c_str())) {
            field.set_from_text(config, value);
        }
    }
}

std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> out;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const auto comma = text.find(',', begin);
        const auto end = comma == std::string::npos ? text.size() : comma;
        const std::string part(util::trim(text.substr(begin, end - begin)));
        if (!part.empty()) {
            char* stop = nullptr;
            const double f = std::strtod(part.c_str(), &stop);
            if (stop != part.c_str() + part.size()) {
                throw ValidationError("invalid fraction \"" + part + "\"");
            }
            out.push_back(f);
        }
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }
    if (out.empty()) throw ValidationError("no fractions given");
    return out;
}

} // namespace natsel::cli
