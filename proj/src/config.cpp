#include "gazeguide/config.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gazeguide {

namespace {

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size() || v < 0) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key " + key + " needs a non-negative integer, got '" + value + "'");
    }
}

void set_key(Config& c, const std::string& key, const std::string& value) {
    if (key == "llm.endpoint") c.llm.endpoint = value;
    else if (key == "llm.model") c.llm.model = value;
    else if (key == "llm.timeout_ms") c.llm.timeout_ms = parse_int(key, value);
    else if (key == "llm.retries") c.llm.retries = parse_int(key, value);
    else if (key == "llm.api_key_env") c.llm.api_key_env = value;
    else if (key == "judge.model") c.judge_model = value;
    else if (key == "service.token") c.service_token = value;
    else throw ValidationError("unknown config key '" + key + "'");
}

void flatten(const nlohmann::json& j, const std::string& prefix, Config& c) {
    for (const auto& [k, v] : j.items()) {
        auto key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object())
            flatten(v, key, c);
        else if (v.is_string())
            set_key(c, key, v.get<std::string>());
        else if (v.is_number_integer())
            set_key(c, key, std::to_string(v.get<long long>()));
        else
            throw ValidationError("config key " + key + " has an unsupported value");
    }
}

} // namespace

Config parse_config(std::string_view contents) {
    Config c;
    auto trimmed = text::trim(contents);
    if (!trimmed.empty() && trimmed.front() == '{') {
        try {
            flatten(nlohmann::json::parse(trimmed), "", c);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("config JSON: ") + e.what());
        }
        return c;
    }
    std::istringstream in{std::string(contents)};
    std::string line;
    while (std::getline(in, line)) {
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ValidationError("config line without '=': " + t);
        set_key(c, text::trim(t.substr(0, eq)), text::trim(t.substr(eq + 1)));
    }
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_env_overrides(Config& config) {
    const std::pair<const char*, const char*> vars[] = {
        {"GAZEGUIDE_LLM_ENDPOINT", "llm.endpoint"},   {"GAZEGUIDE_LLM_MODEL", "llm.model"},
        {"GAZEGUIDE_LLM_TIMEOUT_MS", "llm.timeout_ms"}, {"GAZEGUIDE_LLM_RETRIES", "llm.retries"},
        {"GAZEGUIDE_LLM_API_KEY_ENV", "llm.api_key_env"}, {"GAZEGUIDE_JUDGE_MODEL", "judge.model"},
        {"GAZEGUIDE_SERVICE_TOKEN", "service.token"},
    };
    for (const auto& [env, key] : vars)
        if (const char* v = std::getenv(env); v && *v) set_key(config, key, v);
}

} // namespace gazeguide
