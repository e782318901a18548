#pragma once

#include "gazeguide/llm.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace gazeguide {

struct Config {
    LlmConfig llm;
    /// Model name for the judge; falls back to llm.model when empty.
    std::string judge_model;
    /// Static bearer token for the service; empty disables the check.
    std::string service_token;
};

/// Accepts either a JSON object (nested {"llm":{"model":...}} or flat
/// {"llm.model":...}) or key=value lines with '#' comments.
/// Keys: llm.endpoint, llm.model, llm.timeout_ms, llm.retries, llm.api_key_env,
/// judge.model, service.token. Throws ValidationError on unknown keys.
Config parse_config(std::string_view contents);
Config load_config(const std::filesystem::path& path);

/// GAZEGUIDE_LLM_ENDPOINT, _MODEL, _TIMEOUT_MS, _RETRIES, _API_KEY_ENV,
/// GAZEGUIDE_JUDGE_MODEL, GAZEGUIDE_SERVICE_TOKEN.
void apply_env_overrides(Config& config);

} // namespace gazeguide
