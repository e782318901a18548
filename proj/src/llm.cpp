#include "gazeguide/llm.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "httplib.h"
#include "json.hpp"

#include <cstdlib>

namespace gazeguide {

std::string complete_with_retries(LlmClient& client, std::string_view prompt, int retries) {
    const int attempts = std::max(0, retries) + 1;
    std::string last_error = "empty reply";
    for (int i = 0; i < attempts; ++i) {
        try {
            auto reply = client.complete(prompt);
            if (!text::trim(reply).empty()) return reply;
            last_error = "empty reply";
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendUnavailable("LLM backend failed: " + last_error, attempts);
}

ScriptedLlmClient::ScriptedLlmClient(std::vector<std::string> replies)
    : responder_([replies = std::move(replies)](std::string_view, std::size_t call) {
          if (replies.empty()) return std::string{};
          return replies[std::min(call, replies.size() - 1)];
      }) {}

std::string ScriptedLlmClient::complete(std::string_view prompt) {
    std::size_t call;
    {
        std::lock_guard lock(mu_);
        call = prompts_.size();
        prompts_.emplace_back(prompt);
    }
    return responder_(prompt, call);
}

std::vector<std::string> ScriptedLlmClient::prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
}

std::size_t ScriptedLlmClient::calls() const {
    std::lock_guard lock(mu_);
    return prompts_.size();
}

HttpLlmClient::HttpLlmClient(LlmConfig config) : config_(std::move(config)) {
    const auto& url = config_.endpoint;
    auto scheme_end = url.find("://");
    if (url.empty() || scheme_end == std::string::npos)
        throw ValidationError("llm.endpoint must be an http(s) URL, got '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    base_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url.rfind("https://", 0) == 0)
        throw ValidationError("https endpoints need a build with GAZEGUIDE_HTTPS=ON");
#endif
}

std::string HttpLlmClient::complete(std::string_view prompt) {
    httplib::Client cli(base_);
    auto secs = config_.timeout_ms / 1000;
    auto usecs = (config_.timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    nlohmann::json body = {{"model", config_.model},
                           {"messages", {{{"role", "user"}, {"content", std::string(prompt)}}}}};
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw BackendError("LLM request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendError("LLM endpoint returned HTTP " + std::to_string(res->status));
    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected LLM response: ") + e.what());
    }
}

} // namespace gazeguide
