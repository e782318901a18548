#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace gazeguide {

struct LlmConfig {
    /// OpenAI-style chat completions URL, e.g. http://localhost:8000/v1/chat/completions
    std::string endpoint;
    std::string model;
    int timeout_ms = 30000;
    int retries = 2;
    std::string api_key_env = "OPENAI_API_KEY";
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// One prompt, one free-text reply. May throw.
    virtual std::string complete(std::string_view prompt) = 0;
};

/// Calls `complete` up to retries + 1 times; empty replies and exceptions
/// count as failed attempts. Throws BackendUnavailable.
std::string complete_with_retries(LlmClient& client, std::string_view prompt, int retries);

/// Test double: replies come from a function of (prompt, call index).
class ScriptedLlmClient : public LlmClient {
public:
    using Responder = std::function<std::string(std::string_view prompt, std::size_t call)>;

    explicit ScriptedLlmClient(Responder responder) : responder_(std::move(responder)) {}
    /// Replies in order; the last one repeats.
    explicit ScriptedLlmClient(std::vector<std::string> replies);

    std::string complete(std::string_view prompt) override;

    std::vector<std::string> prompts() const;
    std::size_t calls() const;

private:
    Responder responder_;
    mutable std::mutex mu_;
    std::vector<std::string> prompts_;
};

class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(LlmConfig config);
    std::string complete(std::string_view prompt) override;

private:
    LlmConfig config_;
    std::string base_;
    std::string path_;
};

} // namespace gazeguide
