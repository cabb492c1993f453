#pragma once

#include <atomic>
#include <string>

#include "mcot/backend.hpp"

namespace mcot {

struct HttpBackendConfig {
    // e.g. "http://localhost:8000/v1"; requests go to <base_url>/chat/completions.
    std::string base_url;
    std::string model;
    // Name of the environment variable holding the bearer token; empty for none.
    std::string api_key_env = "MCOT_API_KEY";
    double timeout_s = 120.0;
    RetryPolicy retry;
};

/// Client for chat-completions compatible servers.
///
/// Request:  {"model", "messages": [{"role": "user", "content": prompt}],
///            "max_tokens", "temperature", "stop", "seed"}
/// Response: choices[0].message.content (or choices[0].text),
///           usage.prompt_tokens / usage.completion_tokens when present.
///
/// Connection failures, timeouts, HTTP 429 and 5xx are retried; other HTTP
/// errors and malformed bodies are protocol errors.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    CompletionResponse complete(const CompletionRequest& request) override;
    void probe() override;
    std::string describe() const override;

    /// Number of HTTP attempts made so far (including retries).
    std::size_t attempts() const { return attempts_; }

private:
    CompletionResponse attempt(const CompletionRequest& request);

    HttpBackendConfig config_;
    std::string origin_;  // scheme://host:port
    std::string prefix_;  // path prefix, no trailing slash
    std::atomic<std::size_t> attempts_{0};
};

}  // namespace mcot
