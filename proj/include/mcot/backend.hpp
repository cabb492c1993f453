#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcot/errors.hpp"

namespace mcot {

enum class BackendRole { solver, annotator, verifier };

const char* to_string(BackendRole role);
BackendRole backend_role_from_string(std::string_view text);

struct CompletionRequest {
    std::string prompt;
    int max_new_tokens = 512;
    double temperature = 0.0;
    std::vector<std::string> stop_sequences;
    // Selects the sampled variant; sample_n offsets it per sample.
    std::uint64_t seed = 0;
};

enum class TokenSource { backend, fallback };

const char* to_string(TokenSource source);

struct CompletionResponse {
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    double latency = 0.0;  // seconds
    TokenSource token_source = TokenSource::fallback;
};

class Backend {
public:
    virtual ~Backend() = default;

    /// Returns text truncated before the first stop sequence. Throws BackendError.
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;

    /// Checks the backend can serve requests; throws ConfigError if not.
    virtual void probe() {}

    virtual std::string describe() const = 0;
};

/// Binds each role to exactly one backend.
class BackendSet {
public:
    void bind(BackendRole role, std::shared_ptr<Backend> backend);
    bool has(BackendRole role) const { return backends_.count(role) != 0; }
    Backend& get(BackendRole role) const;

private:
    std::map<BackendRole, std::shared_ptr<Backend>> backends_;
};

CompletionResponse complete(const BackendSet& backends, const CompletionRequest& request, BackendRole role);

struct SampleResult {
    std::optional<CompletionResponse> response;
    std::optional<BackendError> error;

    bool ok() const { return response.has_value(); }
};

/// n completions; sample i uses seed request.seed + i. Per-sample failures are
/// reported in place, not thrown.
std::vector<SampleResult> sample_n(const BackendSet& backends, const CompletionRequest& request, BackendRole role,
                                   std::size_t n);

std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stops);

struct RetryPolicy {
    int max_retries = 3;
    double base_delay_s = 0.5;
    double max_delay_s = 8.0;

    double delay_for(int retry) const;  // retry is 0-based
};

/// Runs `attempt` until it succeeds or fails with a non-retryable error; at
/// most max_retries + 1 attempts, sleeping base * 2^k between them.
CompletionResponse call_with_retries(const RetryPolicy& policy, const std::function<CompletionResponse()>& attempt,
                                     const std::function<void(double)>& sleeper = {});

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace mcot
