#include "mcot/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <thread>

namespace mcot {

const char* to_string(BackendRole role) {
    switch (role) {
        case BackendRole::solver: return "solver";
        case BackendRole::annotator: return "annotator";
        case BackendRole::verifier: return "verifier";
    }
    return "solver";
}

BackendRole backend_role_from_string(std::string_view text) {
    if (text == "solver") return BackendRole::solver;
    if (text == "annotator") return BackendRole::annotator;
    if (text == "verifier") return BackendRole::verifier;
    throw ConfigError("unknown backend role '" + std::string(text) + "'");
}

const char* to_string(TokenSource source) { return source == TokenSource::backend ? "backend" : "fallback"; }

void BackendSet::bind(BackendRole role, std::shared_ptr<Backend> backend) {
    if (!backend) throw ConfigError(std::string("null backend for role ") + to_string(role));
    backends_[role] = std::move(backend);
}

Backend& BackendSet::get(BackendRole role) const {
    auto it = backends_.find(role);
    if (it == backends_.end()) throw ConfigError(std::string("no backend configured for role '") + to_string(role) + "'");
    return *it->second;
}

CompletionResponse complete(const BackendSet& backends, const CompletionRequest& request, BackendRole role) {
    if (request.max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    return backends.get(role).complete(request);
}

std::vector<SampleResult> sample_n(const BackendSet& backends, const CompletionRequest& request, BackendRole role,
                                   std::size_t n) {
    if (n < 1) throw ConfigError("sample_n needs n >= 1");
    Backend& backend = backends.get(role);
    std::vector<SampleResult> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CompletionRequest r = request;
        r.seed = request.seed + i;
        SampleResult s;
        try {
            s.response = backend.complete(r);
        } catch (const BackendError& e) {
            s.error = e;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stops) {
    std::size_t cut = text.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        cut = std::min(cut, text.find(stop));
    }
    return std::string(text.substr(0, cut));
}

double RetryPolicy::delay_for(int retry) const {
    double d = base_delay_s;
    for (int i = 0; i < retry; ++i) d *= 2.0;
    return std::min(d, max_delay_s);
}

CompletionResponse call_with_retries(const RetryPolicy& policy, const std::function<CompletionResponse()>& attempt,
                                     const std::function<void(double)>& sleeper) {
    for (int retry = 0;; ++retry) {
        try {
            return attempt();
        } catch (const BackendError& e) {
            if (!e.retryable() || retry >= policy.max_retries) throw;
            double delay = policy.delay_for(retry);
            if (sleeper) sleeper(delay);
            else std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
    }
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace mcot
