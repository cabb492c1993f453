#include "mcot/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "mcot/tokenizer.hpp"

namespace mcot {

using nlohmann::json;

namespace {

std::unique_ptr<httplib::Client> make_client(const std::string& origin, double timeout_s) {
    auto client = std::make_unique<httplib::Client>(origin);
    auto secs = static_cast<time_t>(timeout_s);
    auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client->set_connection_timeout(secs, usecs);
    client->set_read_timeout(secs, usecs);
    client->set_write_timeout(secs, usecs);
    return client;
}

BackendError transport_error(httplib::Error err) {
    auto kind = err == httplib::Error::ConnectionTimeout ? BackendError::Kind::timeout : BackendError::Kind::transport;
    return BackendError(kind, "http: " + httplib::to_string(err));
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, kUrl)) throw ConfigError("invalid base_url '" + config_.base_url + "'");
    origin_ = m[1].str();
    prefix_ = m[2].matched ? m[2].str() : std::string{};
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin_.rfind("https://", 0) == 0) throw ConfigError("built without TLS support; use an http:// base_url");
#endif
    if (config_.timeout_s <= 0) throw ConfigError("timeout_s must be positive");
}

std::string HttpBackend::describe() const { return "http(" + config_.base_url + ", model=" + config_.model + ")"; }

void HttpBackend::probe() {
    auto client = make_client(origin_, std::min(config_.timeout_s, 10.0));
    auto res = client->Get(prefix_ + "/models");
    if (!res) throw ConfigError("backend unreachable at " + config_.base_url + ": " + httplib::to_string(res.error()));
}

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    return call_with_retries(config_.retry, [&] { return attempt(request); });
}

CompletionResponse HttpBackend::attempt(const CompletionRequest& request) {
    ++attempts_;
    json body = {
        {"model", config_.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"max_tokens", request.max_new_tokens},
        {"temperature", request.temperature},
        {"seed", request.seed},
    };
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto client = make_client(origin_, config_.timeout_s);
    const auto started = std::chrono::steady_clock::now();
    auto res = client->Post(prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    const double latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (!res) throw transport_error(res.error());
    if (res->status == 429 || res->status >= 500)
        throw BackendError(BackendError::Kind::transport, "http status " + std::to_string(res->status));
    if (res->status != 200)
        throw BackendError(BackendError::Kind::protocol,
                           "http status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
        throw BackendError(BackendError::Kind::protocol, "malformed completion body");
    const json& choice = reply["choices"][0];
    std::string text;
    if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string())
        text = choice["message"]["content"].get<std::string>();
    else if (choice.contains("text") && choice["text"].is_string())
        text = choice["text"].get<std::string>();
    else
        throw BackendError(BackendError::Kind::protocol, "completion has no text");

    CompletionResponse r;
    r.text = truncate_at_stop(text, request.stop_sequences);
    r.latency = latency;
    const json* usage = reply.contains("usage") && reply["usage"].is_object() ? &reply["usage"] : nullptr;
    if (usage && (*usage).contains("prompt_tokens") && (*usage).contains("completion_tokens") &&
        (*usage)["prompt_tokens"].is_number_unsigned() && (*usage)["completion_tokens"].is_number_unsigned()) {
        r.prompt_tokens = (*usage)["prompt_tokens"].get<std::size_t>();
        r.completion_tokens = (*usage)["completion_tokens"].get<std::size_t>();
        r.token_source = TokenSource::backend;
    } else {
        r.prompt_tokens = count_tokens(request.prompt);
        r.completion_tokens = count_tokens(r.text);
        r.token_source = TokenSource::fallback;
    }
    return r;
}

}  // namespace mcot
