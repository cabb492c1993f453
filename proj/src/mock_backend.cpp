#include "mcot/mock_backend.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mcot/tokenizer.hpp"

namespace mcot {

using nlohmann::json;

namespace {

BackendError::Kind error_kind_from_string(const std::string& s) {
    if (s == "transport") return BackendError::Kind::transport;
    if (s == "protocol") return BackendError::Kind::protocol;
    if (s == "timeout") return BackendError::Kind::timeout;
    throw ConfigError("mock script: unknown error kind '" + s + "'");
}

MockVariant variant_from_json(const json& j) {
    MockVariant v;
    if (j.contains("error")) v.error = error_kind_from_string(j.at("error").get<std::string>());
    else if (!j.contains("reply")) throw ConfigError("mock script entry needs 'reply', 'error' or 'variants'");
    v.reply = j.value("reply", std::string{});
    if (j.contains("tokens")) v.tokens = j.at("tokens").get<std::size_t>();
    v.latency = j.value("latency", 0.0);
    return v;
}

}  // namespace

MockBackend::MockBackend(std::vector<MockEntry> entries) : entries_(std::move(entries)) {
    for (const auto& e : entries_)
        if (e.variants.empty()) throw ConfigError("mock script entry '" + e.match + "' has no reply");
}

std::shared_ptr<MockBackend> MockBackend::from_jsonl_text(std::string_view text) {
    std::vector<MockEntry> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            MockEntry e;
            if (j.contains("match_hash")) {
                e.by_hash = true;
                e.match = j.at("match_hash").get<std::string>();
            } else {
                e.match = j.value("match", std::string{});
            }
            if (j.contains("variants")) {
                for (const auto& v : j.at("variants")) e.variants.push_back(variant_from_json(v));
            } else {
                e.variants.push_back(variant_from_json(j));
            }
            entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw ConfigError("mock script line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return std::make_shared<MockBackend>(std::move(entries));
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock script " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_jsonl_text(buf.str());
}

const MockEntry* MockBackend::select(const std::string& prompt) const {
    const MockEntry* best = nullptr;
    std::size_t best_end = 0;
    std::size_t best_len = 0;
    const std::string prompt_hash = hex64(fnv1a64(prompt));
    for (const auto& e : entries_) {
        std::size_t end = 0;
        if (e.by_hash) {
            if (e.match != prompt_hash) continue;
            end = prompt.size();
        } else if (e.match.empty()) {
            end = 0;  // catch-all: loses to any real match
        } else {
            auto p = prompt.rfind(e.match);
            if (p == std::string::npos) continue;
            end = p + e.match.size();
        }
        if (!best || end > best_end || (end == best_end && e.match.size() > best_len)) {
            best = &e;
            best_end = end;
            best_len = e.match.size();
        }
    }
    return best;
}

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request.prompt);
    }
    const MockEntry* entry = select(request.prompt);
    if (!entry) throw BackendError(BackendError::Kind::protocol, "mock: no script entry matches the prompt");

    const MockVariant& v = entry->variants[request.seed % entry->variants.size()];
    if (v.error) throw BackendError(*v.error, std::string("mock: scripted ") + to_string(*v.error) + " failure");

    CompletionResponse r;
    r.text = truncate_at_stop(v.reply, request.stop_sequences);
    r.prompt_tokens = count_tokens(request.prompt);
    r.completion_tokens = v.tokens ? *v.tokens : count_tokens(r.text);
    r.token_source = v.tokens ? TokenSource::backend : TokenSource::fallback;
    r.latency = v.latency;
    return r;
}

std::string MockBackend::describe() const { return "mock(" + std::to_string(entries_.size()) + " entries)"; }

std::vector<std::string> MockBackend::prompts() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void MockBackend::clear_log() {
    std::lock_guard lock(mutex_);
    log_.clear();
}

}  // namespace mcot
