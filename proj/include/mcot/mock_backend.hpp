#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mcot/backend.hpp"

namespace mcot {

struct MockVariant {
    std::string reply;
    std::optional<std::size_t> tokens;  // reported completion tokens; fallback count otherwise
    double latency = 0.0;
    std::optional<BackendError::Kind> error;  // scripted failure instead of a reply
};

struct MockEntry {
    std::string match;  // substring of the prompt, or a prompt hash when by_hash is set
    bool by_hash = false;
    std::vector<MockVariant> variants;
};

/// Deterministic scripted playback.
///
/// Script format (JSONL, one entry per line):
///   {"match": "<prompt substring>", "reply": "...", "tokens": 12, "latency": 0.0}
///   {"match_hash": "<fnv1a64 hex of the full prompt>", "reply": "..."}
///   {"match": "...", "variants": [{"reply": "..."}, {"error": "transport"}]}
///
/// When several entries match, the one whose last occurrence ends latest in
/// the prompt wins, then the longest match, then the earliest line. A hash
/// match counts as ending at the end of the prompt; an empty match is a
/// catch-all that loses to every other match. Variant index is
/// request.seed modulo the number of variants.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::vector<MockEntry> entries);

    static std::shared_ptr<MockBackend> from_jsonl_text(std::string_view text);
    static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string describe() const override;

    /// Every prompt received so far, in arrival order.
    std::vector<std::string> prompts() const;
    void clear_log();

private:
    const MockEntry* select(const std::string& prompt) const;

    std::vector<MockEntry> entries_;
    mutable std::mutex mutex_;
    std::vector<std::string> log_;
};

}  // namespace mcot
