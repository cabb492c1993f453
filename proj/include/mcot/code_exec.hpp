#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mcot/chain.hpp"

namespace mcot {

inline constexpr std::size_t kDefaultOutputCap = 64 * 1024;

struct ExecLimits {
    double timeout_s = 10.0;
    std::size_t output_cap_bytes = kDefaultOutputCap;
};

/// Keeps the first `cap` bytes and appends "\n...[truncated N bytes]".
std::string cap_output(std::string text, std::size_t cap);

class Executor {
public:
    virtual ~Executor() = default;

    /// Empty code is a no-op returning ok with empty output.
    virtual ExecutionResult execute(std::string_view code) = 0;
};

/// Replays canned results. Script (JSONL):
///   {"match": "<code substring>", "status": "ok|error|timeout", "stdout": "...", "stderr": "...", "wall_time_s": 0}
/// Longest matching substring wins; an empty match is the fallback. Unmatched
/// code yields a harness failure.
class ScriptedExecutor : public Executor {
public:
    struct Entry {
        std::string match;
        ExecutionResult result;
    };

    explicit ScriptedExecutor(std::vector<Entry> entries, std::size_t output_cap = kDefaultOutputCap);

    static std::shared_ptr<ScriptedExecutor> from_jsonl_text(std::string_view text,
                                                             std::size_t output_cap = kDefaultOutputCap);
    static std::shared_ptr<ScriptedExecutor> from_file(const std::filesystem::path& path,
                                                       std::size_t output_cap = kDefaultOutputCap);

    ExecutionResult execute(std::string_view code) override;

    std::vector<std::string> executed() const;

private:
    std::vector<Entry> entries_;
    std::size_t output_cap_;
    mutable std::mutex mutex_;
    std::vector<std::string> log_;
};

struct PoolConfig {
    std::filesystem::path runner_path;
    std::vector<std::string> runner_args;
    std::size_t pool_size = 2;
    double timeout_s = 10.0;
    std::size_t output_cap_bytes = kDefaultOutputCap;
    // Slack on top of timeout_s before the pool kills an unresponsive runner.
    double kill_grace_s = 2.0;
    // Requests beyond this many waiters are rejected with BackpressureError.
    std::size_t max_queue = 256;
    // Longest a request may wait for a free runner.
    double queue_timeout_s = 300.0;
};

/// Pool of sandbox runner processes speaking line-delimited JSON on stdio:
///   request  {"code", "timeout_s", "allow_network"}
///   result   {"status", "stdout", "stderr", "wall_time_s"}
/// One request in flight per runner; waiters are served FIFO. A runner that
/// crashes, hangs past timeout + grace or answers garbage is replaced.
class RunnerPool : public Executor {
public:
    explicit RunnerPool(PoolConfig config);
    ~RunnerPool() override;

    RunnerPool(const RunnerPool&) = delete;
    RunnerPool& operator=(const RunnerPool&) = delete;

    ExecutionResult execute(std::string_view code) override;

    std::size_t respawn_count() const;

private:
    struct Runner;

    std::size_t acquire();
    void release(std::size_t slot);
    ExecutionResult run_on(Runner& runner, std::string_view code);
    void respawn(Runner& runner);

    PoolConfig config_;
    std::vector<std::unique_ptr<Runner>> runners_;
    std::vector<std::size_t> idle_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::uint64_t> waiting_;
    std::uint64_t next_ticket_ = 0;
    std::size_t respawns_ = 0;
};

}  // namespace mcot
