#include "mcot/code_exec.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mcot/errors.hpp"

namespace mcot {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

ExecutionResult harness_failure(std::string message, double wall_time) {
    return {ExecStatus::error, {}, "harness error: " + std::move(message), wall_time, true};
}

void apply_cap(ExecutionResult& r, std::size_t cap) {
    r.stdout_text = cap_output(std::move(r.stdout_text), cap);
    r.stderr_text = cap_output(std::move(r.stderr_text), cap);
}

}  // namespace

std::string cap_output(std::string text, std::size_t cap) {
    if (text.size() <= cap) return text;
    std::size_t cut = cap;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    const std::size_t dropped = text.size() - cut;
    text.resize(cut);
    text += "\n...[truncated " + std::to_string(dropped) + " bytes]";
    return text;
}

// ---------------------------------------------------------------------------
// ScriptedExecutor

ScriptedExecutor::ScriptedExecutor(std::vector<Entry> entries, std::size_t output_cap)
    : entries_(std::move(entries)), output_cap_(output_cap) {}

std::shared_ptr<ScriptedExecutor> ScriptedExecutor::from_jsonl_text(std::string_view text, std::size_t output_cap) {
    std::vector<Entry> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            Entry e;
            e.match = j.value("match", std::string{});
            e.result = execution_from_json(j);
            entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw ConfigError("executor script line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return std::make_shared<ScriptedExecutor>(std::move(entries), output_cap);
}

std::shared_ptr<ScriptedExecutor> ScriptedExecutor::from_file(const std::filesystem::path& path,
                                                              std::size_t output_cap) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open executor script " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_jsonl_text(buf.str(), output_cap);
}

ExecutionResult ScriptedExecutor::execute(std::string_view code) {
    if (trim(code).empty()) return {};
    {
        std::lock_guard lock(mutex_);
        log_.emplace_back(code);
    }
    const Entry* best = nullptr;
    for (const auto& e : entries_) {
        if (code.find(e.match) == std::string_view::npos) continue;
        if (!best || e.match.size() > best->match.size()) best = &e;
    }
    if (!best) return harness_failure("no scripted result for snippet", 0.0);
    ExecutionResult r = best->result;
    apply_cap(r, output_cap_);
    return r;
}

std::vector<std::string> ScriptedExecutor::executed() const {
    std::lock_guard lock(mutex_);
    return log_;
}

// ---------------------------------------------------------------------------
// RunnerPool

struct RunnerPool::Runner {
    pid_t pid = -1;
    int fd = -1;
    std::string buffer;
};

namespace {

void spawn_runner(const PoolConfig& config, int& fd_out, pid_t& pid_out) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
        throw Error(std::string("socketpair: ") + std::strerror(errno));

    std::vector<std::string> args;
    args.push_back(config.runner_path.string());
    args.insert(args.end(), config.runner_args.begin(), config.runner_args.end());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(sv[0]);
        ::close(sv[1]);
        throw Error(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(sv[1], STDIN_FILENO);
        ::dup2(sv[1], STDOUT_FILENO);
        ::execv(argv[0], argv.data());
        ::_exit(127);
    }
    ::close(sv[1]);
    fd_out = sv[0];
    pid_out = pid;
}

void reap(pid_t pid, double patience_s) {
    if (pid <= 0) return;
    const auto start = Clock::now();
    while (seconds_since(start) < patience_s) {
        if (::waitpid(pid, nullptr, WNOHANG) != 0) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
}

bool send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

}  // namespace

RunnerPool::RunnerPool(PoolConfig config) : config_(std::move(config)) {
    if (config_.pool_size < 1) throw ConfigError("pool_size must be >= 1");
    if (config_.timeout_s <= 0 || config_.timeout_s > 120) throw ConfigError("timeout_s must be in (0, 120]");
    if (::access(config_.runner_path.c_str(), X_OK) != 0)
        throw ConfigError("runner not executable: " + config_.runner_path.string());
    for (std::size_t i = 0; i < config_.pool_size; ++i) {
        auto r = std::make_unique<Runner>();
        spawn_runner(config_, r->fd, r->pid);
        runners_.push_back(std::move(r));
        idle_.push_back(i);
    }
}

RunnerPool::~RunnerPool() {
    for (auto& r : runners_) {
        if (r->fd >= 0) ::close(r->fd);  // EOF asks the runner to exit cleanly
        reap(r->pid, 1.0);
    }
}

std::size_t RunnerPool::respawn_count() const {
    std::lock_guard lock(mutex_);
    return respawns_;
}

std::size_t RunnerPool::acquire() {
    std::unique_lock lock(mutex_);
    if (waiting_.size() >= config_.max_queue) throw BackpressureError("executor queue is full");
    const std::uint64_t ticket = next_ticket_++;
    waiting_.push_back(ticket);
    const bool ready = cv_.wait_for(lock, std::chrono::duration<double>(config_.queue_timeout_s),
                                    [&] { return waiting_.front() == ticket && !idle_.empty(); });
    if (!ready) {
        std::erase(waiting_, ticket);
        cv_.notify_all();
        throw BackpressureError("timed out waiting for a free runner");
    }
    waiting_.pop_front();
    const std::size_t slot = idle_.back();
    idle_.pop_back();
    cv_.notify_all();
    return slot;
}

void RunnerPool::release(std::size_t slot) {
    {
        std::lock_guard lock(mutex_);
        idle_.push_back(slot);
    }
    cv_.notify_all();
}

void RunnerPool::respawn(Runner& runner) {
    if (runner.fd >= 0) ::close(runner.fd);
    if (runner.pid > 0) {
        ::kill(runner.pid, SIGKILL);
        ::waitpid(runner.pid, nullptr, 0);
    }
    runner.fd = -1;
    runner.pid = -1;
    runner.buffer.clear();
    spawn_runner(config_, runner.fd, runner.pid);
    std::lock_guard lock(mutex_);
    ++respawns_;
}

ExecutionResult RunnerPool::execute(std::string_view code) {
    if (trim(code).empty()) return {};
    const std::size_t slot = acquire();
    struct Release {
        RunnerPool* pool;
        std::size_t slot;
        ~Release() { pool->release(slot); }
    } guard{this, slot};
    return run_on(*runners_[slot], code);
}

ExecutionResult RunnerPool::run_on(Runner& runner, std::string_view code) {
    const auto start = Clock::now();
    const json request = {{"code", code}, {"timeout_s", config_.timeout_s}, {"allow_network", false}};
    const std::string line = request.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";

    if (!send_all(runner.fd, line)) {
        respawn(runner);
        return harness_failure("runner closed its input", seconds_since(start));
    }

    const double deadline_s = config_.timeout_s + config_.kill_grace_s;
    std::size_t newline;
    while ((newline = runner.buffer.find('\n')) == std::string::npos) {
        const double left = deadline_s - seconds_since(start);
        if (left <= 0) {
            respawn(runner);
            ExecutionResult r{ExecStatus::timeout, {}, "runner unresponsive past the time limit; killed",
                              seconds_since(start), true};
            return r;
        }
        pollfd pfd{runner.fd, POLLIN, 0};
        int ready = ::poll(&pfd, 1, static_cast<int>(left * 1000) + 1);
        if (ready < 0 && errno == EINTR) continue;
        if (ready <= 0) continue;
        char chunk[65536];
        ssize_t n = ::read(runner.fd, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            int status = 0;
            ::waitpid(runner.pid, &status, 0);
            runner.pid = -1;
            respawn(runner);
            std::string why = WIFEXITED(status) ? "exit code " + std::to_string(WEXITSTATUS(status))
                                                : "signal " + std::to_string(WTERMSIG(status));
            return harness_failure("runner exited unexpectedly (" + why + ")", seconds_since(start));
        }
        runner.buffer.append(chunk, static_cast<std::size_t>(n));
    }

    std::string reply = runner.buffer.substr(0, newline);
    runner.buffer.erase(0, newline + 1);

    ExecutionResult result;
    try {
        result = execution_from_json(json::parse(reply));
    } catch (const std::exception& e) {
        respawn(runner);
        return harness_failure(std::string("malformed runner reply: ") + e.what(), seconds_since(start));
    }
    if (result.status == ExecStatus::timeout) result.wall_time = std::max(result.wall_time, config_.timeout_s);
    if (result.status == ExecStatus::ok && result.stderr_text.find("Traceback (most recent call last)") != std::string::npos)
        result.status = ExecStatus::error;
    apply_cap(result, config_.output_cap_bytes);
    return result;
}

}  // namespace mcot
