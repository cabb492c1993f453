#pragma once

// Core domain values for Markov chain-of-thought reasoning: states, steps,
// transitions, chains, trajectories and the single-step triplets a chain
// decomposes into.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mcot {

inline constexpr std::size_t kDefaultMaxSteps = 8;

enum class ExecStatus { ok, error, timeout };

const char* to_string(ExecStatus status);
ExecStatus exec_status_from_string(std::string_view text);

struct ExecutionResult {
    ExecStatus status = ExecStatus::ok;
    std::string stdout_text;
    std::string stderr_text;
    double wall_time = 0.0;  // seconds
    // Set when the failure came from the runner harness rather than the snippet.
    bool harness_failure = false;

    bool operator==(const ExecutionResult&) const = default;
};

/// Text spliced into the <output> block: stdout, followed by the final
/// stderr line (the exception summary) on error, or a timeout notice.
std::string observation_text(const ExecutionResult& result);

struct State {
    std::string question;
    std::size_t index = 1;

    bool operator==(const State&) const = default;
};

struct DerivationStep {
    std::string analysis;
    std::string code;
    std::optional<ExecutionResult> observation;
    // Prose written after the observation and before the terminal line.
    std::string remark;

    bool has_code() const { return !code.empty(); }
    std::string output() const { return observation ? observation_text(*observation) : std::string{}; }

    bool operator==(const DerivationStep&) const = default;
};

class Transition {
public:
    enum class Kind { reduce, final };

    static Transition reduce(std::string next_question) { return {Kind::reduce, std::move(next_question)}; }
    static Transition final_answer(std::string answer) { return {Kind::final, std::move(answer)}; }

    Kind kind() const { return kind_; }
    bool is_reduce() const { return kind_ == Kind::reduce; }
    bool is_final() const { return kind_ == Kind::final; }

    std::optional<std::string> next_question() const {
        return is_reduce() ? std::optional<std::string>(text_) : std::nullopt;
    }
    std::optional<std::string> answer() const {
        return is_final() ? std::optional<std::string>(text_) : std::nullopt;
    }
    /// Whichever of next_question / answer is present.
    const std::string& text() const { return text_; }

    bool operator==(const Transition&) const = default;

private:
    Transition(Kind kind, std::string text) : kind_(kind), text_(std::move(text)) {}

    Kind kind_;
    std::string text_;
};

const char* to_string(Transition::Kind kind);
Transition::Kind transition_kind_from_string(std::string_view text);

struct ChainEntry {
    State state;
    DerivationStep step;
    Transition transition;

    bool operator==(const ChainEntry&) const = default;
};

enum class ChainStatus { solved, exhausted, failed };

const char* to_string(ChainStatus status);
ChainStatus chain_status_from_string(std::string_view text);

struct MarkovChain {
    std::vector<ChainEntry> steps;
    ChainStatus status = ChainStatus::solved;

    std::size_t length() const { return steps.size(); }

    bool operator==(const MarkovChain&) const = default;
};

struct Trajectory {
    std::string question;
    std::vector<DerivationStep> steps;
    std::string answer;

    bool operator==(const Trajectory&) const = default;
};

struct Triplet {
    std::string question;
    DerivationStep step;
    Transition outcome;

    bool operator==(const Triplet&) const = default;
};

struct Violation {
    enum class Kind { empty, question, index, linkage, terminal, observation, length };

    std::size_t index;  // 1-based entry, 0 for whole-chain violations
    Kind kind;
    std::string reason;
};

const char* to_string(Violation::Kind kind);

/// Every broken MarkovChain invariant, one entry per violation. Total.
std::vector<Violation> validate_chain(const MarkovChain& chain, std::size_t max_steps = kDefaultMaxSteps);

/// Splits a valid chain into T independent triplets. Throws ChainError.
std::vector<Triplet> decompose_chain(const MarkovChain& chain, std::size_t max_steps = kDefaultMaxSteps);

/// Inverse of decompose_chain. Throws ChainError on empty input or broken linkage.
MarkovChain reassemble_chain(const std::vector<Triplet>& triplets);

// JSONL record schemas. Field names are part of the on-disk contract.
nlohmann::json step_to_json(const DerivationStep& step);
DerivationStep step_from_json(const nlohmann::json& j);

nlohmann::json execution_to_json(const ExecutionResult& result);
ExecutionResult execution_from_json(const nlohmann::json& j);

nlohmann::json trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json triplet_to_json(const Triplet& triplet);
Triplet triplet_from_json(const nlohmann::json& j);

nlohmann::json chain_to_json(const MarkovChain& chain);
MarkovChain chain_from_json(const nlohmann::json& j);

std::string trim(std::string_view text);

}  // namespace mcot
