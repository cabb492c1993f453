#pragma once

// Two inference strategies over one backend and executor.
//
// MCoT: each step sees only the current self-contained question. After the
// step's code runs, the model either restates the remaining problem
// ("Sub Question:"), which becomes the next state with all prior context
// dropped, or finishes ("Final Answer:").
//
// MSR: each step's prompt carries the original question and every earlier
// step with its observation; only "Final Answer:" ends the run.
//
// Every step is generated in two phases: up to </code>, then (after the code
// has really run and its output is spliced in) up to </solution>.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mcot/backend.hpp"
#include "mcot/chain.hpp"
#include "mcot/code_exec.hpp"
#include "mcot/tagformat.hpp"
#include "mcot/telemetry.hpp"

namespace mcot {

/// Prompt prefixes with a {question} placeholder. Loaded from config files
/// in the CLI; the defaults match templates/*.txt.
struct PromptTemplates {
    std::string mcot = "<question>\n{question}\n</question>\n";
    std::string msr = "<question>\n{question}\n</question>\n";
};

/// Single-pass substitution of {name} placeholders; unknown names are kept verbatim.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

enum class Strategy { mcot, msr };
enum class StopReason { final, max_steps, backend_error, parse_error };

const char* to_string(Strategy s);
Strategy strategy_from_string(std::string_view text);
const char* to_string(StopReason r);
StopReason stop_reason_from_string(std::string_view text);

struct ReasonerConfig {
    std::size_t max_steps = kDefaultMaxSteps;
    int max_new_tokens = 1024;
    double temperature = 0.0;
    std::uint64_t seed = 0;
    BackendRole role = BackendRole::solver;
    PromptTemplates templates;
    CostModelParams cache_model;  // only the KV dimensions are used here
};

struct RunRecord {
    Strategy strategy = Strategy::mcot;
    std::string question;
    std::variant<MarkovChain, Trajectory> path;
    std::vector<StepTelemetry> telemetry;
    std::optional<std::string> final_answer;
    StopReason stop_reason = StopReason::final;
    std::string error;       // message for backend/parse failures
    std::optional<BackendError::Kind> backend_error_kind;
    std::string raw_output;  // unparsable model text, kept verbatim
    std::string token_counting = "fallback";

    // Caller metadata carried through for comparison and reporting.
    std::string id;
    std::string dataset = "default";
    std::optional<std::string> gold;

    std::size_t step_count() const;
    const MarkovChain* chain() const { return std::get_if<MarkovChain>(&path); }
    const Trajectory* trajectory() const { return std::get_if<Trajectory>(&path); }
};

nlohmann::json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Prompt for the current state only. With a partial block holding an
/// observation, the prompt ends right after "</output>".
std::string build_prompt_mcot(const State& state, const std::optional<SolutionBlock>& partial,
                              const PromptTemplates& templates = {});

/// Prompt carrying the question plus every earlier step and its observation.
std::string build_prompt_msr(std::string_view question, const std::vector<DerivationStep>& history,
                             const std::optional<SolutionBlock>& partial, const PromptTemplates& templates = {});

/// Solution block equivalent of a finished step (no terminal).
SolutionBlock block_from_step(const DerivationStep& step);

class Reasoner {
public:
    Reasoner(const BackendSet& backends, Executor& executor, ReasonerConfig config);

    RunRecord solve_mcot(std::string_view question) const;
    RunRecord solve_msr(std::string_view question) const;
    RunRecord solve(Strategy strategy, std::string_view question) const;

    const ReasonerConfig& config() const { return config_; }

private:
    struct StepResult;

    StepResult run_step(const std::function<std::string(const std::optional<SolutionBlock>&)>& prompt_for,
                        std::size_t step_index) const;

    const BackendSet& backends_;
    Executor& executor_;
    ReasonerConfig config_;
};

}  // namespace mcot
