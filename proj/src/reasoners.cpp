#include "mcot/reasoners.hpp"

#include "mcot/errors.hpp"

namespace mcot {

using nlohmann::json;

namespace {

const std::vector<std::string> kPhaseOneStops = {"</code>", "</solution>"};
const std::vector<std::string> kPhaseTwoStops = {"</solution>"};

DerivationStep step_from_block(const SolutionBlock& block, const std::optional<ExecutionResult>& exec) {
    DerivationStep step;
    step.analysis = block.analysis;
    step.code = block.code.value_or("");
    if (step.has_code()) step.observation = exec.value_or(ExecutionResult{});
    step.remark = block.remark;
    return step;
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

const char* to_string(Strategy s) { return s == Strategy::mcot ? "mcot" : "msr"; }

Strategy strategy_from_string(std::string_view text) {
    if (text == "mcot") return Strategy::mcot;
    if (text == "msr") return Strategy::msr;
    throw ConfigError("unknown strategy: " + std::string(text));
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::final: return "final";
        case StopReason::max_steps: return "max_steps";
        case StopReason::backend_error: return "backend_error";
        case StopReason::parse_error: return "parse_error";
    }
    return "?";
}

StopReason stop_reason_from_string(std::string_view text) {
    for (auto r : {StopReason::final, StopReason::max_steps, StopReason::backend_error, StopReason::parse_error})
        if (text == to_string(r)) return r;
    throw Error("unknown stop reason: " + std::string(text));
}

std::size_t RunRecord::step_count() const {
    if (auto* c = chain()) return c->length();
    return trajectory()->steps.size();
}

json run_record_to_json(const RunRecord& r) {
    json j;
    j["id"] = r.id;
    j["dataset"] = r.dataset;
    j["gold"] = r.gold ? json(*r.gold) : json(nullptr);
    j["strategy"] = to_string(r.strategy);
    j["question"] = r.question;
    if (auto* c = r.chain())
        j["chain"] = chain_to_json(*c);
    else
        j["trajectory"] = trajectory_to_json(*r.trajectory());
    j["telemetry"] = json::array();
    for (const auto& t : r.telemetry) j["telemetry"].push_back(telemetry_to_json(t));
    j["final_answer"] = r.final_answer ? json(*r.final_answer) : json(nullptr);
    j["stop_reason"] = to_string(r.stop_reason);
    if (!r.error.empty()) j["error"] = r.error;
    if (!r.raw_output.empty()) j["raw_output"] = r.raw_output;
    j["token_counting"] = r.token_counting;
    return j;
}

RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.id = j.value("id", std::string{});
    r.dataset = j.value("dataset", std::string("default"));
    if (j.contains("gold") && j["gold"].is_string()) r.gold = j["gold"].get<std::string>();
    r.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    r.question = j.at("question").get<std::string>();
    if (j.contains("chain"))
        r.path = chain_from_json(j["chain"]);
    else if (j.contains("trajectory"))
        r.path = trajectory_from_json(j["trajectory"]);
    else
        throw Error("run record has neither chain nor trajectory");
    for (const auto& t : j.value("telemetry", json::array())) r.telemetry.push_back(telemetry_from_json(t));
    if (j.contains("final_answer") && j["final_answer"].is_string()) r.final_answer = j["final_answer"].get<std::string>();
    r.stop_reason = stop_reason_from_string(j.value("stop_reason", std::string("final")));
    r.error = j.value("error", std::string{});
    r.raw_output = j.value("raw_output", std::string{});
    r.token_counting = j.value("token_counting", std::string("fallback"));
    return r;
}

SolutionBlock block_from_step(const DerivationStep& step) {
    SolutionBlock b;
    b.analysis = step.analysis;
    if (step.has_code()) {
        b.code = step.code;
        b.output = step.output();
    }
    b.remark = step.remark;
    return b;
}

std::string build_prompt_mcot(const State& state, const std::optional<SolutionBlock>& partial,
                              const PromptTemplates& templates) {
    return render_template(templates.mcot, {{"question", state.question}}) +
           render_open_block(partial.value_or(SolutionBlock{}));
}

std::string build_prompt_msr(std::string_view question, const std::vector<DerivationStep>& history,
                             const std::optional<SolutionBlock>& partial, const PromptTemplates& templates) {
    std::string out = render_template(templates.msr, {{"question", std::string(question)}});
    for (const auto& step : history) out.append(render_block(block_from_step(step))).append("\n");
    return out + render_open_block(partial.value_or(SolutionBlock{}));
}

// ---------------------------------------------------------------------------

struct Reasoner::StepResult {
    SolutionBlock block;
    DerivationStep step;
    StepTelemetry telemetry;
    std::vector<TokenSource> sources;
};

namespace {

// Thrown inside a step when the model text cannot be used; carries the text.
struct StepParseFailure : Error {
    StepParseFailure(const std::string& what, std::string raw) : Error(what), raw(std::move(raw)) {}
    std::string raw;
};

}  // namespace

Reasoner::Reasoner(const BackendSet& backends, Executor& executor, ReasonerConfig config)
    : backends_(backends), executor_(executor), config_(std::move(config)) {
    if (config_.max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (config_.max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

Reasoner::StepResult Reasoner::run_step(
    const std::function<std::string(const std::optional<SolutionBlock>&)>& prompt_for, std::size_t step_index) const {
    StepResult out;
    out.telemetry.step_index = step_index;

    CompletionRequest req;
    req.max_new_tokens = config_.max_new_tokens;
    req.temperature = config_.temperature;
    req.seed = config_.seed;
    req.prompt = prompt_for(std::nullopt);
    req.stop_sequences = kPhaseOneStops;
    const CompletionResponse r1 = complete(backends_, req, config_.role);
    out.sources.push_back(r1.token_source);
    out.telemetry.prompt_tokens = r1.prompt_tokens;
    out.telemetry.completion_tokens = r1.completion_tokens;
    out.telemetry.decode_time = r1.latency;
    out.telemetry.context_tokens = r1.prompt_tokens + r1.completion_tokens;

    if (r1.text.find("<code>") == std::string::npos) {
        try {
            out.block = parse_solution(r1.text);
        } catch (const ParseError& e) {
            throw StepParseFailure(e.what(), r1.text);
        }
        out.step = step_from_block(out.block, std::nullopt);
    } else {
        SolutionBlock partial;
        try {
            partial = parse_solution(r1.text + "\n</code>");
        } catch (const ParseError& e) {
            throw StepParseFailure(e.what(), r1.text);
        }
        const ExecutionResult exec = executor_.execute(partial.code.value_or(""));
        out.telemetry.exec_time = exec.wall_time;
        partial.output = observation_text(exec);
        std::string open;
        try {
            req.prompt = prompt_for(partial);
            open = render_open_block(partial);
        } catch (const UnrepresentableError& e) {
            throw StepParseFailure(e.what(), r1.text);
        }
        req.stop_sequences = kPhaseTwoStops;
        const CompletionResponse r2 = complete(backends_, req, config_.role);
        out.sources.push_back(r2.token_source);
        out.telemetry.completion_tokens += r2.completion_tokens;
        out.telemetry.decode_time += r2.latency;
        out.telemetry.context_tokens = r2.prompt_tokens + r2.completion_tokens;
        try {
            out.block = parse_solution(open + r2.text);
        } catch (const ParseError& e) {
            throw StepParseFailure(e.what(), open + r2.text);
        }
        out.step = step_from_block(out.block, exec);
    }
    out.telemetry.modeled_cache_bytes = config_.cache_model.kv_bytes_per_token() * out.telemetry.context_tokens;
    return out;
}

namespace {

std::string token_counting_label(const std::vector<TokenSource>& sources) {
    bool any_backend = false, any_fallback = false;
    for (auto s : sources) (s == TokenSource::backend ? any_backend : any_fallback) = true;
    if (any_backend && any_fallback) return "mixed";
    return any_backend ? "backend" : "fallback";
}

}  // namespace

RunRecord Reasoner::solve_mcot(std::string_view question) const {
    RunRecord rec;
    rec.strategy = Strategy::mcot;
    rec.question = std::string(question);
    MarkovChain chain;
    chain.status = ChainStatus::exhausted;
    std::vector<TokenSource> sources;

    State state{trim(question), 1};
    std::size_t self_loops = 0;
    rec.stop_reason = StopReason::max_steps;
    while (chain.steps.size() < config_.max_steps) {
        StepResult r;
        try {
            r = run_step([&](const std::optional<SolutionBlock>& p) { return build_prompt_mcot(state, p, config_.templates); },
                         state.index);
        } catch (const BackendError& e) {
            rec.stop_reason = StopReason::backend_error;
            rec.error = std::string(to_string(e.kind)) + ": " + e.what();
            rec.backend_error_kind = e.kind;
            chain.status = ChainStatus::failed;
            break;
        } catch (const StepParseFailure& e) {
            rec.stop_reason = StopReason::parse_error;
            rec.error = e.what();
            rec.raw_output = e.raw;
            chain.status = ChainStatus::failed;
            break;
        }
        sources.insert(sources.end(), r.sources.begin(), r.sources.end());
        rec.telemetry.push_back(r.telemetry);

        const Terminal& term = r.block.terminal;
        if (term.kind == Terminal::Kind::final_answer) {
            try {
                rec.final_answer = extract_final_answer(term.text);
            } catch (const EmptyAnswerError& e) {
                rec.stop_reason = StopReason::parse_error;
                rec.error = e.what();
                rec.raw_output = render_block(r.block);
                chain.status = ChainStatus::failed;
                break;
            }
            chain.steps.push_back({state, r.step, Transition::final_answer(trim(term.text))});
            chain.status = ChainStatus::solved;
            rec.stop_reason = StopReason::final;
            break;
        }
        const std::string next = trim(term.text);
        if (term.kind == Terminal::Kind::none || next.empty()) {
            rec.stop_reason = StopReason::parse_error;
            rec.error = term.kind == Terminal::Kind::none ? "step ended without a sub question or final answer"
                                                          : "empty sub question";
            rec.raw_output = render_block(r.block);
            chain.status = ChainStatus::failed;
            break;
        }
        chain.steps.push_back({state, r.step, Transition::reduce(next)});
        self_loops = next == state.question ? self_loops + 1 : 0;
        if (self_loops >= 2) break;  // the model is not reducing anything
        state = State{next, state.index + 1};
    }
    rec.token_counting = token_counting_label(sources);
    rec.path = std::move(chain);
    return rec;
}

RunRecord Reasoner::solve_msr(std::string_view question) const {
    RunRecord rec;
    rec.strategy = Strategy::msr;
    rec.question = std::string(question);
    Trajectory traj;
    traj.question = trim(question);
    std::vector<TokenSource> sources;

    rec.stop_reason = StopReason::max_steps;
    for (std::size_t t = 1; t <= config_.max_steps; ++t) {
        StepResult r;
        try {
            r = run_step(
                [&](const std::optional<SolutionBlock>& p) {
                    return build_prompt_msr(traj.question, traj.steps, p, config_.templates);
                },
                t);
        } catch (const BackendError& e) {
            rec.stop_reason = StopReason::backend_error;
            rec.error = std::string(to_string(e.kind)) + ": " + e.what();
            rec.backend_error_kind = e.kind;
            break;
        } catch (const StepParseFailure& e) {
            rec.stop_reason = StopReason::parse_error;
            rec.error = e.what();
            rec.raw_output = e.raw;
            break;
        } catch (const UnrepresentableError& e) {
            rec.stop_reason = StopReason::parse_error;
            rec.error = e.what();
            break;
        }
        sources.insert(sources.end(), r.sources.begin(), r.sources.end());
        rec.telemetry.push_back(r.telemetry);
        traj.steps.push_back(r.step);

        const Terminal& term = r.block.terminal;
        if (term.kind == Terminal::Kind::sub_question) {
            rec.stop_reason = StopReason::parse_error;
            rec.error = "sub question emitted in a full-history run";
            rec.raw_output = render_block(r.block);
            break;
        }
        if (term.kind == Terminal::Kind::final_answer) {
            try {
                rec.final_answer = extract_final_answer(term.text);
                traj.answer = trim(term.text);
                rec.stop_reason = StopReason::final;
            } catch (const EmptyAnswerError& e) {
                rec.stop_reason = StopReason::parse_error;
                rec.error = e.what();
                rec.raw_output = render_block(r.block);
            }
            break;
        }
    }
    rec.token_counting = token_counting_label(sources);
    rec.path = std::move(traj);
    return rec;
}

RunRecord Reasoner::solve(Strategy strategy, std::string_view question) const {
    return strategy == Strategy::mcot ? solve_mcot(question) : solve_msr(question);
}

}  // namespace mcot
