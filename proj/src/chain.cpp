#include "mcot/chain.hpp"

#include <cstdio>

#include "mcot/errors.hpp"

namespace mcot {

using nlohmann::json;

namespace {

std::string trim_trailing_newlines(std::string_view text) {
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.remove_suffix(1);
    return std::string(text);
}

std::string last_nonempty_line(std::string_view text) {
    std::string result;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string line = trim(text.substr(start, end - start));
        if (!line.empty()) result = std::move(line);
        start = end + 1;
    }
    return result;
}

std::string string_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw Error(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::string required_string(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw Error(std::string("missing field '") + key + "'");
    return string_field(j, key);
}

}  // namespace

std::string trim(std::string_view text) {
    const char* ws = " \t\r\n\f\v";
    auto first = text.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    auto last = text.find_last_not_of(ws);
    return std::string(text.substr(first, last - first + 1));
}

const char* to_string(ExecStatus status) {
    switch (status) {
        case ExecStatus::ok: return "ok";
        case ExecStatus::error: return "error";
        case ExecStatus::timeout: return "timeout";
    }
    return "error";
}

ExecStatus exec_status_from_string(std::string_view text) {
    if (text == "ok") return ExecStatus::ok;
    if (text == "error") return ExecStatus::error;
    if (text == "timeout") return ExecStatus::timeout;
    throw Error("unknown execution status '" + std::string(text) + "'");
}

std::string observation_text(const ExecutionResult& result) {
    std::string out = trim_trailing_newlines(result.stdout_text);
    auto append_line = [&out](const std::string& line) {
        if (line.empty()) return;
        if (!out.empty()) out += '\n';
        out += line;
    };
    switch (result.status) {
        case ExecStatus::ok:
            break;
        case ExecStatus::error:
            append_line(last_nonempty_line(result.stderr_text));
            break;
        case ExecStatus::timeout: {
            char buf[96];
            std::snprintf(buf, sizeof buf, "TimeoutError: execution exceeded %.3g s", result.wall_time);
            append_line(buf);
            break;
        }
    }
    return out;
}

const char* to_string(Transition::Kind kind) {
    return kind == Transition::Kind::reduce ? "reduce" : "final";
}

Transition::Kind transition_kind_from_string(std::string_view text) {
    if (text == "reduce") return Transition::Kind::reduce;
    if (text == "final") return Transition::Kind::final;
    throw Error("unknown outcome kind '" + std::string(text) + "'");
}

const char* to_string(ChainStatus status) {
    switch (status) {
        case ChainStatus::solved: return "solved";
        case ChainStatus::exhausted: return "exhausted";
        case ChainStatus::failed: return "failed";
    }
    return "failed";
}

ChainStatus chain_status_from_string(std::string_view text) {
    if (text == "solved") return ChainStatus::solved;
    if (text == "exhausted") return ChainStatus::exhausted;
    if (text == "failed") return ChainStatus::failed;
    throw Error("unknown chain status '" + std::string(text) + "'");
}

const char* to_string(Violation::Kind kind) {
    switch (kind) {
        case Violation::Kind::empty: return "empty";
        case Violation::Kind::question: return "question";
        case Violation::Kind::index: return "index";
        case Violation::Kind::linkage: return "linkage";
        case Violation::Kind::terminal: return "terminal";
        case Violation::Kind::observation: return "observation";
        case Violation::Kind::length: return "length";
    }
    return "unknown";
}

std::vector<Violation> validate_chain(const MarkovChain& chain, std::size_t max_steps) {
    std::vector<Violation> out;
    const auto& steps = chain.steps;

    if (steps.empty()) {
        if (chain.status != ChainStatus::failed)
            out.push_back({0, Violation::Kind::empty, "chain has no steps"});
        return out;
    }
    if (steps.size() > max_steps) {
        out.push_back({0, Violation::Kind::length,
                       "length " + std::to_string(steps.size()) + " exceeds max_steps " + std::to_string(max_steps)});
    }

    for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::size_t pos = i + 1;
        const auto& entry = steps[i];
        if (trim(entry.state.question).empty())
            out.push_back({pos, Violation::Kind::question, "state question is empty"});
        if (entry.state.index != pos)
            out.push_back({pos, Violation::Kind::index,
                           "state index " + std::to_string(entry.state.index) + ", expected " + std::to_string(pos)});
        if (entry.step.has_code() && !entry.step.observation)
            out.push_back({pos, Violation::Kind::observation, "code present but never executed"});

        const bool last = i + 1 == steps.size();
        if (entry.transition.is_reduce() && trim(entry.transition.text()).empty())
            out.push_back({pos, Violation::Kind::terminal, "reduce transition has an empty question"});
        if (!last) {
            if (!entry.transition.is_reduce()) {
                out.push_back({pos, Violation::Kind::terminal, "final transition before the last entry"});
            } else if (entry.transition.text() != steps[i + 1].state.question) {
                out.push_back({pos + 1, Violation::Kind::linkage,
                               "state question differs from the previous reduce target"});
            }
        }
    }

    const auto& tail = steps.back().transition;
    if (chain.status == ChainStatus::solved && !tail.is_final())
        out.push_back({steps.size(), Violation::Kind::terminal, "solved chain does not end in a final answer"});
    if (chain.status != ChainStatus::solved && tail.is_final())
        out.push_back({steps.size(), Violation::Kind::terminal,
                       std::string(to_string(chain.status)) + " chain ends in a final answer"});
    return out;
}

std::vector<Triplet> decompose_chain(const MarkovChain& chain, std::size_t max_steps) {
    auto violations = validate_chain(chain, max_steps);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw ChainError(v.index, std::string(to_string(v.kind)) + ": " + v.reason);
    }
    std::vector<Triplet> out;
    out.reserve(chain.steps.size());
    for (const auto& entry : chain.steps) out.push_back({entry.state.question, entry.step, entry.transition});
    return out;
}

MarkovChain reassemble_chain(const std::vector<Triplet>& triplets) {
    if (triplets.empty()) throw ChainError(0, "empty input: a chain needs at least one triplet");

    MarkovChain chain;
    chain.steps.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        const auto& t = triplets[i];
        const std::size_t pos = i + 1;
        if (trim(t.question).empty()) throw ChainError(pos, "empty question");
        if (i > 0) {
            const auto& prev = triplets[i - 1].outcome;
            if (!prev.is_reduce()) throw ChainError(i, "final outcome in a non-terminal position");
            if (prev.text() != t.question) throw ChainError(pos, "question differs from the previous reduce target");
        }
        chain.steps.push_back({State{t.question, pos}, t.step, t.outcome});
    }
    chain.status = triplets.back().outcome.is_final() ? ChainStatus::solved : ChainStatus::exhausted;
    return chain;
}

json execution_to_json(const ExecutionResult& r) {
    json j = {{"status", to_string(r.status)},
              {"stdout", r.stdout_text},
              {"stderr", r.stderr_text},
              {"wall_time_s", r.wall_time}};
    if (r.harness_failure) j["harness_failure"] = true;
    return j;
}

ExecutionResult execution_from_json(const json& j) {
    ExecutionResult r;
    r.status = exec_status_from_string(required_string(j, "status"));
    r.stdout_text = string_field(j, "stdout");
    r.stderr_text = string_field(j, "stderr");
    r.wall_time = j.value("wall_time_s", 0.0);
    r.harness_failure = j.value("harness_failure", false);
    return r;
}

json step_to_json(const DerivationStep& step) {
    json j = {{"analysis", step.analysis}, {"code", step.code}, {"output", step.output()}};
    if (!step.remark.empty()) j["remark"] = step.remark;
    return j;
}

DerivationStep step_from_json(const json& j) {
    if (!j.is_object()) throw Error("step must be an object");
    DerivationStep step;
    step.analysis = string_field(j, "analysis");
    step.code = string_field(j, "code");
    step.remark = string_field(j, "remark");
    if (auto it = j.find("execution"); it != j.end() && it->is_object()) {
        step.observation = execution_from_json(*it);
    } else if (j.contains("output") && !j["output"].is_null()) {
        std::string out = string_field(j, "output");
        if (step.has_code() || !out.empty()) step.observation = ExecutionResult{ExecStatus::ok, out, {}, 0.0, false};
    }
    return step;
}

json trajectory_to_json(const Trajectory& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        json js = step_to_json(s);
        if (s.observation) js["execution"] = execution_to_json(*s.observation);
        steps.push_back(std::move(js));
    }
    return {{"question", t.question}, {"steps", std::move(steps)}, {"answer", t.answer}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.question = required_string(j, "question");
    t.answer = required_string(j, "answer");
    const auto& steps = j.at("steps");
    if (!steps.is_array()) throw Error("'steps' must be an array");
    for (const auto& s : steps) t.steps.push_back(step_from_json(s));
    return t;
}

json triplet_to_json(const Triplet& t) {
    json j = {{"question", t.question},
              {"analysis", t.step.analysis},
              {"code", t.step.code},
              {"output", t.step.output()},
              {"outcome_kind", to_string(t.outcome.kind())},
              {"outcome_text", t.outcome.text()}};
    if (!t.step.remark.empty()) j["remark"] = t.step.remark;
    return j;
}

Triplet triplet_from_json(const json& j) {
    std::string question = required_string(j, "question");
    DerivationStep step = step_from_json(j);
    auto kind = transition_kind_from_string(required_string(j, "outcome_kind"));
    std::string text = required_string(j, "outcome_text");
    Transition outcome = kind == Transition::Kind::reduce ? Transition::reduce(std::move(text))
                                                          : Transition::final_answer(std::move(text));
    return {std::move(question), std::move(step), std::move(outcome)};
}

json chain_to_json(const MarkovChain& chain) {
    json steps = json::array();
    for (const auto& e : chain.steps) {
        json s = step_to_json(e.step);
        s["question"] = e.state.question;
        s["index"] = e.state.index;
        if (e.step.observation) s["execution"] = execution_to_json(*e.step.observation);
        s["outcome_kind"] = to_string(e.transition.kind());
        s["outcome_text"] = e.transition.text();
        steps.push_back(std::move(s));
    }
    return {{"status", to_string(chain.status)}, {"steps", std::move(steps)}};
}

MarkovChain chain_from_json(const json& j) {
    MarkovChain chain;
    chain.status = chain_status_from_string(required_string(j, "status"));
    for (const auto& s : j.at("steps")) {
        Triplet t = triplet_from_json(s);
        chain.steps.push_back({State{t.question, s.value("index", chain.steps.size() + 1)}, std::move(t.step),
                               std::move(t.outcome)});
    }
    return chain;
}

}  // namespace mcot
