#pragma once

// Builders for scripted backends and executors used across the test suites.

#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcot/chain.hpp"
#include "mcot/code_exec.hpp"
#include "mcot/mock_backend.hpp"
#include "mcot/reasoners.hpp"
#include "mcot/tagformat.hpp"
#include "mcot/tokenizer.hpp"

#ifndef MCOT_TEST_DATA_DIR
#define MCOT_TEST_DATA_DIR "tests/data"
#endif

namespace mcot::testing {

using nlohmann::json;

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(MCOT_TEST_DATA_DIR) / rel; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

/// Executor result that reproduces `output` as the observation. Lines shaped
/// like "SomeError: ..." become a failed run with a traceback.
inline json exec_entry_for(const std::string& code, const std::string& output) {
    json e = {{"match", code}, {"wall_time_s", 0.01}};
    const auto colon = output.find(": ");
    const bool is_error = output.find('\n') == std::string::npos && colon != std::string::npos &&
                          colon >= 5 && output.compare(colon - 5, 5, "Error") == 0;
    if (is_error) {
        e["status"] = "error";
        e["stdout"] = "";
        e["stderr"] = "Traceback (most recent call last):\n  File \"<snippet>\", line 1, in <module>\n" + output + "\n";
    } else {
        e["status"] = "ok";
        e["stdout"] = output + "\n";
        e["stderr"] = "";
    }
    return e;
}

/// Mock entries replaying `blocks` as the answer to a two-phase step whose
/// prompts are produced by `prompt_for`.
template <class PromptFn>
void script_step(std::vector<json>& mock, std::vector<json>& exec, const SolutionBlock& block, PromptFn prompt_for) {
    const std::string full = render_block(block);
    const std::string p1 = prompt_for(std::optional<SolutionBlock>{});
    mock.push_back({{"match", p1}, {"reply", full.substr(std::string("<solution>\n").size())}});
    if (!block.code) return;
    SolutionBlock partial;
    partial.analysis = block.analysis;
    partial.code = block.code;
    partial.output = block.output.value_or("");
    const std::string open = render_open_block(partial);
    mock.push_back({{"match", prompt_for(std::optional<SolutionBlock>{partial})}, {"reply", full.substr(open.size())}});
    exec.push_back(exec_entry_for(*block.code, *partial.output));
}

/// Scripts an MCoT run through the blocks of a transcript: block i answers the
/// question left by block i-1.
inline void script_mcot(std::vector<json>& mock, std::vector<json>& exec, const Transcript& t,
                        const PromptTemplates& templates = {}) {
    std::string question = t.question;
    std::size_t index = 1;
    for (const auto& b : t.blocks) {
        const State state{question, index++};
        script_step(mock, exec, b, [&](const std::optional<SolutionBlock>& p) { return build_prompt_mcot(state, p, templates); });
        question = b.terminal.text;
    }
}

/// Scripts a full-history run of `question` through `blocks`.
inline void script_msr(std::vector<json>& mock, std::vector<json>& exec, const std::string& question,
                       const std::vector<SolutionBlock>& blocks, const PromptTemplates& templates = {}) {
    std::vector<DerivationStep> history;
    for (const auto& b : blocks) {
        script_step(mock, exec, b, [&](const std::optional<SolutionBlock>& p) {
            return build_prompt_msr(question, history, p, templates);
        });
        DerivationStep s;
        s.analysis = b.analysis;
        s.code = b.code.value_or("");
        if (s.has_code()) s.observation = execution_from_json(exec_entry_for(s.code, b.output.value_or("")));
        s.remark = b.remark;
        history.push_back(s);
    }
}

struct ReplayCase {
    std::string name;
    std::string file;
    std::string gold;
    std::size_t chain_length;
};

inline const std::vector<ReplayCase>& replay_cases() {
    static const std::vector<ReplayCase> cases = {
        {"root", "replay/root_selfcorrect.txt", "\\frac{19}{4}", 2},
        {"inequality", "replay/inequality_selfcorrect.txt", "3", 3},
        {"banana", "replay/banana_lossy.txt", "50", 3},
    };
    return cases;
}

inline Transcript load_transcript(const std::string& rel) { return parse_transcript(read_file(data_path(rel))); }

/// Mock and executor scripts covering every replay case.
inline std::pair<std::string, std::string> replay_scripts() {
    std::vector<json> mock, exec;
    for (const auto& c : replay_cases()) script_mcot(mock, exec, load_transcript(c.file));
    return {to_jsonl(mock), to_jsonl(exec)};
}

inline std::string replay_questions_jsonl() {
    std::vector<json> rows;
    for (const auto& c : replay_cases())
        rows.push_back({{"id", c.name}, {"question", load_transcript(c.file).question}, {"gold", c.gold}, {"dataset", "replay"}});
    return to_jsonl(rows);
}

// ---------------------------------------------------------------------------
// Random values

inline std::string random_word(std::mt19937_64& rng) {
    static const char* words[] = {"alpha", "beta", "sum", "x", "12", "root", "count", "\\frac{1}{2}", "apples", "7.5"};
    return words[rng() % (sizeof words / sizeof *words)];
}

inline std::string random_sentence(std::mt19937_64& rng, std::size_t min_words = 1, std::size_t max_words = 12) {
    const std::size_t n = min_words + rng() % (max_words - min_words + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += random_word(rng);
    }
    return out;
}

inline DerivationStep random_step(std::mt19937_64& rng) {
    DerivationStep s;
    s.analysis = random_sentence(rng);
    if (rng() % 4 != 0) {
        s.code = "v = " + std::to_string(rng() % 1000) + "\nprint(v * " + std::to_string(rng() % 9 + 1) + ")";
        ExecutionResult r;
        r.status = rng() % 5 == 0 ? ExecStatus::error : ExecStatus::ok;
        r.stdout_text = std::to_string(rng() % 10000) + "\n";
        if (r.status == ExecStatus::error) r.stderr_text = "NameError: name 'y' is not defined\n";
        r.wall_time = static_cast<double>(rng() % 1000) / 1000.0;
        s.observation = r;
        if (rng() % 3 == 0) s.remark = random_sentence(rng);
    }
    return s;
}

/// A valid chain of 1..max_len entries; solved, exhausted or (rarely) failed.
inline MarkovChain random_chain(std::mt19937_64& rng, std::size_t max_len = 8) {
    MarkovChain c;
    const std::size_t len = 1 + rng() % max_len;
    const int shape = static_cast<int>(rng() % 3);
    c.status = shape == 0 ? ChainStatus::exhausted : ChainStatus::solved;
    std::string question = "Q0 " + random_sentence(rng);
    for (std::size_t i = 0; i < len; ++i) {
        const bool last = i + 1 == len;
        std::string next = "Q" + std::to_string(i + 1) + " " + random_sentence(rng);
        Transition tr = last && c.status == ChainStatus::solved ? Transition::final_answer(random_word(rng))
                                                                 : Transition::reduce(next);
        c.steps.push_back({State{question, i + 1}, random_step(rng), tr});
        question = next;
    }
    return c;
}

/// Short strings built mostly from markup fragments, for parser fuzzing.
inline std::string random_markup(std::mt19937_64& rng) {
    static const char* pieces[] = {"<solution>", "</solution>", "<code>", "</code>", "<output>", "</output>",
                                   "Sub Question:", "Final Answer:", "\n", "\n", " ", "x", "1", "\\(", "\\)",
                                   "\xc3\xa9", "<", "/", ">", "\r", "\t", "<question>", "$"};
    std::string s;
    const std::size_t n = rng() % 32;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 20 == 0)
            s += static_cast<char>(rng() % 256);
        else
            s += pieces[rng() % (sizeof pieces / sizeof *pieces)];
    }
    return s;
}

// ---------------------------------------------------------------------------
// Scripted rigs

struct Rig {
    std::shared_ptr<MockBackend> mock;
    std::shared_ptr<ScriptedExecutor> exec;
    BackendSet backends;
};

/// One mock bound to every role plus a scripted executor.
inline Rig make_rig(const std::vector<json>& mock, const std::vector<json>& exec) {
    Rig r;
    r.mock = MockBackend::from_jsonl_text(to_jsonl(mock));
    r.exec = ScriptedExecutor::from_jsonl_text(to_jsonl(exec));
    for (auto role : {BackendRole::solver, BackendRole::annotator, BackendRole::verifier}) r.backends.bind(role, r.mock);
    return r;
}

inline Rig mcot_rig(const Transcript& t) {
    std::vector<json> mock, exec;
    script_mcot(mock, exec, t);
    return make_rig(mock, exec);
}

/// Same blocks with every Sub Question dropped, as a full-history run would write them.
inline std::vector<SolutionBlock> msr_blocks(const Transcript& t) {
    std::vector<SolutionBlock> out = t.blocks;
    for (auto& b : out)
        if (b.terminal.kind == Terminal::Kind::sub_question) b.terminal = Terminal{};
    return out;
}

inline Rig msr_rig(const Transcript& t) {
    std::vector<json> mock, exec;
    script_msr(mock, exec, t.question, msr_blocks(t));
    return make_rig(mock, exec);
}

inline Transcript transcript_from_chain(const MarkovChain& c) {
    Transcript t;
    t.question = c.steps.front().state.question;
    for (const auto& e : c.steps) {
        SolutionBlock b = block_from_step(e.step);
        b.terminal = e.transition.is_final() ? Terminal::final_answer(e.transition.text())
                                             : Terminal::sub_question(e.transition.text());
        t.blocks.push_back(std::move(b));
    }
    return t;
}

/// Two problems whose first steps reduce to the same question, followed by a
/// shared solved tail. Codes carry a per-step tag so scripted lookups never collide.
struct SharedTailCase {
    Transcript a, b;
    std::string shared_question;
};

inline SharedTailCase shared_tail_case(std::mt19937_64& rng, std::size_t id) {
    MarkovChain tail;
    // one step short of the default cap, leaving room for the head step
    do tail = random_chain(rng, kDefaultMaxSteps - 1);
    while (tail.status != ChainStatus::solved);
    const std::string tag = "#" + std::to_string(id) + ".";
    for (std::size_t i = 0; i < tail.steps.size(); ++i) {
        auto& e = tail.steps[i];
        e.state.question = "case " + std::to_string(id) + " " + e.state.question;
        if (e.transition.is_reduce()) e.transition = Transition::reduce("case " + std::to_string(id) + " " + e.transition.text());
        if (e.step.has_code()) e.step.code = tag + std::to_string(i + 2) + "\n" + e.step.code;
    }
    SharedTailCase c;
    c.shared_question = tail.steps.front().state.question;
    const Transcript rest = transcript_from_chain(tail);
    auto head = [&](const std::string& which) {
        SolutionBlock b;
        b.analysis = "Opening move for " + which + ": " + random_sentence(rng);
        b.code = tag + "1" + which + "\nprint(" + std::to_string(rng() % 1000) + ")";
        b.output = std::to_string(rng() % 1000);
        b.terminal = Terminal::sub_question(c.shared_question);
        return b;
    };
    c.a.question = "Problem " + std::to_string(id) + "a: " + random_sentence(rng);
    c.b.question = "Problem " + std::to_string(id) + "b: " + random_sentence(rng, 2, 12) + " indeed";
    c.a.blocks.push_back(head("a"));
    c.b.blocks.push_back(head("b"));
    for (const auto& blk : rest.blocks) {
        c.a.blocks.push_back(blk);
        c.b.blocks.push_back(blk);
    }
    return c;
}

/// Backend driven by a function of the request; thread-safe when `fn` is.
class FnBackend : public Backend {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit FnBackend(Fn fn) : fn_(std::move(fn)) {}

    CompletionResponse complete(const CompletionRequest& request) override {
        CompletionResponse r;
        r.text = truncate_at_stop(fn_(request), request.stop_sequences);
        r.prompt_tokens = count_tokens(request.prompt);
        r.completion_tokens = count_tokens(r.text);
        return r;
    }
    std::string describe() const override { return "fn"; }

private:
    Fn fn_;
};

/// Number of finished blocks in a full-history prompt.
inline std::size_t history_length(const std::string& prompt) {
    std::size_t n = 0;
    for (std::size_t pos = prompt.find("</solution>"); pos != std::string::npos; pos = prompt.find("</solution>", pos + 1)) ++n;
    return n;
}

/// Question inside the first <question> block of a prompt.
inline std::string prompt_question(const std::string& prompt) {
    const auto a = prompt.find("<question>\n");
    const auto b = prompt.find("\n</question>");
    if (a == std::string::npos || b == std::string::npos) return {};
    return prompt.substr(a + 11, b - a - 11);
}

/// Verifier that solves `question` in `length(question, seed)` code-free steps
/// and answers `answer(question, seed)`.
inline std::shared_ptr<FnBackend> length_verifier(std::function<std::size_t(const std::string&, std::uint64_t)> length,
                                                  std::function<std::string(const std::string&, std::uint64_t)> answer) {
    return std::make_shared<FnBackend>([=](const CompletionRequest& r) -> std::string {
        const std::string q = prompt_question(r.prompt);
        const std::size_t done = history_length(r.prompt);
        if (done + 1 >= length(q, r.seed)) return "Step " + std::to_string(done + 1) + ".\nFinal Answer: " + answer(q, r.seed) + "\n";
        return "Step " + std::to_string(done + 1) + " of " + q + ".\n";
    });
}

/// Annotator reducing any question to "<question> | reduced".
inline std::shared_ptr<FnBackend> suffix_annotator() {
    return std::make_shared<FnBackend>([](const CompletionRequest& r) -> std::string {
        const std::string q = prompt_question(r.prompt);
        return " " + q + " | reduced\n";
    });
}

inline Trajectory plain_trajectory(const std::string& question, std::size_t steps, const std::string& answer) {
    Trajectory t{question, {}, answer};
    for (std::size_t i = 0; i < steps; ++i) {
        DerivationStep s;
        s.analysis = "Original step " + std::to_string(i + 1) + " of " + question + ".";
        if (i % 2 == 0) {
            s.code = "print(" + std::to_string(i) + ")";
            s.observation = ExecutionResult{ExecStatus::ok, std::to_string(i) + "\n", "", 0.01, false};
        }
        t.steps.push_back(std::move(s));
    }
    return t;
}

}  // namespace mcot::testing
