#include "mcot/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mcot/errors.hpp"
#include "mcot/parallel.hpp"
#include "mcot/tagformat.hpp"
#include "mcot/verifier.hpp"

namespace mcot {

using nlohmann::json;

const char* to_string(CorpusSource s) { return s == CorpusSource::seed ? "seed" : "self_distill"; }

CorpusSource corpus_source_from_string(std::string_view text) {
    if (text == "seed") return CorpusSource::seed;
    if (text == "self_distill") return CorpusSource::self_distill;
    throw Error("unknown corpus source: " + std::string(text));
}

json provenance_to_json(const Provenance& p) {
    json j = {{"origin_id", p.origin_id}, {"iteration", p.iteration}, {"source", to_string(p.source)}};
    j["verifier_answer"] = p.verifier_answer ? json(*p.verifier_answer) : json(nullptr);
    j["gold"] = p.gold ? json(*p.gold) : json(nullptr);
    return j;
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    p.origin_id = j.at("origin_id").get<std::string>();
    p.iteration = j.value("iteration", std::size_t{0});
    p.source = corpus_source_from_string(j.value("source", std::string("seed")));
    if (j.contains("verifier_answer") && j["verifier_answer"].is_string())
        p.verifier_answer = j["verifier_answer"].get<std::string>();
    if (j.contains("gold") && j["gold"].is_string()) p.gold = j["gold"].get<std::string>();
    return p;
}

void SeedCorpus::add(Triplet t, Provenance p) {
    triplets.push_back(std::move(t));
    provenance.push_back(std::move(p));
}

const std::string& default_annotator_template() {
    static const std::string tmpl =
        "Below is a math question followed by the first step of its solution, with the code that step ran\n"
        "and the code's output. Write one new question that is fully self-contained: it must state every\n"
        "quantity already established by the step, so that solving it alone gives the answer to the\n"
        "original question. Do not mention the step or the original question. Reply with the new\n"
        "question only.\n"
        "\n"
        "<question>\n{question}\n</question>\n"
        "{step}\n"
        "\n"
        "Sub Question:";
    return tmpl;
}

json iteration_stats_to_json(const IterationStats& s) {
    return {{"iteration", s.iteration},
            {"processed", s.processed},
            {"finals", s.finals},
            {"reduces", s.reduces},
            {"requeued", s.requeued},
            {"dropped_annotator", s.dropped_annotator},
            {"failed_independence", s.failed_independence},
            {"not_requeued", s.not_requeued},
            {"verifier_samples", s.verifier_samples},
            {"verifier_passes", s.verifier_passes}};
}

IterationStats iteration_stats_from_json(const json& j) {
    IterationStats s;
    s.iteration = j.at("iteration").get<std::size_t>();
    s.processed = j.value("processed", std::size_t{0});
    s.finals = j.value("finals", std::size_t{0});
    s.reduces = j.value("reduces", std::size_t{0});
    s.requeued = j.value("requeued", std::size_t{0});
    s.dropped_annotator = j.value("dropped_annotator", std::size_t{0});
    s.failed_independence = j.value("failed_independence", std::size_t{0});
    s.not_requeued = j.value("not_requeued", std::size_t{0});
    s.verifier_samples = j.value("verifier_samples", std::size_t{0});
    s.verifier_passes = j.value("verifier_passes", std::size_t{0});
    return s;
}

// ---------------------------------------------------------------------------
// build_seed

namespace {

struct Outcome {
    std::vector<std::pair<Triplet, Provenance>> emitted;
    std::optional<OriginTrajectory> child;
    IterationStats delta;
    std::vector<std::string> log;
    std::optional<std::string> abort;
};

bool unreachable(const std::optional<BackendError::Kind>& k) {
    return k && (*k == BackendError::Kind::transport || *k == BackendError::Kind::timeout);
}

// Text after the last "Sub Question:" marker, trimmed. Empty when unusable.
std::string parse_annotation(const std::string& reply) {
    std::string text = reply;
    const auto pos = text.rfind(kSubQuestionMarker);
    if (pos != std::string::npos) text = text.substr(pos + kSubQuestionMarker.size());
    text = trim(text);
    for (const char* tag : {"<question>", "</question>", "<solution>", "</solution>", "<code>", "</code>", "<output>",
                            "</output>"})
        if (text.find(tag) != std::string::npos) return {};
    if (text.find(kFinalAnswerMarker) != std::string::npos) return {};
    return text;
}

std::pair<Triplet, Provenance> final_triplet(const OriginTrajectory& o, std::size_t iteration) {
    const Trajectory& t = o.trajectory;
    return {Triplet{t.question, t.steps.front(), Transition::final_answer(t.answer)},
            Provenance{o.id, iteration, CorpusSource::seed, std::nullopt, t.answer}};
}

Outcome process(const OriginTrajectory& item, std::size_t iteration, const BackendSet& backends, Executor& executor,
                const SeedParams& params) {
    Outcome out;
    const Trajectory& traj = item.trajectory;
    const std::size_t T = traj.steps.size();
    out.delta.processed = 1;

    if (T == 1) {
        out.emitted.push_back(final_triplet(item, iteration));
        out.delta.finals = 1;
        return out;
    }

    CompletionRequest ann;
    ann.prompt = render_template(params.annotator_template,
                                 {{"question", traj.question},
                                  {"step", render_block(block_from_step(traj.steps.front()))},
                                  {"answer", traj.answer}});
    ann.max_new_tokens = params.max_new_tokens;
    ann.temperature = 0.0;
    ann.seed = params.seed;
    ann.stop_sequences = {"</question>", "<solution>", "</solution>"};
    std::string q2;
    try {
        q2 = parse_annotation(complete(backends, ann, BackendRole::annotator).text);
    } catch (const BackendError& e) {
        if (e.retryable()) {
            out.abort = item.id + ": annotator unreachable: " + e.what();
            return out;
        }
        out.delta.dropped_annotator = 1;
        out.log.push_back(item.id + ": dropped, annotator error: " + e.what());
        return out;
    }
    if (q2.empty()) {
        out.delta.dropped_annotator = 1;
        out.log.push_back(item.id + ": dropped, annotator gave no usable question");
        return out;
    }

    std::vector<RunRecord> samples;
    std::size_t unreachable_count = 0;
    for (std::size_t i = 0; i < params.n_verify_samples; ++i) {
        ReasonerConfig cfg;
        cfg.max_steps = params.max_steps;
        cfg.max_new_tokens = params.max_new_tokens;
        cfg.temperature = params.verify_temperature;
        cfg.seed = params.seed + i;
        cfg.role = BackendRole::verifier;
        cfg.templates = params.templates;
        samples.push_back(Reasoner(backends, executor, cfg).solve_msr(q2));
        if (unreachable(samples.back().backend_error_kind)) ++unreachable_count;
    }
    out.delta.verifier_samples = samples.size();
    if (!samples.empty() && unreachable_count == samples.size()) {
        out.abort = item.id + ": verifier unreachable: " + samples.front().error;
        return out;
    }

    std::optional<std::size_t> first_pass, chosen;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const RunRecord& s = samples[i];
        if (s.stop_reason != StopReason::final || !s.final_answer) continue;
        if (!equivalent(*s.final_answer, traj.answer, params.tol)) continue;
        ++out.delta.verifier_passes;
        if (!first_pass) first_pass = i;
        const std::size_t Tp = s.step_count();
        if (Tp >= 1 && Tp < T && (!chosen || Tp < samples[*chosen].step_count())) chosen = i;
    }
    if (!first_pass) {
        out.delta.failed_independence = 1;
        out.log.push_back(item.id + ": reduction question failed all " + std::to_string(samples.size()) +
                          " verifier samples");
        return out;
    }

    const std::size_t witness = chosen.value_or(*first_pass);
    out.emitted.push_back({Triplet{traj.question, traj.steps.front(), Transition::reduce(q2)},
                           Provenance{item.id, iteration, CorpusSource::seed, samples[witness].final_answer,
                                      traj.answer}});
    out.delta.reduces = 1;
    if (!chosen) {
        out.delta.not_requeued = 1;
        out.log.push_back(item.id + ": no passing sample shorter than " + std::to_string(T) + " steps; not requeued");
        return out;
    }
    out.child = OriginTrajectory{item.id, Trajectory{q2, samples[*chosen].trajectory()->steps, traj.answer}};
    return out;
}

json origin_to_json(const OriginTrajectory& o) {
    json j = trajectory_to_json(o.trajectory);
    j["id"] = o.id;
    return j;
}

OriginTrajectory origin_from_json(const json& j) {
    return {j.at("id").get<std::string>(), trajectory_from_json(j)};
}

std::string run_fingerprint(const std::vector<OriginTrajectory>& origin, const SeedParams& p) {
    std::string blob;
    for (const auto& o : origin) blob += origin_to_json(o).dump() + "\n";
    blob += std::to_string(p.n_verify_samples) + "|" + std::to_string(p.seed) + "|" + std::to_string(p.max_steps) +
            "|" + p.annotator_template;
    return hex64(fnv1a64(blob));
}

struct Checkpoint {
    std::string fingerprint;
    std::size_t next_iteration = 1;
    std::vector<OriginTrajectory> pending;
    SeedResult partial;
};

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + tmp);
        out << text;
        out.flush();
        if (!out) throw Error("short write to checkpoint " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    json j;
    j["version"] = 1;
    j["fingerprint"] = c.fingerprint;
    j["next_iteration"] = c.next_iteration;
    j["pending"] = json::array();
    for (const auto& o : c.pending) j["pending"].push_back(origin_to_json(o));
    j["triplets"] = json::array();
    j["provenance"] = json::array();
    for (std::size_t i = 0; i < c.partial.corpus.size(); ++i) {
        const Triplet& t = c.partial.corpus.triplets[i];
        json jt = triplet_to_json(t);
        if (t.step.observation) jt["execution"] = execution_to_json(*t.step.observation);
        j["triplets"].push_back(std::move(jt));
        j["provenance"].push_back(provenance_to_json(c.partial.corpus.provenance[i]));
    }
    j["stats"] = json::array();
    for (const auto& s : c.partial.stats) j["stats"].push_back(iteration_stats_to_json(s));
    j["log"] = c.partial.log;
    write_atomic(path, j.dump(1) + "\n");
}

std::optional<Checkpoint> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    Checkpoint c;
    c.fingerprint = j.at("fingerprint").get<std::string>();
    c.next_iteration = j.at("next_iteration").get<std::size_t>();
    for (const auto& o : j.at("pending")) c.pending.push_back(origin_from_json(o));
    const auto& trip = j.at("triplets");
    const auto& prov = j.at("provenance");
    if (trip.size() != prov.size()) throw ConfigError("corrupt checkpoint: provenance does not match triplets");
    for (std::size_t i = 0; i < trip.size(); ++i)
        c.partial.corpus.add(triplet_from_json(trip[i]), provenance_from_json(prov[i]));
    for (const auto& s : j.at("stats")) c.partial.stats.push_back(iteration_stats_from_json(s));
    c.partial.log = j.value("log", std::vector<std::string>{});
    return c;
}

}  // namespace

SeedResult build_seed(const std::vector<OriginTrajectory>& origin, const BackendSet& backends, Executor& executor,
                      const SeedParams& params_in) {
    SeedParams params = params_in;
    if (params.annotator_template.empty()) params.annotator_template = default_annotator_template();
    if (params.n_verify_samples < 1) throw ConfigError("n_verify_samples must be >= 1");
    if (params.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (params.jobs < 1) throw ConfigError("jobs must be >= 1");

    Checkpoint state;
    state.fingerprint = run_fingerprint(origin, params);
    bool resumed = false;
    if (params.checkpoint) {
        if (auto saved = load_checkpoint(*params.checkpoint)) {
            if (saved->fingerprint != state.fingerprint)
                throw ConfigError("checkpoint " + params.checkpoint->string() + " belongs to a different run");
            state = std::move(*saved);
            resumed = true;
            state.partial.log.push_back("resumed at iteration " + std::to_string(state.next_iteration));
        }
    }
    if (!resumed) {
        for (const auto& o : origin) {
            if (o.trajectory.steps.empty()) {
                state.partial.log.push_back(o.id + ": dropped, trajectory has no steps");
                continue;
            }
            if (trim(o.trajectory.answer).empty()) {
                state.partial.log.push_back(o.id + ": dropped, trajectory has no answer");
                continue;
            }
            state.pending.push_back(o);
        }
    }

    while (!state.pending.empty() && state.next_iteration <= params.max_iterations) {
        const std::size_t k = state.next_iteration;
        auto outcomes = parallel_map(state.pending.size(), params.jobs, [&](std::size_t i) {
            return process(state.pending[i], k, backends, executor, params);
        });
        for (const auto& o : outcomes)
            if (o.abort)
                throw PipelineAborted(*o.abort + (params.checkpoint ? "; resume from " + params.checkpoint->string()
                                                                    : std::string("; no checkpoint configured")));

        IterationStats stats;
        stats.iteration = k;
        std::vector<OriginTrajectory> next;
        for (auto& o : outcomes) {
            for (auto& [t, p] : o.emitted) state.partial.corpus.add(std::move(t), std::move(p));
            stats.processed += o.delta.processed;
            stats.finals += o.delta.finals;
            stats.reduces += o.delta.reduces;
            stats.dropped_annotator += o.delta.dropped_annotator;
            stats.failed_independence += o.delta.failed_independence;
            stats.not_requeued += o.delta.not_requeued;
            stats.verifier_samples += o.delta.verifier_samples;
            stats.verifier_passes += o.delta.verifier_passes;
            for (auto& line : o.log) state.partial.log.push_back("iteration " + std::to_string(k) + ": " + line);
            if (!o.child) continue;
            if (o.child->trajectory.steps.size() == 1) {
                auto [t, p] = final_triplet(*o.child, k);
                state.partial.corpus.add(std::move(t), std::move(p));
                ++stats.finals;
            } else {
                next.push_back(std::move(*o.child));
                ++stats.requeued;
            }
        }
        state.partial.stats.push_back(stats);
        state.pending = std::move(next);
        state.next_iteration = k + 1;
        if (params.checkpoint) save_checkpoint(*params.checkpoint, state);
    }

    SeedResult result = std::move(state.partial);
    result.requeue = std::move(state.pending);
    if (!result.requeue.empty())
        result.log.push_back("stopped at max_iterations with " + std::to_string(result.requeue.size()) +
                             " trajectories still queued");
    return result;
}

// ---------------------------------------------------------------------------
// self_distill

DistillResult self_distill(const std::vector<QuestionAnswer>& pairs, const BackendSet& backends, Executor& executor,
                           const DistillParams& params) {
    struct One {
        std::vector<Triplet> triplets;
        bool finished = false;
        bool verified = false;
        std::string log;
    };
    const Reasoner reasoner(backends, executor, params.reasoner);
    auto results = parallel_map(pairs.size(), params.jobs, [&](std::size_t i) {
        One one;
        const auto& qa = pairs[i];
        try {
            RunRecord rec = reasoner.solve_mcot(qa.question);
            one.finished = rec.stop_reason == StopReason::final;
            if (!one.finished) {
                one.log = qa.id + ": no final answer (" + to_string(rec.stop_reason) + ")";
                return one;
            }
            if (!equivalent(*rec.final_answer, qa.answer, params.tol)) {
                one.log = qa.id + ": answer " + *rec.final_answer + " does not match gold " + qa.answer;
                return one;
            }
            one.verified = true;
            one.triplets = decompose_chain(*rec.chain(), params.reasoner.max_steps);
        } catch (const std::exception& e) {
            one.triplets.clear();
            one.verified = false;
            one.log = qa.id + ": " + e.what();
        }
        return one;
    });

    DistillResult out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& r = results[i];
        ++out.stats.attempted;
        out.stats.finished += r.finished;
        out.stats.verified += r.verified;
        if (!r.log.empty()) out.log.push_back(r.log);
        for (auto& t : r.triplets) {
            out.corpus.add(std::move(t), Provenance{pairs[i].id, 0, CorpusSource::self_distill, std::nullopt,
                                                    pairs[i].answer});
            ++out.stats.triplets;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// dedup

namespace {

std::string collapse_ws(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += ch;
    }
    return out;
}

// Code keeps its line structure (indentation matters); trailing spaces and
// blank lines do not.
std::string normalize_code(std::string_view code) {
    std::string out;
    std::istringstream in{std::string(code)};
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (line.empty()) continue;
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace

std::string dedup_key(const Triplet& t) {
    std::string key = collapse_ws(t.question);
    key += '\x1f';
    key += normalize_code(t.step.code);
    key += '\x1f';
    key += to_string(t.outcome.kind());
    key += '\x1f';
    key += collapse_ws(t.outcome.text());
    return key;
}

SeedCorpus filter_dedup(const std::vector<SeedCorpus>& corpora) {
    SeedCorpus out;
    std::set<std::string> seen;
    for (CorpusSource pass : {CorpusSource::seed, CorpusSource::self_distill}) {
        for (const auto& c : corpora) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                if (c.provenance[i].source != pass) continue;
                if (seen.insert(dedup_key(c.triplets[i])).second) out.add(c.triplets[i], c.provenance[i]);
            }
        }
    }
    return out;
}

std::string corpus_triplets_jsonl(const SeedCorpus& c) {
    std::string out;
    for (const auto& t : c.triplets) out += triplet_to_json(t).dump() + "\n";
    return out;
}

std::string corpus_provenance_jsonl(const SeedCorpus& c) {
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        json j = provenance_to_json(c.provenance[i]);
        j["key"] = hex64(fnv1a64(dedup_key(c.triplets[i])));
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace mcot
