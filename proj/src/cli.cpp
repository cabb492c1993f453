#include "mcot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcot/effbench.hpp"
#include "mcot/errors.hpp"
#include "mcot/http_backend.hpp"
#include "mcot/mock_backend.hpp"
#include "mcot/parallel.hpp"
#include "mcot/pipeline.hpp"

namespace mcot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kMaxMalformedFraction = 0.10;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    if (!out) throw Error("write failed: " + path);
}

/// Parses each non-blank JSONL line with `convert`. Bad lines are skipped and
/// counted; more than 10% bad lines aborts.
template <class T, class Fn>
std::vector<T> read_records(const fs::path& path, Fn convert, std::ostream& err) {
    const std::string text = read_text(path);
    std::vector<T> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0, total = 0, bad = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++total;
        try {
            out.push_back(convert(json::parse(line), line_no));
        } catch (const std::exception& e) {
            ++bad;
            err << "warning: " << path.string() << ":" << line_no << ": skipped malformed record (" << e.what()
                << ")\n";
        }
    }
    if (bad) err << "warning: " << path.string() << ": skipped " << bad << " of " << total << " records\n";
    if (total && static_cast<double>(bad) > kMaxMalformedFraction * static_cast<double>(total))
        throw Error(path.string() + ": " + std::to_string(bad) + " of " + std::to_string(total) +
                    " records malformed (more than 10%), aborting");
    if (total == 0) err << "warning: " << path.string() << " holds no records\n";
    return out;
}

struct QuestionItem {
    std::string id;
    std::string question;
    std::optional<std::string> gold;
    std::string dataset = "default";
};

QuestionItem question_from_json(const json& j, std::size_t line_no) {
    QuestionItem q;
    q.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                            : "q" + std::to_string(line_no);
    q.question = j.at("question").get<std::string>();
    if (trim(q.question).empty()) throw Error("empty question");
    for (const char* key : {"gold", "answer"})
        if (j.contains(key) && !j[key].is_null()) {
            q.gold = j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
            break;
        }
    q.dataset = j.value("dataset", std::string("default"));
    return q;
}

std::string join_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-")
        out << text;
    else
        write_text(path, text);
}

std::string template_from(const Config& config, const std::string& section, const std::string& key,
                          const std::string& fallback) {
    auto p = config.get_path(section, key);
    return p ? read_text(*p) : fallback;
}

void probe_roles(const BackendSet& backends, std::initializer_list<BackendRole> roles) {
    for (auto role : roles) backends.get(role).probe();
}

struct Globals {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

// ---------------------------------------------------------------------------

struct SolveOpts {
    std::string config, question, input, output, strategy = "mcot", dataset = "default";
    std::size_t max_steps = 0;
};

std::vector<RunRecord> solve_items(const std::vector<QuestionItem>& items, const Config& config, Strategy strategy,
                                   std::size_t max_steps, const Globals& g) {
    BackendSet backends = make_backends(config);
    probe_roles(backends, {BackendRole::solver});
    auto executor = make_executor(config);
    ReasonerConfig rc = make_reasoner_config(config);
    rc.seed = g.seed;
    if (max_steps) rc.max_steps = max_steps;
    const Reasoner reasoner(backends, *executor, rc);
    return parallel_map(items.size(), g.jobs, [&](std::size_t i) {
        RunRecord r = reasoner.solve(strategy, items[i].question);
        r.id = items[i].id;
        r.dataset = items[i].dataset;
        r.gold = items[i].gold;
        return r;
    });
}

int cmd_solve(const SolveOpts& o, const Globals& g, std::ostream& out, std::ostream& err) {
    if (o.question.empty() == o.input.empty()) throw ConfigError("give exactly one of --question or --input");
    const Config config = Config::load(o.config);
    const Strategy strategy = strategy_from_string(o.strategy);
    std::vector<QuestionItem> items;
    if (!o.question.empty())
        items.push_back({"q1", o.question, std::nullopt, o.dataset});
    else
        items = read_records<QuestionItem>(o.input, question_from_json, err);
    if (items.empty()) {
        emit(o.output, "", out);
        return kExitOk;
    }
    const auto records = solve_items(items, config, strategy, o.max_steps, g);
    std::vector<json> rows;
    std::size_t finals = 0;
    for (const auto& r : records) {
        rows.push_back(run_record_to_json(r));
        if (r.stop_reason == StopReason::final) ++finals;
        else err << r.id << ": stopped with " << to_string(r.stop_reason) << (r.error.empty() ? "" : ": " + r.error) << "\n";
    }
    emit(o.output, join_jsonl(rows), out);
    err << "finished " << finals << " of " << records.size() << " questions with a final answer\n";
    return finals == records.size() ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------

std::vector<RunRecord> read_run_records(const std::string& path, std::ostream& err) {
    return read_records<RunRecord>(path, [](const json& j, std::size_t) { return run_record_from_json(j); }, err);
}

struct CompareOpts {
    std::string a, b, csv, jsonl;
};

int cmd_compare(const CompareOpts& o, std::ostream& out, std::ostream& err) {
    const auto a = read_run_records(o.a, err);
    const auto b = read_run_records(o.b, err);
    const Comparison c = compare(a, b);
    const std::string csv = comparison_to_csv(c);
    if (!o.csv.empty()) write_text(o.csv, csv);
    if (!o.jsonl.empty()) write_text(o.jsonl, comparison_to_jsonl(c));
    out << csv;
    return kExitOk;
}

json record_efficiency(const RunRecord& r) {
    json j = {{"id", r.id}, {"strategy", to_string(r.strategy)}, {"dataset", r.dataset}, {"steps", r.step_count()}};
    try {
        const EfficiencyReport rep = report_from_telemetry(r.telemetry);
        j["E_s_per_token"] = rep.E;
        j["total_time_s"] = rep.total_time;
        j["peak_cache_bytes"] = rep.peak_cache_bytes;
        j["mean_cache_bytes"] = rep.mean_cache_bytes;
        j["prompt_length_curve"] = rep.prompt_length_curve;
    } catch (const MetricError& e) {
        j["E_s_per_token"] = nullptr;
        j["note"] = e.what();
    }
    return j;
}

struct ReportOpts {
    std::string input, output;
};

int cmd_report(const ReportOpts& o, std::ostream& out, std::ostream& err) {
    std::vector<json> rows;
    for (const auto& r : read_run_records(o.input, err)) rows.push_back(record_efficiency(r));
    emit(o.output, join_jsonl(rows), out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchOpts {
    std::string params, profile, records, out_dir = ".";
    std::string live_config, live_input;
    double calibrate_E = 0.0;
    std::size_t calibrate_steps = 7;
};

int cmd_bench(const BenchOpts& o, const Globals& g, std::ostream& out, std::ostream& err) {
    CostModelParams params;
    if (!o.params.empty()) params = make_cost_params(Config::load(o.params));
    const bool live = !o.live_config.empty();
    if (o.profile.empty() && o.records.empty() && !live)
        throw ConfigError("bench needs --profile, --records or --live");
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);

    if (!o.profile.empty()) {
        const std::vector<StepProfile> profile =
            o.profile == "reference" ? reference_profile() : profile_from_json(json::parse(read_text(o.profile)));
        if (o.calibrate_E > 0) {
            const std::size_t n = std::min(o.calibrate_steps, profile.size());
            const std::vector<StepProfile> head(profile.begin(), profile.begin() + static_cast<std::ptrdiff_t>(n));
            params.attn_cost_per_context_token = calibrate_attn_cost(Strategy::msr, head, params.base_cost, o.calibrate_E);
            err << "calibrated attn_cost_s = " << params.attn_cost_per_context_token << " on " << n << " MSR steps\n";
        }
        params.validate();
        const EfficiencyReport m = model_run_cost(Strategy::mcot, profile, params);
        const EfficiencyReport s = model_run_cost(Strategy::msr, profile, params);
        json jm = report_to_json(m), js = report_to_json(s);
        jm["strategy"] = "mcot";
        js["strategy"] = "msr";
        jm["kind"] = js["kind"] = "modeled";
        jm["params"] = js["params"] = cost_params_to_json(params);
        write_text((dir / "bench_report.jsonl").string(), jm.dump() + "\n" + js.dump() + "\n");

        std::ostringstream curve;
        curve << "step,mcot_prompt_tokens,msr_prompt_tokens,mcot_cache_bytes,msr_cache_bytes\n";
        for (std::size_t t = 0; t < profile.size(); ++t)
            curve << t + 1 << ',' << m.prompt_length_curve[t] << ',' << s.prompt_length_curve[t] << ','
                  << m.per_step[t].modeled_cache_bytes << ',' << s.per_step[t].modeled_cache_bytes << "\n";
        write_text((dir / "prompt_curve.csv").string(), curve.str());

        std::ostringstream summary;
        summary.precision(10);
        summary << "kind,strategy,E_s_per_token,total_time_s,peak_cache_bytes,mean_cache_bytes\n";
        for (const auto& [name, r] : {std::pair{"mcot", &m}, std::pair{"msr", &s}})
            summary << "modeled," << name << ',' << r->E << ',' << r->total_time << ',' << r->peak_cache_bytes << ','
                    << r->mean_cache_bytes << "\n";
        summary << "modeled,ratio_msr_over_mcot," << s.E / m.E << ',' << s.total_time / m.total_time << ','
                << static_cast<double>(s.peak_cache_bytes) / static_cast<double>(m.peak_cache_bytes) << ','
                << s.mean_cache_bytes / m.mean_cache_bytes << "\n";
        write_text((dir / "bench_summary.csv").string(), summary.str());
        out << summary.str();
    }

    if (!o.records.empty()) {
        std::vector<json> rows;
        for (const auto& r : read_run_records(o.records, err)) {
            json j = record_efficiency(r);
            j["kind"] = "measured";
            rows.push_back(j);
        }
        const std::string text = join_jsonl(rows);
        write_text((dir / "measured_report.jsonl").string(), text);
        out << text;
    }

    if (live) {
        if (o.live_input.empty()) throw ConfigError("--live needs --input");
        const Config config = Config::load(o.live_config);
        const auto items = read_records<QuestionItem>(o.live_input, question_from_json, err);
        if (items.empty()) return kExitOk;
        const auto mcot = solve_items(items, config, Strategy::mcot, 0, g);
        const auto msr = solve_items(items, config, Strategy::msr, 0, g);
        std::vector<json> ra, rb;
        for (const auto& r : mcot) ra.push_back(run_record_to_json(r));
        for (const auto& r : msr) rb.push_back(run_record_to_json(r));
        write_text((dir / "live_mcot.jsonl").string(), join_jsonl(ra));
        write_text((dir / "live_msr.jsonl").string(), join_jsonl(rb));
        const Comparison c = compare(mcot, msr);
        write_text((dir / "live_compare.csv").string(), comparison_to_csv(c));
        write_text((dir / "live_compare.jsonl").string(), comparison_to_jsonl(c));
        out << "measured wall-clock comparison (live backend)\n" << comparison_to_csv(c);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

OriginTrajectory origin_from_record(const json& j, std::size_t line_no) {
    OriginTrajectory o;
    o.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                            : "t" + std::to_string(line_no);
    o.trajectory = trajectory_from_json(j);
    if (o.trajectory.steps.empty()) throw Error("trajectory has no steps");
    if (trim(o.trajectory.answer).empty()) throw Error("trajectory has no answer");
    return o;
}

void write_corpus(const SeedCorpus& c, const std::string& output, const std::string& provenance, std::ostream& out) {
    emit(output, corpus_triplets_jsonl(c), out);
    const std::string side = provenance.empty() ? (output.empty() || output == "-" ? "" : provenance_path_for(output))
                                                : provenance;
    if (!side.empty()) write_text(side, corpus_provenance_jsonl(c));
}

struct SeedOpts {
    std::string config, input, output, provenance, annotator_template, checkpoint, stats;
    std::size_t n_verify = 0, max_iterations = 0;
};

int cmd_build_seed(const SeedOpts& o, const Globals& g, std::ostream& out, std::ostream& err) {
    const Config config = Config::load(o.config);
    const auto origin = read_records<OriginTrajectory>(o.input, origin_from_record, err);
    SeedParams p;
    p.seed = g.seed;
    p.jobs = g.jobs;
    const ReasonerConfig rc = make_reasoner_config(config);
    p.max_steps = rc.max_steps;
    p.max_new_tokens = rc.max_new_tokens;
    p.templates = rc.templates;
    p.n_verify_samples = static_cast<std::size_t>(config.get_int("pipeline", "n_verify_samples", 4));
    p.verify_temperature = config.get_double("pipeline", "verify_temperature", 0.8);
    p.max_iterations = static_cast<std::size_t>(config.get_int("pipeline", "max_iterations", 16));
    p.annotator_template = template_from(config, "pipeline", "annotator_template", default_annotator_template());
    if (o.n_verify) p.n_verify_samples = o.n_verify;
    if (o.max_iterations) p.max_iterations = o.max_iterations;
    if (!o.annotator_template.empty()) p.annotator_template = read_text(o.annotator_template);
    if (!o.checkpoint.empty()) p.checkpoint = o.checkpoint;

    if (origin.empty()) {
        write_corpus({}, o.output, o.provenance, out);
        return kExitOk;
    }
    BackendSet backends = make_backends(config);
    probe_roles(backends, {BackendRole::annotator, BackendRole::verifier});
    auto executor = make_executor(config);

    const SeedResult r = build_seed(origin, backends, *executor, p);
    for (const auto& line : r.log) err << line << "\n";
    write_corpus(r.corpus, o.output, o.provenance, out);

    std::vector<json> rows;
    for (const auto& s : r.stats) {
        json j = iteration_stats_to_json(s);
        j["pass_rate"] = s.verifier_samples ? json(static_cast<double>(s.verifier_passes) / s.verifier_samples)
                                            : json(nullptr);
        rows.push_back(j);
    }
    json summary = {{"iterations", r.iterations()},
                    {"triplets", r.corpus.size()},
                    {"requeue_left", r.requeue.size()},
                    {"origin", origin.size()}};
    rows.push_back(summary);
    const std::string stats = join_jsonl(rows);
    if (!o.stats.empty()) write_text(o.stats, stats);
    err << stats;
    return kExitOk;
}

struct DistillOpts {
    std::string config, input, output, provenance;
    std::size_t max_steps = 0;
};

int cmd_self_distill(const DistillOpts& o, const Globals& g, std::ostream& out, std::ostream& err) {
    const Config config = Config::load(o.config);
    auto pairs = read_records<QuestionAnswer>(
        o.input,
        [](const json& j, std::size_t line_no) {
            QuestionItem q = question_from_json(j, line_no);
            if (!q.gold) throw Error("record has no answer");
            return QuestionAnswer{q.id, q.question, *q.gold};
        },
        err);
    if (pairs.empty()) {
        write_corpus({}, o.output, o.provenance, out);
        return kExitOk;
    }
    BackendSet backends = make_backends(config);
    probe_roles(backends, {BackendRole::solver});
    auto executor = make_executor(config);
    DistillParams p;
    p.reasoner = make_reasoner_config(config);
    p.reasoner.seed = g.seed;
    if (o.max_steps) p.reasoner.max_steps = o.max_steps;
    p.jobs = g.jobs;
    const DistillResult r = self_distill(pairs, backends, *executor, p);
    for (const auto& line : r.log) err << line << "\n";
    write_corpus(r.corpus, o.output, o.provenance, out);
    err << json{{"attempted", r.stats.attempted},
                {"finished", r.stats.finished},
                {"verified", r.stats.verified},
                {"triplets", r.stats.triplets}}
               .dump()
        << "\n";
    return kExitOk;
}

struct DedupOpts {
    std::vector<std::string> inputs;
    std::string output, provenance;
};

int cmd_dedup(const DedupOpts& o, std::ostream& out, std::ostream& err) {
    std::vector<SeedCorpus> corpora;
    std::size_t total = 0;
    for (const auto& path : o.inputs) {
        const auto triplets = read_records<std::pair<Triplet, std::size_t>>(
            path, [](const json& j, std::size_t line_no) { return std::pair{triplet_from_json(j), line_no}; }, err);
        std::vector<Provenance> prov;
        const std::string side = provenance_path_for(path);
        if (fs::exists(side)) {
            std::istringstream in(read_text(side));
            std::string line;
            std::vector<Provenance> all;
            while (std::getline(in, line))
                if (!trim(line).empty()) all.push_back(provenance_from_json(json::parse(line)));
            // Sidecar lines follow triplet lines one to one (blank lines aside).
            std::size_t k = 0;
            std::istringstream tin(read_text(path));
            std::vector<std::size_t> record_index_of_line(1, 0);
            std::size_t ln = 0;
            while (std::getline(tin, line)) {
                ++ln;
                record_index_of_line.push_back(trim(line).empty() ? SIZE_MAX : k++);
            }
            for (const auto& [t, line_no] : triplets) {
                (void)t;
                const std::size_t idx = record_index_of_line.at(line_no);
                if (idx >= all.size()) throw ConfigError(side + " is shorter than " + path);
                prov.push_back(all[idx]);
            }
        } else {
            for (const auto& [t, line_no] : triplets) {
                (void)t;
                prov.push_back(Provenance{path + ":" + std::to_string(line_no), 0, CorpusSource::seed, {}, {}});
            }
        }
        SeedCorpus c;
        for (std::size_t i = 0; i < triplets.size(); ++i) c.add(triplets[i].first, prov[i]);
        total += c.size();
        corpora.push_back(std::move(c));
    }
    const SeedCorpus merged = filter_dedup(corpora);
    write_corpus(merged, o.output, o.provenance, out);
    err << json{{"input", total}, {"kept", merged.size()}, {"removed", total - merged.size()}}.dump() << "\n";
    return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// Wiring

BackendSet make_backends(const Config& config) {
    BackendSet set;
    std::map<std::string, std::shared_ptr<Backend>> built;
    for (BackendRole role : {BackendRole::solver, BackendRole::annotator, BackendRole::verifier}) {
        const std::string sec = to_string(role);
        if (!config.has_section(sec)) continue;
        config.require_known(sec, {"kind", "script", "base_url", "model", "api_key_env", "timeout_s", "max_retries",
                                   "retry_base_delay_s", "retry_max_delay_s", "share"});
        if (auto share = config.get(sec, "share")) {
            auto it = built.find(*share);
            if (it == built.end()) throw ConfigError("[" + sec + "] shares '" + *share + "', which is not defined above it");
            set.bind(role, it->second);
            built[sec] = it->second;
            continue;
        }
        const std::string kind = config.get_string(sec, "kind", "");
        std::shared_ptr<Backend> backend;
        if (kind == "mock") {
            auto script = config.get_path(sec, "script");
            if (!script) throw ConfigError("[" + sec + "] kind = mock needs script");
            backend = MockBackend::from_file(*script);
        } else if (kind == "http") {
            HttpBackendConfig hc;
            hc.base_url = config.get_string(sec, "base_url", "");
            hc.model = config.get_string(sec, "model", "");
            hc.api_key_env = config.get_string(sec, "api_key_env", hc.api_key_env);
            hc.timeout_s = config.get_double(sec, "timeout_s", hc.timeout_s);
            hc.retry.max_retries = static_cast<int>(config.get_int(sec, "max_retries", hc.retry.max_retries));
            hc.retry.base_delay_s = config.get_double(sec, "retry_base_delay_s", hc.retry.base_delay_s);
            hc.retry.max_delay_s = config.get_double(sec, "retry_max_delay_s", hc.retry.max_delay_s);
            backend = std::make_shared<HttpBackend>(hc);
        } else {
            throw ConfigError("[" + sec + "] kind must be mock or http");
        }
        set.bind(role, backend);
        built[sec] = backend;
    }
    return set;
}

std::shared_ptr<Executor> make_executor(const Config& config) {
    const std::string sec = "executor";
    if (!config.has_section(sec)) throw ConfigError("config has no [executor] section");
    config.require_known(sec, {"kind", "script", "runner", "args", "pool_size", "timeout_s", "output_cap_bytes",
                               "kill_grace_s", "max_queue", "queue_timeout_s"});
    const auto cap = static_cast<std::size_t>(config.get_int(sec, "output_cap_bytes", kDefaultOutputCap));
    const std::string kind = config.get_string(sec, "kind", "");
    if (kind == "scripted") {
        auto script = config.get_path(sec, "script");
        if (!script) throw ConfigError("[executor] kind = scripted needs script");
        return ScriptedExecutor::from_file(*script, cap);
    }
    if (kind == "runner") {
        PoolConfig pc;
        auto runner = config.get_path(sec, "runner");
        if (!runner) throw ConfigError("[executor] kind = runner needs runner");
        pc.runner_path = *runner;
        std::istringstream args(config.get_string(sec, "args", ""));
        for (std::string a; args >> a;) pc.runner_args.push_back(a);
        pc.pool_size = static_cast<std::size_t>(config.get_int(sec, "pool_size", 2));
        pc.timeout_s = config.get_double(sec, "timeout_s", pc.timeout_s);
        pc.output_cap_bytes = cap;
        pc.kill_grace_s = config.get_double(sec, "kill_grace_s", pc.kill_grace_s);
        pc.max_queue = static_cast<std::size_t>(config.get_int(sec, "max_queue", 256));
        pc.queue_timeout_s = config.get_double(sec, "queue_timeout_s", pc.queue_timeout_s);
        return std::make_shared<RunnerPool>(pc);
    }
    throw ConfigError("[executor] kind must be scripted or runner");
}

ReasonerConfig make_reasoner_config(const Config& config) {
    config.require_known("reasoner", {"max_steps", "max_new_tokens", "temperature", "mcot_template", "msr_template"});
    ReasonerConfig rc;
    const auto steps = config.get_int("reasoner", "max_steps", static_cast<std::int64_t>(rc.max_steps));
    if (steps < 1) throw ConfigError("[reasoner] max_steps must be >= 1");
    rc.max_steps = static_cast<std::size_t>(steps);
    rc.max_new_tokens = static_cast<int>(config.get_int("reasoner", "max_new_tokens", rc.max_new_tokens));
    if (rc.max_new_tokens < 1) throw ConfigError("[reasoner] max_new_tokens must be >= 1");
    rc.temperature = config.get_double("reasoner", "temperature", rc.temperature);
    rc.templates.mcot = template_from(config, "reasoner", "mcot_template", rc.templates.mcot);
    rc.templates.msr = template_from(config, "reasoner", "msr_template", rc.templates.msr);
    rc.cache_model = make_cost_params(config);
    return rc;
}

CostModelParams make_cost_params(const Config& config) {
    const std::string sec = "cost_model";
    config.require_known(sec, {"layers", "kv_heads", "head_dim", "bytes_per_element", "base_cost_s", "attn_cost_s"});
    CostModelParams p;
    auto positive = [&](const char* key, std::uint64_t fallback) {
        const auto v = config.get_int(sec, key, static_cast<std::int64_t>(fallback));
        if (v < 1) throw ConfigError(std::string("[cost_model] ") + key + " must be positive");
        return static_cast<std::uint64_t>(v);
    };
    p.layers = positive("layers", p.layers);
    p.kv_heads = positive("kv_heads", p.kv_heads);
    p.head_dim = positive("head_dim", p.head_dim);
    p.bytes_per_element = positive("bytes_per_element", p.bytes_per_element);
    p.base_cost = config.get_double(sec, "base_cost_s", p.base_cost);
    p.attn_cost_per_context_token = config.get_double(sec, "attn_cost_s", p.attn_cost_per_context_token);
    p.validate();
    return p;
}

std::string provenance_path_for(const std::string& triplets_path) {
    const std::string ext = ".jsonl";
    if (triplets_path.size() > ext.size() && triplets_path.compare(triplets_path.size() - ext.size(), ext.size(), ext) == 0)
        return triplets_path.substr(0, triplets_path.size() - ext.size()) + ".provenance.jsonl";
    return triplets_path + ".provenance.jsonl";
}

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Markov chain-of-thought reasoning engine", "mcot"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Base seed for all sampling (default 0)");
    app.add_option("--jobs", g.jobs, "Worker threads across questions or trajectories")->check(CLI::PositiveNumber);

    SolveOpts so;
    auto* solve = app.add_subcommand("solve", "Solve questions and write one run record per question");
    solve->add_option("--config", so.config, "Backend/executor config file")->required();
    solve->add_option("--question", so.question, "A single question");
    solve->add_option("--input", so.input, "JSONL of {id, question, gold?, dataset?}");
    solve->add_option("--output,-o", so.output, "Output JSONL (default stdout)");
    solve->add_option("--strategy", so.strategy, "mcot or msr")->check(CLI::IsMember({"mcot", "msr"}));
    solve->add_option("--max-steps", so.max_steps, "Step cap (default from config, else 8)");
    solve->add_option("--dataset", so.dataset, "Dataset label for --question");

    CompareOpts co;
    auto* cmp = app.add_subcommand("compare", "Compare two run-record files question by question");
    cmp->add_option("--a", co.a, "First record file (e.g. MCoT runs)")->required();
    cmp->add_option("--b", co.b, "Second record file (e.g. MSR runs)")->required();
    cmp->add_option("--csv", co.csv, "Also write the table as CSV");
    cmp->add_option("--jsonl", co.jsonl, "Also write the table as JSONL");

    ReportOpts ro;
    auto* rep = app.add_subcommand("report", "Per-record efficiency report from run records");
    rep->add_option("--input", ro.input, "Run-record JSONL")->required();
    rep->add_option("--output,-o", ro.output, "Output JSONL (default stdout)");

    BenchOpts bo;
    auto* bench = app.add_subcommand("bench", "Modeled and measured efficiency reports");
    bench->add_option("--params", bo.params, "Cost-model config file ([cost_model] section)");
    bench->add_option("--profile", bo.profile, "Token profile JSON, or 'reference'");
    bench->add_option("--records", bo.records, "Run-record JSONL with measured telemetry");
    bench->add_option("--live", bo.live_config, "Config file of a live backend; runs both strategies");
    bench->add_option("--input", bo.live_input, "Questions for --live");
    bench->add_option("--calibrate-E", bo.calibrate_E, "Fit attn_cost so modeled MSR E equals this");
    bench->add_option("--calibrate-steps", bo.calibrate_steps, "MSR steps used for --calibrate-E (default 7)");
    bench->add_option("--out-dir", bo.out_dir, "Directory for report files");

    SeedOpts seo;
    auto* seed = app.add_subcommand("build-seed", "Build the seed corpus from multi-step trajectories");
    seed->add_option("--config", seo.config, "Backend/executor config file")->required();
    seed->add_option("--input", seo.input, "Trajectory JSONL")->required();
    seed->add_option("--output,-o", seo.output, "Triplet JSONL (default stdout)");
    seed->add_option("--provenance", seo.provenance, "Provenance sidecar JSONL");
    seed->add_option("--n-verify", seo.n_verify, "Verifier samples per reduction question (default 4)");
    seed->add_option("--annotator-template", seo.annotator_template, "Annotator prompt template file");
    seed->add_option("--max-iterations", seo.max_iterations, "Safety cap on iterations (default 16)");
    seed->add_option("--checkpoint", seo.checkpoint, "Checkpoint file; resumed from when present");
    seed->add_option("--stats", seo.stats, "Write per-iteration stats JSONL here");

    DistillOpts dso;
    auto* distill = app.add_subcommand("self-distill", "Keep verified MCoT chains as triplets");
    distill->add_option("--config", dso.config, "Backend/executor config file")->required();
    distill->add_option("--input", dso.input, "JSONL of {id, question, answer}")->required();
    distill->add_option("--output,-o", dso.output, "Triplet JSONL (default stdout)");
    distill->add_option("--provenance", dso.provenance, "Provenance sidecar JSONL");
    distill->add_option("--max-steps", dso.max_steps, "Step cap");

    DedupOpts ddo;
    auto* dedup = app.add_subcommand("dedup", "Union triplet corpora without duplicates");
    dedup->add_option("--input", ddo.inputs, "Triplet JSONL (repeatable)")->required();
    dedup->add_option("--output,-o", ddo.output, "Triplet JSONL (default stdout)");
    dedup->add_option("--provenance", ddo.provenance, "Provenance sidecar JSONL");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (solve->parsed()) return cmd_solve(so, g, out, err);
        if (cmp->parsed()) return cmd_compare(co, out, err);
        if (rep->parsed()) return cmd_report(ro, out, err);
        if (bench->parsed()) return cmd_bench(bo, g, out, err);
        if (seed->parsed()) return cmd_build_seed(seo, g, out, err);
        if (distill->parsed()) return cmd_self_distill(dso, g, out, err);
        if (dedup->parsed()) return cmd_dedup(ddo, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace mcot
