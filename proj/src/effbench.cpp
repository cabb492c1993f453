#include "mcot/effbench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mcot/errors.hpp"

namespace mcot {

using nlohmann::json;

double metric_E(const std::vector<StepTelemetry>& telemetry) {
    if (telemetry.empty()) throw MetricError("E is undefined for a run with no steps");
    std::vector<double> per_token;
    per_token.reserve(telemetry.size());
    for (const auto& t : telemetry) {
        if (t.completion_tokens == 0)
            throw MetricError("E is undefined: step " + std::to_string(t.step_index) + " generated no tokens");
        per_token.push_back(t.decode_time / static_cast<double>(t.completion_tokens));
    }
    // Summing in sorted order makes the result independent of step order.
    std::sort(per_token.begin(), per_token.end());
    double sum = 0.0;
    for (double v : per_token) sum += v;
    return sum / static_cast<double>(telemetry.size());
}

EfficiencyReport report_from_telemetry(const std::vector<StepTelemetry>& telemetry) {
    EfficiencyReport r;
    r.per_step = telemetry;
    r.E = metric_E(telemetry);
    double cache_sum = 0.0;
    for (const auto& t : telemetry) {
        r.total_time += t.decode_time;
        r.peak_cache_bytes = std::max(r.peak_cache_bytes, t.modeled_cache_bytes);
        cache_sum += static_cast<double>(t.modeled_cache_bytes);
        r.prompt_length_curve.push_back(t.prompt_tokens);
    }
    r.mean_cache_bytes = cache_sum / static_cast<double>(telemetry.size());
    return r;
}

json report_to_json(const EfficiencyReport& r) {
    json steps = json::array();
    for (const auto& t : r.per_step) steps.push_back(telemetry_to_json(t));
    return {{"E_s_per_token", r.E},
            {"total_time_s", r.total_time},
            {"peak_cache_bytes", r.peak_cache_bytes},
            {"mean_cache_bytes", r.mean_cache_bytes},
            {"prompt_length_curve", r.prompt_length_curve},
            {"per_step", steps}};
}

// ---------------------------------------------------------------------------
// Cost model

namespace {

void require_profile(const std::vector<StepProfile>& profile) {
    if (profile.empty()) throw ConfigError("token profile is empty");
}

// Context present before step t generates its first token.
std::vector<std::uint64_t> prefixes(Strategy strategy, const std::vector<StepProfile>& profile) {
    std::vector<std::uint64_t> out;
    std::uint64_t history = 0;
    for (const auto& s : profile) {
        if (strategy == Strategy::msr) {
            out.push_back(history + s.prompt_tokens_added);
            history += s.prompt_tokens_added + s.completion_tokens;
        } else {
            out.push_back(s.prompt_tokens_added);
        }
    }
    return out;
}

Rational exact(double v) { return Rational(v); }

}  // namespace

std::vector<StepContext> model_contexts(Strategy strategy, const std::vector<StepProfile>& profile) {
    const auto pre = prefixes(strategy, profile);
    std::vector<StepContext> out;
    for (std::size_t t = 0; t < profile.size(); ++t) {
        const std::uint64_t c = profile[t].completion_tokens;
        const std::uint64_t tri = c == 0 ? 0 : c * (c - 1) / 2;
        out.push_back({pre[t], c, c * pre[t] + tri});
    }
    return out;
}

std::vector<StepContext> simulate_contexts(Strategy strategy, const std::vector<StepProfile>& profile) {
    std::vector<StepContext> out;
    std::uint64_t context = 0;
    for (const auto& s : profile) {
        if (strategy == Strategy::mcot) context = 0;  // cache cleared at every reduction
        context += s.prompt_tokens_added;
        StepContext sc{context, s.completion_tokens, 0};
        for (std::uint64_t k = 0; k < s.completion_tokens; ++k) {
            sc.context_sum += context;
            ++context;
        }
        out.push_back(sc);
    }
    return out;
}

std::vector<Rational> model_step_times_exact(Strategy strategy, const std::vector<StepProfile>& profile,
                                             const CostModelParams& params) {
    const Rational base = exact(params.base_cost), attn = exact(params.attn_cost_per_context_token);
    std::vector<Rational> out;
    for (const auto& sc : model_contexts(strategy, profile))
        out.push_back(base * Rational(sc.tokens) + attn * Rational(sc.context_sum));
    return out;
}

std::vector<Rational> simulate_step_times_exact(Strategy strategy, const std::vector<StepProfile>& profile,
                                                const CostModelParams& params) {
    const Rational base = exact(params.base_cost), attn = exact(params.attn_cost_per_context_token);
    std::vector<Rational> out;
    std::uint64_t context = 0;
    for (const auto& s : profile) {
        if (strategy == Strategy::mcot) context = 0;
        context += s.prompt_tokens_added;
        Rational time = 0;
        for (std::uint64_t k = 0; k < s.completion_tokens; ++k) time += base + attn * Rational(context++);
        out.push_back(time);
    }
    return out;
}

EfficiencyReport model_run_cost(Strategy strategy, const std::vector<StepProfile>& profile,
                                const CostModelParams& params) {
    require_profile(profile);
    params.validate();
    const auto contexts = model_contexts(strategy, profile);
    std::vector<StepTelemetry> steps;
    for (std::size_t t = 0; t < contexts.size(); ++t) {
        const auto& sc = contexts[t];
        StepTelemetry st;
        st.step_index = t + 1;
        st.prompt_tokens = sc.prefix;
        st.completion_tokens = sc.tokens;
        st.decode_time = params.base_cost * static_cast<double>(sc.tokens) +
                         params.attn_cost_per_context_token * static_cast<double>(sc.context_sum);
        st.context_tokens = sc.prefix + sc.tokens;
        st.modeled_cache_bytes = params.kv_bytes_per_token() * st.context_tokens;
        steps.push_back(st);
    }
    return report_from_telemetry(steps);
}

double calibrate_attn_cost(Strategy strategy, const std::vector<StepProfile>& profile, double base_cost,
                           double target_E) {
    require_profile(profile);
    // E = base + attn * mean_t(context_sum_t / tokens_t), linear in attn.
    double mean_ctx = 0.0;
    for (const auto& sc : model_contexts(strategy, profile)) {
        if (sc.tokens == 0) throw MetricError("profile step with zero completion tokens");
        mean_ctx += static_cast<double>(sc.context_sum) / static_cast<double>(sc.tokens);
    }
    mean_ctx /= static_cast<double>(profile.size());
    const double attn = (target_E - base_cost) / mean_ctx;
    if (!(mean_ctx > 0) || !(attn > 0)) throw ConfigError("no positive attn_cost reaches the target E");
    return attn;
}

std::vector<StepProfile> reference_profile(std::size_t steps) {
    return std::vector<StepProfile>(steps, StepProfile{224, 128});
}

std::vector<StepProfile> profile_from_json(const json& j) {
    const json& arr = j.is_object() ? j.at("steps") : j;
    if (!arr.is_array()) throw ConfigError("profile must be an array of steps");
    std::vector<StepProfile> out;
    for (const auto& s : arr) {
        if (s.is_array())
            out.push_back({s.at(0).get<std::uint64_t>(), s.at(1).get<std::uint64_t>()});
        else
            out.push_back({s.at("prompt_tokens_added").get<std::uint64_t>(), s.at("completion_tokens").get<std::uint64_t>()});
    }
    require_profile(out);
    return out;
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

double ratio(double a, double b) {
    if (a == 0.0 && b == 0.0) return 1.0;
    if (a == 0.0) return INFINITY;
    return b / a;
}

std::optional<double> ratio(const std::optional<double>& a, const std::optional<double>& b) {
    if (!a || !b) return std::nullopt;
    return ratio(*a, *b);
}

std::string record_key(const RunRecord& r) { return r.id.empty() ? r.question : r.id; }

struct Acc {
    std::size_t n = 0;
    double E_sum = 0;
    std::size_t E_n = 0;
    double peak_sum = 0, mean_sum = 0, steps_sum = 0;
    std::size_t graded = 0, correct = 0;

    void add(const RunRecord& r, double tol) {
        ++n;
        steps_sum += static_cast<double>(r.step_count());
        if (!r.telemetry.empty()) {
            const auto rep = [&]() -> std::optional<EfficiencyReport> {
                try {
                    return report_from_telemetry(r.telemetry);
                } catch (const MetricError&) {
                    return std::nullopt;
                }
            }();
            if (rep) {
                E_sum += rep->E;
                ++E_n;
            }
            std::uint64_t peak = 0;
            double mean = 0;
            for (const auto& t : r.telemetry) {
                peak = std::max(peak, t.modeled_cache_bytes);
                mean += static_cast<double>(t.modeled_cache_bytes);
            }
            peak_sum += static_cast<double>(peak);
            mean_sum += mean / static_cast<double>(r.telemetry.size());
        }
        if (r.gold) {
            ++graded;
            if (r.final_answer && equivalent(*r.final_answer, *r.gold, tol)) ++correct;
        }
    }

    std::optional<double> E() const { return E_n ? std::optional<double>(E_sum / E_n) : std::nullopt; }
    std::optional<double> accuracy() const {
        return graded ? std::optional<double>(static_cast<double>(correct) / graded) : std::nullopt;
    }
};

ComparisonRow make_row(const std::string& dataset, const Acc& a, const Acc& b) {
    ComparisonRow row;
    row.dataset = dataset;
    row.questions = a.n;
    row.E_a = a.E();
    row.E_b = b.E();
    row.peak_cache_a = a.n ? a.peak_sum / a.n : 0;
    row.peak_cache_b = b.n ? b.peak_sum / b.n : 0;
    row.mean_cache_a = a.n ? a.mean_sum / a.n : 0;
    row.mean_cache_b = b.n ? b.mean_sum / b.n : 0;
    row.accuracy_a = a.accuracy();
    row.accuracy_b = b.accuracy();
    row.mean_steps_a = a.n ? a.steps_sum / a.n : 0;
    row.mean_steps_b = b.n ? b.steps_sum / b.n : 0;
    return row;
}

}  // namespace

std::optional<double> ComparisonRow::E_ratio() const { return ratio(E_a, E_b); }
double ComparisonRow::peak_cache_ratio() const { return ratio(peak_cache_a, peak_cache_b); }
std::optional<double> ComparisonRow::accuracy_ratio() const { return ratio(accuracy_a, accuracy_b); }

Comparison compare(const std::vector<RunRecord>& records_a, const std::vector<RunRecord>& records_b, double tol) {
    if (records_a.empty() || records_b.empty()) throw AlignmentError("cannot compare empty record sets");
    std::map<std::string, const RunRecord*> a, b;
    for (const auto& r : records_a)
        if (!a.emplace(record_key(r), &r).second) throw AlignmentError("duplicate record key in first set: " + record_key(r));
    for (const auto& r : records_b)
        if (!b.emplace(record_key(r), &r).second) throw AlignmentError("duplicate record key in second set: " + record_key(r));
    for (const auto& [k, _] : a)
        if (!b.count(k)) throw AlignmentError("record missing from second set: " + k);
    for (const auto& [k, _] : b)
        if (!a.count(k)) throw AlignmentError("record missing from first set: " + k);

    std::map<std::string, std::pair<Acc, Acc>> per;
    std::pair<Acc, Acc> all;
    for (const auto& [k, ra] : a) {
        const RunRecord* rb = b.at(k);
        auto& slot = per[ra->dataset];
        slot.first.add(*ra, tol);
        slot.second.add(*rb, tol);
        all.first.add(*ra, tol);
        all.second.add(*rb, tol);
    }
    Comparison c;
    c.label_a = to_string(records_a.front().strategy);
    c.label_b = to_string(records_b.front().strategy);
    for (const auto& [ds, accs] : per) c.rows.push_back(make_row(ds, accs.first, accs.second));
    c.rows.push_back(make_row("all", all.first, all.second));
    return c;
}

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return "inf";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string{}; }

json jnum(const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(nullptr); }

}  // namespace

std::string comparison_to_csv(const Comparison& c) {
    std::ostringstream os;
    const std::string& a = c.label_a;
    const std::string& b = c.label_b;
    os << "dataset,questions,E_" << a << ",E_" << b << ",E_ratio,peak_cache_" << a << ",peak_cache_" << b
       << ",peak_cache_ratio,mean_cache_" << a << ",mean_cache_" << b << ",accuracy_" << a << ",accuracy_" << b
       << ",mean_steps_" << a << ",mean_steps_" << b << "\n";
    for (const auto& r : c.rows) {
        os << r.dataset << ',' << r.questions << ',' << fmt(r.E_a) << ',' << fmt(r.E_b) << ',' << fmt(r.E_ratio())
           << ',' << fmt(r.peak_cache_a) << ',' << fmt(r.peak_cache_b) << ',' << fmt(r.peak_cache_ratio()) << ','
           << fmt(r.mean_cache_a) << ',' << fmt(r.mean_cache_b) << ',' << fmt(r.accuracy_a) << ','
           << fmt(r.accuracy_b) << ',' << fmt(r.mean_steps_a) << ',' << fmt(r.mean_steps_b) << "\n";
    }
    return os.str();
}

std::string comparison_to_jsonl(const Comparison& c) {
    std::string out;
    for (const auto& r : c.rows) {
        json j = {{"dataset", r.dataset},
                  {"questions", r.questions},
                  {"label_a", c.label_a},
                  {"label_b", c.label_b},
                  {"E_a", jnum(r.E_a)},
                  {"E_b", jnum(r.E_b)},
                  {"E_ratio", jnum(r.E_ratio())},
                  {"peak_cache_bytes_a", r.peak_cache_a},
                  {"peak_cache_bytes_b", r.peak_cache_b},
                  {"peak_cache_ratio", jnum(r.peak_cache_ratio())},
                  {"mean_cache_bytes_a", r.mean_cache_a},
                  {"mean_cache_bytes_b", r.mean_cache_b},
                  {"accuracy_a", jnum(r.accuracy_a)},
                  {"accuracy_b", jnum(r.accuracy_b)},
                  {"mean_steps_a", r.mean_steps_a},
                  {"mean_steps_b", r.mean_steps_b}};
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace mcot
