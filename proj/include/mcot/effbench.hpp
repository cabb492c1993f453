#pragma once

// Decode-efficiency measurement (metric E), prompt-length curves and a
// parametric KV-cache / decode-time model contrasting MCoT with MSR.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mcot/reasoners.hpp"
#include "mcot/telemetry.hpp"
#include "mcot/verifier.hpp"

namespace mcot {

/// Mean over steps of decode_time / completion_tokens, in seconds per token.
/// Throws MetricError on an empty list or a step with zero completion tokens.
double metric_E(const std::vector<StepTelemetry>& telemetry);

struct EfficiencyReport {
    std::vector<StepTelemetry> per_step;
    double E = 0.0;
    double total_time = 0.0;
    std::uint64_t peak_cache_bytes = 0;
    // Mean over steps of each step's cache footprint.
    double mean_cache_bytes = 0.0;
    std::vector<std::size_t> prompt_length_curve;
};

nlohmann::json report_to_json(const EfficiencyReport& report);

/// Report over measured telemetry (one run).
EfficiencyReport report_from_telemetry(const std::vector<StepTelemetry>& telemetry);

struct StepProfile {
    std::uint64_t prompt_tokens_added = 0;
    std::uint64_t completion_tokens = 0;
};

/// Integer view of one modeled step: context before the first generated token
/// and the sum of context lengths seen by each generated token.
struct StepContext {
    std::uint64_t prefix = 0;
    std::uint64_t tokens = 0;
    std::uint64_t context_sum = 0;

    bool operator==(const StepContext&) const = default;
};

/// Closed form: context_sum = tokens * prefix + tokens * (tokens - 1) / 2.
std::vector<StepContext> model_contexts(Strategy strategy, const std::vector<StepProfile>& profile);

/// Same quantities by walking every generated token.
std::vector<StepContext> simulate_contexts(Strategy strategy, const std::vector<StepProfile>& profile);

/// Per-step decode time as an exact rational, closed form and per-token sum.
std::vector<Rational> model_step_times_exact(Strategy strategy, const std::vector<StepProfile>& profile,
                                             const CostModelParams& params);
std::vector<Rational> simulate_step_times_exact(Strategy strategy, const std::vector<StepProfile>& profile,
                                                const CostModelParams& params);

/// Modeled run. Each generated token costs base_cost + attn_cost * context.
/// Throws ConfigError on an empty profile or invalid params.
EfficiencyReport model_run_cost(Strategy strategy, const std::vector<StepProfile>& profile,
                                const CostModelParams& params);

/// attn_cost making the modeled E of `strategy` over `profile` equal target_E
/// for the given base_cost. Throws ConfigError when no positive value exists.
double calibrate_attn_cost(Strategy strategy, const std::vector<StepProfile>& profile, double base_cost,
                           double target_E);

/// Eight steps of 224 prompt tokens and 128 completion tokens.
std::vector<StepProfile> reference_profile(std::size_t steps = 8);

std::vector<StepProfile> profile_from_json(const nlohmann::json& j);

struct ComparisonRow {
    std::string dataset;
    std::size_t questions = 0;
    std::optional<double> E_a, E_b;
    double peak_cache_a = 0, peak_cache_b = 0;
    double mean_cache_a = 0, mean_cache_b = 0;
    std::optional<double> accuracy_a, accuracy_b;
    double mean_steps_a = 0, mean_steps_b = 0;

    // b / a; 0/0 is 1.
    std::optional<double> E_ratio() const;
    double peak_cache_ratio() const;
    std::optional<double> accuracy_ratio() const;
};

struct Comparison {
    std::string label_a = "a";
    std::string label_b = "b";
    std::vector<ComparisonRow> rows;  // per dataset, then "all"
};

/// Records are paired by id (question text when id is empty). Throws
/// AlignmentError on empty input or differing key sets.
Comparison compare(const std::vector<RunRecord>& records_a, const std::vector<RunRecord>& records_b,
                   double tol = kDefaultRelTol);

std::string comparison_to_csv(const Comparison& c);
std::string comparison_to_jsonl(const Comparison& c);

}  // namespace mcot
