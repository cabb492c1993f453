#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

namespace mcot {

struct StepTelemetry {
    std::size_t step_index = 1;
    std::size_t prompt_tokens = 0;      // prompt of the step's first request
    std::size_t completion_tokens = 0;  // all tokens generated during the step
    double decode_time = 0.0;           // seconds spent in generation
    double exec_time = 0.0;             // seconds spent running the snippet
    std::uint64_t modeled_cache_bytes = 0;
    std::size_t context_tokens = 0;     // largest context held during the step

    bool operator==(const StepTelemetry&) const = default;
};

nlohmann::json telemetry_to_json(const StepTelemetry& t);
StepTelemetry telemetry_from_json(const nlohmann::json& j);

/// Parametric KV-cache and decode-time model. Defaults describe a 7B
/// decoder (30 layers, 32 KV heads of dim 128, 16-bit cache).
struct CostModelParams {
    std::uint64_t layers = 30;
    std::uint64_t kv_heads = 32;
    std::uint64_t head_dim = 128;
    std::uint64_t bytes_per_element = 2;
    double base_cost = 0.5;                      // seconds per generated token
    double attn_cost_per_context_token = 5e-4;   // seconds per token per context token

    /// 2 (K and V) x layers x kv_heads x head_dim x bytes_per_element.
    std::uint64_t kv_bytes_per_token() const { return 2 * layers * kv_heads * head_dim * bytes_per_element; }

    /// Throws ConfigError unless every field is positive.
    void validate() const;
};

nlohmann::json cost_params_to_json(const CostModelParams& p);

}  // namespace mcot
