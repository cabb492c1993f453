#include "mcot/telemetry.hpp"

#include "mcot/errors.hpp"

namespace mcot {

using nlohmann::json;

json telemetry_to_json(const StepTelemetry& t) {
    return {{"step_index", t.step_index},
            {"prompt_tokens", t.prompt_tokens},
            {"completion_tokens", t.completion_tokens},
            {"decode_time_s", t.decode_time},
            {"exec_time_s", t.exec_time},
            {"modeled_cache_bytes", t.modeled_cache_bytes},
            {"context_tokens", t.context_tokens}};
}

StepTelemetry telemetry_from_json(const json& j) {
    StepTelemetry t;
    t.step_index = j.at("step_index").get<std::size_t>();
    t.prompt_tokens = j.value("prompt_tokens", std::size_t{0});
    t.completion_tokens = j.value("completion_tokens", std::size_t{0});
    t.decode_time = j.value("decode_time_s", 0.0);
    t.exec_time = j.value("exec_time_s", 0.0);
    t.modeled_cache_bytes = j.value("modeled_cache_bytes", std::uint64_t{0});
    t.context_tokens = j.value("context_tokens", std::size_t{0});
    if (t.step_index < 1) throw Error("telemetry step_index must be >= 1");
    if (t.decode_time < 0 || t.exec_time < 0) throw Error("telemetry times must be >= 0");
    return t;
}

void CostModelParams::validate() const {
    if (layers == 0 || kv_heads == 0 || head_dim == 0 || bytes_per_element == 0)
        throw ConfigError("cost model dimensions must be positive");
    if (!(base_cost > 0) || !(attn_cost_per_context_token > 0))
        throw ConfigError("cost model base_cost and attn_cost must be positive");
}

json cost_params_to_json(const CostModelParams& p) {
    return {{"layers", p.layers},
            {"kv_heads", p.kv_heads},
            {"head_dim", p.head_dim},
            {"bytes_per_element", p.bytes_per_element},
            {"base_cost_s", p.base_cost},
            {"attn_cost_s", p.attn_cost_per_context_token},
            {"kv_bytes_per_token", p.kv_bytes_per_token()}};
}

}  // namespace mcot
