#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mcot/backend.hpp"
#include "mcot/code_exec.hpp"
#include "mcot/config.hpp"
#include "mcot/reasoners.hpp"
#include "mcot/telemetry.hpp"

namespace mcot {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point behind the `mcot` binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Wiring from a parsed config file; exposed for tests.
BackendSet make_backends(const Config& config);
std::shared_ptr<Executor> make_executor(const Config& config);
ReasonerConfig make_reasoner_config(const Config& config);
CostModelParams make_cost_params(const Config& config);

/// "x.jsonl" -> "x.provenance.jsonl"; other names get ".provenance.jsonl" appended.
std::string provenance_path_for(const std::string& triplets_path);

}  // namespace mcot
