#pragma once

// Seed-corpus construction with the independence test, self-distillation and
// the dedup filter.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcot/backend.hpp"
#include "mcot/chain.hpp"
#include "mcot/code_exec.hpp"
#include "mcot/reasoners.hpp"
#include "mcot/verifier.hpp"

namespace mcot {

enum class CorpusSource { seed, self_distill };

const char* to_string(CorpusSource s);
CorpusSource corpus_source_from_string(std::string_view text);

struct Provenance {
    std::string origin_id;
    std::size_t iteration = 0;
    CorpusSource source = CorpusSource::seed;
    // Final answer of the verifier sample that accepted a Reduce triplet.
    std::optional<std::string> verifier_answer;
    std::optional<std::string> gold;

    bool operator==(const Provenance&) const = default;
};

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

/// Triplets with one provenance entry each (same index).
struct SeedCorpus {
    std::vector<Triplet> triplets;
    std::vector<Provenance> provenance;

    std::size_t size() const { return triplets.size(); }
    void add(Triplet t, Provenance p);
};

struct OriginTrajectory {
    std::string id;
    Trajectory trajectory;
};

struct SeedParams {
    std::size_t n_verify_samples = 4;
    double verify_temperature = 0.8;
    int max_new_tokens = 1024;
    std::size_t max_steps = kDefaultMaxSteps;
    std::size_t max_iterations = 16;
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    double tol = kDefaultRelTol;
    // Prompt for the annotator; placeholders {question}, {step}, {answer}.
    std::string annotator_template;
    PromptTemplates templates;
    // Written after every iteration when set; resumed from when it exists.
    std::optional<std::filesystem::path> checkpoint;
};

/// Default annotator template (templates/annotator.txt holds the same text).
const std::string& default_annotator_template();

struct IterationStats {
    std::size_t iteration = 0;
    std::size_t processed = 0;
    std::size_t finals = 0;
    std::size_t reduces = 0;
    std::size_t requeued = 0;
    std::size_t dropped_annotator = 0;
    std::size_t failed_independence = 0;
    std::size_t not_requeued = 0;  // passed, but no passing sample was shorter
    std::size_t verifier_samples = 0;
    std::size_t verifier_passes = 0;

    bool operator==(const IterationStats&) const = default;
};

nlohmann::json iteration_stats_to_json(const IterationStats& s);
IterationStats iteration_stats_from_json(const nlohmann::json& j);

struct SeedResult {
    SeedCorpus corpus;
    std::vector<OriginTrajectory> requeue;  // left over when max_iterations is hit
    std::vector<IterationStats> stats;
    std::vector<std::string> log;
    std::size_t iterations() const { return stats.size(); }
};

/// The verifier endpoint could not be reached; progress up to the last
/// finished iteration is in the checkpoint.
struct PipelineAborted : Error {
    using Error::Error;
};

/// Iteration k processes every pending trajectory. T = 1 yields a Final
/// triplet. For T > 1 the annotator proposes a reduction question q2 from
/// (q1, s1); the verifier samples n full-history solutions of q2 and the
/// Reduce triplet is kept if any sample's answer matches the gold answer. The
/// shortest passing sample with 1 <= T' < T becomes the requeued trajectory.
/// Requeued trajectories of length 1 are finalized at once, so a run stops
/// when no pending trajectory is longer than one step.
SeedResult build_seed(const std::vector<OriginTrajectory>& origin, const BackendSet& backends, Executor& executor,
                      const SeedParams& params);

struct QuestionAnswer {
    std::string id;
    std::string question;
    std::string answer;
};

struct DistillParams {
    ReasonerConfig reasoner;
    std::size_t jobs = 1;
    double tol = kDefaultRelTol;
};

struct DistillStats {
    std::size_t attempted = 0;
    std::size_t finished = 0;
    std::size_t verified = 0;
    std::size_t triplets = 0;
};

struct DistillResult {
    SeedCorpus corpus;
    DistillStats stats;
    std::vector<std::string> log;
};

/// Solves each question with MCoT and keeps the chains whose final answer
/// matches the gold answer, decomposed into triplets.
DistillResult self_distill(const std::vector<QuestionAnswer>& pairs, const BackendSet& backends, Executor& executor,
                           const DistillParams& params);

/// Whitespace-insensitive identity of a triplet.
std::string dedup_key(const Triplet& t);

/// Union without duplicates. Seed entries win over self-distilled ones; within
/// one source the earliest occurrence wins.
SeedCorpus filter_dedup(const std::vector<SeedCorpus>& corpora);

// JSONL helpers for the corpus files.
std::string corpus_triplets_jsonl(const SeedCorpus& c);
std::string corpus_provenance_jsonl(const SeedCorpus& c);

}  // namespace mcot
