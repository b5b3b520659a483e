#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adret/backend.hpp"
#include "adret/corpus.hpp"
#include "adret/env.hpp"
#include "adret/integrate.hpp"
#include "adret/policy.hpp"
#include "adret/rsus.hpp"
#include "adret/trace.hpp"

namespace adret::harness {

/// Normalized exact-match / token-F1 answer metrics. Normalization strips
/// articles and punctuation, lowercases and collapses whitespace; F1 uses
/// multiset token overlap.
std::pair<int, double> answer_metrics(const std::string& prediction, const std::string& gold);

std::string normalize_answer(const std::string& text);

enum class StrategyKind { none, single, fixed_interval, naive_interleave, adaptive };

struct StrategySpec {
    StrategyKind kind = StrategyKind::none;
    int interval = 1;                          // fixed_interval period m
    bool per_sentence = false;                 // fixed_interval at sentence instead of step level
    const policy::PolicyModel* model = nullptr;  // adaptive only

    /// Parse "none | single | fixed:m | naive | adaptive".
    static StrategySpec parse(const std::string& text);
    std::string name() const;
};

/// Everything an episode needs besides the strategy and the backend.
struct PipelineConfig {
    rsus::RsusConfig rsus;
    integrate::CompressionConfig compression;
    integrate::LatencyModel latency;
    trace::SegmenterModel segmenter = trace::SegmenterModel::bundled();
    int top_k = corpus::kDefaultTopK;
    std::size_t cache_capacity = 32;
    int step_cap = 32;
    int max_retrievals = policy::kMaxRetrievalsPerEpisode;
};

/// Passage texts addressable by id, for compression of retrieval results.
class PassageStore {
public:
    explicit PassageStore(std::vector<corpus::Passage> passages);

    const corpus::Passage& at(const std::string& id) const;
    const std::vector<corpus::Passage>& all() const { return passages_; }

private:
    std::vector<corpus::Passage> passages_;
    std::map<std::string, std::size_t> by_id_;
};

struct Episode {
    std::string question_id;
    std::string question;
    std::string gold_answer;
    int hops = 0;
    std::uint64_t seed = 0;
    std::vector<trace::ReasoningStep> steps;
    std::vector<integrate::RetrievalEvent> events;
    std::string final_answer;
    std::size_t token_count = 0;
    int em = 0;
    double f1 = 0.0;
    double charged_latency_ms = 0.0;
    bool answered = false;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_lookups = 0;
    std::uint64_t prefetches_issued = 0;
    WarningLog warnings;
};

/// Run one question end-to-end under a strategy: backend step, segment,
/// decide, optionally retrieve/compress/inject, until the chain finishes or
/// the step cap is reached.
Episode run_episode(const StrategySpec& strategy, ReasoningBackend& backend,
                    const corpus::CorpusIndex& index, const PassageStore& passages,
                    const PipelineConfig& config, const env::SyntheticQuestion& question,
                    std::uint64_t seed);

struct MetricsReport {
    double em = 0.0;
    double f1 = 0.0;
    double avg_calls = 0.0;
    std::optional<double> f1_per_call;
    double avg_charged_latency_ms = 0.0;
    double avg_tokens = 0.0;
    double cost_per_query = 0.0;
    double cache_hit_rate = 0.0;
    std::map<int, double> f1_by_hops;
    std::array<std::uint64_t, 10> position_histogram{};  // fraction-of-chain bins
    std::size_t episodes = 0;
    std::uint64_t total_events = 0;
};

struct EpisodeRow {
    std::uint64_t seed = 0;
    std::string question_id;
    int hops = 0;
    int em = 0;
    double f1 = 0.0;
    std::size_t calls = 0;
    double charged_latency_ms = 0.0;
    std::size_t tokens = 0;
};

struct BenchmarkReport {
    std::string strategy;
    std::vector<std::uint64_t> seeds;
    MetricsReport overall;
    std::vector<std::pair<std::uint64_t, MetricsReport>> per_seed;
    double f1_seed_std = 0.0;
    double calls_seed_std = 0.0;
    std::vector<EpisodeRow> rows;
};

inline const std::vector<std::uint64_t> kDefaultSeeds = {42, 123, 456};

/// Run every (seed, question) episode and aggregate. Episodes may execute on
/// several workers; aggregation is order-independent and finalized serially,
/// so reports are identical regardless of worker count.
BenchmarkReport run_benchmark(const StrategySpec& strategy,
                              const std::vector<env::SyntheticQuestion>& questions,
                              const env::FactWorld& world, const corpus::CorpusIndex& index,
                              const PassageStore& passages, const PipelineConfig& config,
                              const std::vector<std::uint64_t>& seeds, int workers = 1);

struct BootstrapResult {
    double delta = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
};

/// Paired bootstrap over per-item score differences with a Bonferroni-
/// corrected percentile CI and a two-sided p-value. Seed-deterministic.
BootstrapResult bootstrap_compare(const std::vector<double>& scores_a,
                                  const std::vector<double>& scores_b, int iterations = 10000,
                                  double alpha = 0.05, int comparisons = 1,
                                  std::uint64_t seed = 2024);

struct ParetoRow {
    std::string name;
    double f1 = 0.0;
    double avg_calls = 0.0;
    bool dominated = false;
};

/// Dominance in the (higher F1, fewer calls) partial order; rows ordered by
/// calls ascending, F1 descending.
std::vector<ParetoRow> pareto_report(const std::vector<std::pair<std::string, MetricsReport>>& reports);

void write_pareto_file(const std::vector<ParetoRow>& rows, const std::string& path);

void write_report(const BenchmarkReport& report, const std::string& path);
BenchmarkReport read_report(const std::string& path);

/// Adapter exposing full-pipeline episodes to REINFORCE training.
class EpisodeRolloutEnv : public policy::RolloutEnv {
public:
    EpisodeRolloutEnv(std::vector<env::SyntheticQuestion> questions, const env::FactWorld& world,
                      const corpus::CorpusIndex& index, const PassageStore& passages,
                      PipelineConfig config);

    policy::Rollout rollout(const policy::PolicyModel& model, std::uint64_t seed) override;

private:
    std::vector<env::SyntheticQuestion> questions_;
    const env::FactWorld& world_;
    const corpus::CorpusIndex& index_;
    const PassageStore& passages_;
    PipelineConfig config_;
};

}  // namespace adret::harness
