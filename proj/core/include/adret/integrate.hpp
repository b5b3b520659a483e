#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adret/corpus.hpp"

namespace adret::integrate {

struct ScoredSentence {
    std::string passage_id;
    std::string text;
    double relevance = 0.0;
};

/// Compressed evidence ready for injection at a step boundary.
struct InjectionBlock {
    std::vector<ScoredSentence> sentences;  // within-passage order preserved
    std::string source_query;
};

struct CompressionConfig {
    double tau_rel = 0.45;
    // scorer: token-vector cosine. The scorer sits behind this config so an
    // attention-weighted variant can slot in later.
};

/// Split text into sentences on terminal '.', '!' or '?'.
std::vector<std::string> split_sentences(const std::string& text);

/// Sentence-level filter: keep sentences whose cosine against the query
/// reaches tau_rel; if none qualify, keep the single best sentence.
/// Throws std::invalid_argument on an empty passage list.
InjectionBlock compress(const std::vector<corpus::Passage>& passages, const std::string& query,
                        const CompressionConfig& config = {});

/// Exact injection text:
///   <retrieved>\n[{id}] {sentence}\n...\n</retrieved>\n
///   Continue your reasoning, using this evidence if relevant.
std::string render_injection(const InjectionBlock& block);

inline constexpr const char* kRetrievedOpen = "<retrieved>";
inline constexpr const char* kRetrievedClose = "</retrieved>";
inline constexpr const char* kContinuationPrompt =
    "Continue your reasoning, using this evidence if relevant.";

/// Inverse of render_injection: the (passage id, sentence) rows of the block.
std::vector<std::pair<std::string, std::string>> parse_injection(const std::string& rendered);

/// Simulated latency and pricing parameters. All values strictly positive.
struct LatencyModel {
    double retrieval_ms = 171.0;
    double per_token_ms = 1.5;
    double prefix_reuse_discount = 2.1;  // divides post-retrieval restart cost
    double output_token_price_per_million = 2.19;

    void validate() const;
};

/// Lowercase, collapse whitespace, strip terminal punctuation. Cache keys
/// are exact matches of this form.
std::string normalize_query(const std::string& query);

struct CacheLookup {
    std::vector<corpus::RetrievalResult> results;
    int hit = 0;
    double charged_latency_ms = 0.0;
};

/// Speculative retrieval cache with least-recently-created eviction. Safe
/// for concurrent insert/lookup: values for one normalized key are always
/// identical against an immutable index, so last-write-wins is benign.
class SpeculativeCache {
public:
    explicit SpeculativeCache(std::size_t capacity = 32) : capacity_(capacity) {}

    /// Store results for a (pre-normalized or raw) query; returns false when
    /// the key was already present.
    bool insert(const std::string& query, std::vector<corpus::RetrievalResult> results,
                int creation_step);

    bool contains(const std::string& query) const;

    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }

    std::uint64_t issued() const { return issued_; }
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    double hit_rate() const;

    void count_issued() { ++issued_; }

    friend CacheLookup cache_lookup(SpeculativeCache& cache, const std::string& query,
                                    const corpus::CorpusIndex& index, int k,
                                    const LatencyModel& latency);

private:
    struct Entry {
        std::vector<corpus::RetrievalResult> results;
        int creation_step = 0;
    };

    std::size_t capacity_;
    std::map<std::string, Entry> entries_;
    std::deque<std::string> creation_order_;
    std::atomic<std::uint64_t> issued_{0}, hits_{0}, misses_{0};
    mutable std::mutex mutex_;
};

/// On a hit, return the cached results at zero charged latency; on a miss,
/// retrieve fresh and charge the model's per-call latency.
CacheLookup cache_lookup(SpeculativeCache& cache, const std::string& query,
                         const corpus::CorpusIndex& index, int k, const LatencyModel& latency);

inline constexpr int kPrefetchEntityCap = 4;

/// Prefetch likely next queries from entities named in the retained
/// sentences (rarest-term entities first, capped). Returns the number of
/// retrievals actually issued.
int speculative_prefetch(SpeculativeCache& cache, const InjectionBlock& retrieved,
                         const corpus::CorpusIndex& index, int k = corpus::kDefaultTopK,
                         int current_step = 0);

/// One retrieval event of an episode, as consumed by account().
struct RetrievalEvent {
    int trigger_step = 0;  // 0 marks a pre-reasoning (single-RAG) injection
    std::string query;
    std::vector<corpus::RetrievalResult> results;
    int hit = 0;
    double charged_latency_ms = 0.0;
    std::string injected_text;
    std::size_t context_tokens = 0;  // context size at injection, for restart cost
};

struct LatencyReport {
    std::size_t total_calls = 0;
    std::size_t charged_calls = 0;
    double charged_retrieval_ms = 0.0;         // sum of miss latencies; hits charge 0
    std::optional<double> per_call_ms;         // charged_retrieval_ms / total_calls
    double simulated_e2e_ms = 0.0;
    double output_token_cost = 0.0;
    std::optional<double> f1_per_call;
};

/// Latency and cost arithmetic over an episode's retrieval events.
LatencyReport account(const std::vector<RetrievalEvent>& events, std::size_t output_tokens,
                      const LatencyModel& model, std::optional<double> f1 = std::nullopt);

/// F1 divided by mean retrieval calls; absent when calls is zero.
std::optional<double> f1_per_call(double f1, double avg_calls);

}  // namespace adret::integrate
