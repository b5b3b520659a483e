#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adret/common.hpp"

namespace adret::corpus {

/// A retrievable text unit. `tokens` is always derived from `text` via
/// tokenize_terms, never set independently.
struct Passage {
    std::string id;
    std::string title;
    std::string text;
    std::vector<std::string> tokens;

    static Passage make(std::string id, std::string title, std::string text);
};

struct Posting {
    std::string passage_id;
    std::uint32_t tf = 0;
    bool operator==(const Posting&) const = default;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    bool operator==(const Bm25Params&) const = default;
};

/// Immutable inverted index over a passage set. Safe for unlimited
/// concurrent readers once built.
struct CorpusIndex {
    std::map<std::string, std::vector<Posting>> postings;  // term -> postings, ids ascending
    std::map<std::string, std::uint32_t> doc_lengths;
    double avg_doc_length = 0.0;
    std::uint32_t doc_count = 0;
    Bm25Params bm25;

    bool operator==(const CorpusIndex&) const = default;
};

struct RetrievalResult {
    std::string passage_id;
    double score = 0.0;
    int rank = 0;
    bool operator==(const RetrievalResult&) const = default;
};

/// Build an index from a non-empty passage set with unique ids.
/// Throws std::invalid_argument on an empty list or a duplicate id.
CorpusIndex build_index(const std::vector<Passage>& passages);

/// Top-k Okapi BM25 ranking. Ties broken by ascending passage id; an
/// out-of-vocabulary query yields the empty list.
std::vector<RetrievalResult> retrieve(const CorpusIndex& index, const std::string& query, int k);

/// Normalized BM25 scores over the top-n matching passages; probabilities
/// sum to 1 whenever non-empty.
std::vector<std::pair<std::string, double>> score_distribution(const CorpusIndex& index,
                                                               const std::string& query, int n);

/// BM25 contribution of one (tf, df, doc_len) triple under the index-wide
/// statistics. Exposed so validation code can recompute scores from scratch.
double bm25_term_score(std::uint32_t tf, std::uint32_t df, std::uint32_t doc_len,
                       std::uint32_t doc_count, double avg_doc_length, const Bm25Params& p);

inline constexpr int kDefaultTopK = 5;           // passages fetched per query
inline constexpr int kDefaultEntropyWindow = 100;  // distribution width for entity entropy
inline constexpr std::size_t kMaxPassageTokens = 256;
inline constexpr std::size_t kSplitOverlapTokens = 32;

/// Ingest a line-delimited corpus file (records with string fields `id`,
/// `title`, `text`). Passages longer than 256 tokens are split into
/// overlapping chunks (`{id}#1`, `{id}#2`, ...). Also accepts a world file
/// (version tag "adret-world/1"), ingesting its embedded passages.
std::vector<Passage> load_corpus_file(const std::string& path);

/// Apply the 256-token / 32-token-overlap ingestion cap to raw records.
std::vector<Passage> split_long_passages(const std::vector<Passage>& raw);

void save_index(const CorpusIndex& index, const std::string& path);
CorpusIndex load_index(const std::string& path);

}  // namespace adret::corpus
