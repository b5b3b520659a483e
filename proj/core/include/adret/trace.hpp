#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adret/common.hpp"

namespace adret::trace {

enum class StreamSource { replay, synthetic, external };

struct TokenStream {
    std::vector<std::string> tokens;
    StreamSource source = StreamSource::synthetic;

    static TokenStream from_text(std::string_view text,
                                 StreamSource source = StreamSource::synthetic);
    std::string text() const;  // tokens joined with single spaces
};

struct ReasoningStep {
    int index = 1;  // 1-based
    std::string text;
    std::size_t span_begin = 0;  // half-open token offsets
    std::size_t span_end = 0;
    double boundary_confidence = 1.0;
};

/// Per-candidate boundary evidence. All fields lie in the documented ranges.
struct BoundaryFeatures {
    double discourse_marker_hit = 0.0;   // 0/1
    double logical_connective_hit = 0.0; // 0/1
    double topic_shift_score = 0.0;      // in [0,1]
    double punctuation_signal = 0.0;     // 0/1

    std::array<double, 4> as_array() const {
        return {discourse_marker_hit, logical_connective_hit, topic_shift_score,
                punctuation_signal};
    }
};

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr int kDefaultWindow = 128;
inline constexpr int kDefaultStride = 64;
inline constexpr std::size_t kTopicContextTokens = 64;

/// Logistic boundary scorer: weights over BoundaryFeatures plus bias.
struct SegmenterModel {
    std::array<double, kFeatureCount + 1> weights{};  // features then bias
    double decision_threshold = 0.5;

    double probability(const BoundaryFeatures& f) const;

    /// Hand-set weights shipped with the pipeline: discourse markers
    /// dominate, punctuation alone stays below threshold.
    static SegmenterModel bundled();
};

const std::vector<std::string>& discourse_markers();
const std::vector<std::string>& logical_connectives();

/// True when the tokens starting at `pos` begin one of the (multi-word)
/// phrases in `lexicon`. Matching is lowercase and punctuation-stripped.
bool phrase_match_at(const std::vector<std::string>& tokens, std::size_t pos,
                     const std::vector<std::string>& lexicon);

/// Interior positions eligible to open a new step: right after sentence-final
/// punctuation or a newline token.
std::vector<std::size_t> candidate_positions(const TokenStream& stream);

BoundaryFeatures boundary_features(const std::vector<std::string>& tokens, std::size_t pos,
                                   std::size_t window_begin, std::size_t window_end);

/// Per-candidate boundary probabilities, averaged over every sliding window
/// that covers the candidate.
std::vector<std::pair<std::size_t, double>> boundary_probabilities(const TokenStream& stream,
                                                                   const SegmenterModel& model,
                                                                   int window, int stride);

/// Partition the stream into reasoning steps. Boundaries are placed only at
/// candidate positions whose averaged probability exceeds the threshold.
/// Throws std::invalid_argument on an empty stream.
std::vector<ReasoningStep> segment(const TokenStream& stream, const SegmenterModel& model,
                                   int window = kDefaultWindow, int stride = kDefaultStride);

struct AnnotatedStream {
    TokenStream stream;
    std::vector<std::size_t> boundaries;  // gold step-start offsets (interior)
};

struct SegmenterReport {
    SegmenterModel model;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t heldout_streams = 0;
};

/// Fit the logistic boundary classifier by gradient descent over candidate
/// positions and report boundary precision/recall/F1 on a held-out split.
/// Requires at least 10 annotated streams. `feature_mask` disables feature
/// classes for ablation runs.
SegmenterReport train_segmenter(const std::vector<AnnotatedStream>& annotated,
                                std::uint64_t seed = 13, int epochs = 200,
                                double learning_rate = 0.5,
                                std::array<bool, kFeatureCount> feature_mask = {true, true, true,
                                                                                true});

/// Synthetic annotated traces: steps of several sentences, a discourse
/// marker opening each step. Used to exercise training and the bundled
/// segmentation properties.
std::vector<AnnotatedStream> synthetic_annotated_traces(std::uint64_t seed, std::size_t count);

/// Mean gold-step token length divided by mean sentence token length over a
/// trace set.
double step_to_sentence_length_ratio(const std::vector<AnnotatedStream>& traces);

void save_segmenter(const SegmenterModel& model, const std::string& path);
SegmenterModel load_segmenter(const std::string& path);

void save_annotated(const std::vector<AnnotatedStream>& traces, const std::string& path);
std::vector<AnnotatedStream> load_annotated(const std::string& path);

}  // namespace adret::trace
