#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adret/backend.hpp"
#include "adret/common.hpp"
#include "adret/corpus.hpp"

namespace adret::rsus {

struct EntityMention {
    std::string surface;
    std::size_t begin = 0;  // character span within the step text
    std::size_t end = 0;
    bool operator==(const EntityMention&) const = default;
};

/// Mixture weights and sampling parameters for the step uncertainty score.
/// Weights are constrained to the simplex at construction.
struct RsusConfig {
    double alpha = 0.40;
    double beta = 0.35;
    double gamma = 0.25;
    int consistency_samples = 3;
    int entropy_window = corpus::kDefaultEntropyWindow;

    static RsusConfig make(double alpha, double beta, double gamma,
                           int consistency_samples = 3,
                           int entropy_window = corpus::kDefaultEntropyWindow);
};

struct RsusScore {
    double u_verb = 0.0;
    double u_ent = 0.0;
    double u_cons = 0.0;
    double combined = 0.0;
};

/// The verbatim confidence probe sent to backends ahead of u_verb parsing.
inline constexpr const char* kConfidenceProbePrompt =
    "Given the reasoning so far, rate your confidence that the current conclusion is factually "
    "correct on a scale of 0-100, where 0 means completely uncertain and 100 means absolutely "
    "certain. Respond with only a number:";

const std::vector<std::string>& hedge_phrases();

/// Count of hedge-phrase occurrences in the text (token-wise, lowercased).
int hedge_count(const std::string& text);

/// Rule-based mention extractor: maximal runs of capitalized tokens, with
/// sentence-initial stopwords and the pronoun "I" excluded, deduplicated by
/// surface in original order. Bare 4-digit years never qualify.
std::vector<EntityMention> extract_entities(const std::string& text);

/// Parse a confidence reply: the first integer in [0,100], mapped to
/// uncertainty 1 - c/100. nullopt when no such integer exists.
std::optional<double> parse_confidence_reply(const std::string& reply);

/// Logistic proxy for verbalized confidence, used when a backend cannot be
/// probed mid-generation. Features: step token length, hedge count, entity
/// count, running mean of u_ent over the last three steps.
struct UverbProxy {
    std::array<double, 5> weights{};  // 4 features + bias
    double auroc = 0.0;               // held-out AUROC recorded at training

    double score(const std::string& step_text, std::span<const double> recent_u_ent) const;
};

struct ProxyExample {
    std::string step_text;
    std::vector<double> recent_u_ent;
    int revised_next = 0;  // 1 iff the following step revised / contradicted / hedged
};

/// Train the proxy on subsequent-revision labels. Requires >= 50 examples
/// and both label classes present.
UverbProxy u_verb_proxy_train(const std::vector<ProxyExample>& examples, std::uint64_t seed = 7,
                              int epochs = 300, double learning_rate = 0.3);

/// Verbalized uncertainty: probe the backend with the fixed prompt and
/// invert the parsed confidence. Falls back to the proxy when the backend
/// cannot be probed, and to 0.5 (with a warning) when neither path works.
double u_verb(ReasoningBackend& backend, const std::string& context,
              const std::string& step_text = {}, std::span<const double> recent_u_ent = {},
              const UverbProxy* proxy = nullptr, WarningLog* warnings = nullptr);

/// Entity-coverage entropy: mean over entities of the normalized Shannon
/// entropy of each entity's retrieval score distribution. Entities with no
/// matching passage contribute 1; an empty entity list scores 0.
double u_ent(const corpus::CorpusIndex& index, const std::vector<EntityMention>& entities,
             int n = corpus::kDefaultEntropyWindow);

/// Normalized entropy of one probability distribution: H/ln(m), 0 for m <= 1.
double normalized_entropy(std::span<const double> probabilities);

/// Consistency uncertainty: 1 - mean pairwise token-set Jaccard over k
/// sampled continuations. Only discourse-marker-flagged steps are probed;
/// other steps score 0. A backend that cannot sample scores 0 with a warning.
double u_cons(ReasoningBackend& backend, const std::string& context, const std::string& step_text,
              int k = 3, WarningLog* warnings = nullptr);

/// Weighted combination per the mixture config. Components must lie in [0,1].
RsusScore combine(const RsusConfig& config, double u_verb, double u_ent, double u_cons);

struct LabeledStep {
    double u_verb = 0.0;
    double u_ent = 0.0;
    double u_cons = 0.0;
    double benefit = 0.0;  // downstream retrieval-benefit label
};

struct FitResult {
    RsusConfig config;
    double correlation = 0.0;
    double equal_weights_correlation = 0.0;
};

/// Grid search over the weight simplex (resolution 0.05, plus the exact
/// equal-weights point) maximizing Pearson correlation between the combined
/// score and the benefit labels. Requires >= 20 steps with non-constant labels.
FitResult fit_weights(const std::vector<LabeledStep>& steps);

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace adret::rsus
