#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "adret/common.hpp"
#include "adret/rsus.hpp"

namespace adret::policy {

/// Retrieval-history summary carried in the policy state.
struct HistoryFeatures {
    int prior_retrieval_count = 0;
    int steps_since_last_retrieval = 0;  // equals current step index if none
    double last_query_overlap = 0.0;     // token overlap with the previous query
    double cumulative_retrieval_latency_s = 0.0;
};

struct PolicyState {
    std::vector<double> query_vec;  // hashed bag-of-words of the question
    std::vector<double> step_vec;   // same encoding of the current step text
    rsus::RsusScore rsus;
    HistoryFeatures history;
};

inline constexpr int kTextVecDim = 32;
inline constexpr double kDefaultTau = 0.65;
inline constexpr int kDefaultHidden = 64;
inline constexpr int kMaxRetrievalsPerEpisode = 6;

/// L2-normalized hashed bag-of-words over lowercased terms (FNV-1a buckets).
std::vector<double> hash_text_vector(const std::string& text, int dim = kTextVecDim);

PolicyState encode_state(const std::string& question, const std::string& current_step_text,
                         const rsus::RsusScore& rsus, const HistoryFeatures& history,
                         int dim = kTextVecDim);

/// Token overlap |A ∩ B| / |A ∪ B| over lowercased term sets.
double query_overlap(const std::string& a, const std::string& b);

/// One-hidden-layer scorer squashed to (0,1). The threshold tau is part of
/// the model; it may be trained alongside the weights (learned-threshold
/// mode) or held at its default.
class PolicyModel {
public:
    PolicyModel() = default;
    PolicyModel(int input_dim, int hidden, std::uint64_t seed, double tau = kDefaultTau,
                bool tau_trainable = false);

    double forward(const PolicyState& state) const;

    /// Probability plus input/parameter gradients; used by REINFORCE and the
    /// finite-difference validation.
    double forward_with_grad(const PolicyState& state, std::vector<double>& grad_out) const;

    std::vector<double> flatten_input(const PolicyState& state) const;

    int input_dim() const { return input_dim_; }
    int hidden() const { return hidden_; }
    double tau() const { return tau_; }
    void set_tau(double tau) { tau_ = tau; }
    bool tau_trainable() const { return tau_trainable_; }

    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    bool operator==(const PolicyModel& other) const = default;

private:
    int input_dim_ = 0;
    int hidden_ = 0;
    double tau_ = kDefaultTau;
    bool tau_trainable_ = false;
    // Layout: W1 (hidden x input), b1 (hidden), w2 (hidden), b2.
    std::vector<double> params_;
};

enum class DecideMode { greedy, sample };

struct RetrievalDecision {
    int retrieve = 0;
    double probability = 0.0;
    std::string query;  // non-empty iff retrieve == 1
};

/// Greedy mode applies strict `probability > tau`; sample mode draws from
/// Bernoulli(probability) on the supplied generator. The query field is left
/// for the caller to fill via formulate_query.
RetrievalDecision decide(const PolicyModel& model, const PolicyState& state, DecideMode mode,
                         Rng* rng = nullptr);

/// Information-need query: template over the step's focal entity and the
/// relation it leaves unresolved; falls back to the original question when
/// no entity can be extracted.
std::string formulate_query(const std::string& step_text, const std::string& question);

/// R = F1 - lambda1 * n_ret - lambda2 * t_latency.
double reward(double f1, int n_ret, double t_latency_s, double lambda1, double lambda2);

struct TrainConfig {
    double lambda1_start = 0.5;
    double lambda1_end = 0.1;
    double lambda2 = 0.05;  // per second
    double learning_rate = 1e-4;
    int batch_size = 64;
    int steps = 5000;
    std::uint64_t seed = 42;
    int hidden = kDefaultHidden;
    double tau = kDefaultTau;
    bool tau_trainable = false;
    int max_retrievals = kMaxRetrievalsPerEpisode;
    // Entropy bonus keeping the sampler from saturating while the curriculum
    // still penalizes retrieval heavily.
    double entropy_coef = 0.1;
};

/// One sampled episode under a fixed model: the states visited at step
/// boundaries, the sampled retrieve/continue actions, and the terminal
/// outcome the reward is computed from.
struct Rollout {
    std::vector<PolicyState> states;
    std::vector<int> actions;
    double f1 = 0.0;
    int n_ret = 0;
    double latency_s = 0.0;
};

/// Episode source for REINFORCE training. Implementations roll one episode
/// under the given model, sampling actions from Bernoulli(model output) with
/// the supplied seed.
class RolloutEnv {
public:
    virtual ~RolloutEnv() = default;
    virtual Rollout rollout(const PolicyModel& model, std::uint64_t seed) = 0;
};

struct TrainStats {
    std::vector<double> mean_reward_per_step;
    double final_lambda1 = 0.0;
};

/// Score-function gradient ascent on expected reward with an exponential-
/// moving-average baseline (decay 0.99) and Adam updates. lambda1 is
/// interpolated linearly from start to end across training steps. Fully
/// deterministic given (environment seed, config seed).
PolicyModel train_reinforce(RolloutEnv& env, const TrainConfig& config,
                            TrainStats* stats = nullptr);

struct GradientCheckResult {
    double max_forward_rel_error = 0.0;   // backprop vs central differences
    double bandit_rel_error = 0.0;        // REINFORCE estimator vs analytic, rewards (1,0)
    double bandit_symmetric_mean = 0.0;   // estimator mean with identical-reward arms
};

/// Numerical validation of the policy-gradient machinery.
GradientCheckResult gradient_check(std::uint64_t seed = 42, int mc_samples = 100000);

void save_policy(const PolicyModel& model, const std::string& path);
PolicyModel load_policy(const std::string& path);

}  // namespace adret::policy
