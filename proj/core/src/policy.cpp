#include "adret/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "adret/relations.hpp"

namespace adret::policy {

std::vector<double> hash_text_vector(const std::string& text, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
    for (const auto& term : tokenize_terms(text))
        v[fnv1a(term) % static_cast<std::uint64_t>(dim)] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

PolicyState encode_state(const std::string& question, const std::string& current_step_text,
                         const rsus::RsusScore& rsus, const HistoryFeatures& history, int dim) {
    PolicyState s;
    s.query_vec = hash_text_vector(question, dim);
    s.step_vec = hash_text_vector(current_step_text, dim);
    s.rsus = rsus;
    s.history = history;
    return s;
}

double query_overlap(const std::string& a, const std::string& b) {
    const auto ta = tokenize_terms(a);
    const auto tb = tokenize_terms(b);
    const std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
    if (sa.empty() || sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

PolicyModel::PolicyModel(int input_dim, int hidden, std::uint64_t seed, double tau,
                         bool tau_trainable)
    : input_dim_(input_dim), hidden_(hidden), tau_(tau), tau_trainable_(tau_trainable) {
    if (input_dim < 1 || hidden < 1) throw std::invalid_argument("bad policy dimensions");
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0,1)");
    params_.resize(static_cast<std::size_t>(hidden) * input_dim + 2 * hidden + 1);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    std::uniform_real_distribution<double> init(-scale, scale);
    for (auto& p : params_) p = init(rng);
}

std::vector<double> PolicyModel::flatten_input(const PolicyState& state) const {
    std::vector<double> x;
    x.reserve(state.query_vec.size() + state.step_vec.size() + 8);
    x.insert(x.end(), state.query_vec.begin(), state.query_vec.end());
    x.insert(x.end(), state.step_vec.begin(), state.step_vec.end());
    x.push_back(state.rsus.u_verb);
    x.push_back(state.rsus.u_ent);
    x.push_back(state.rsus.u_cons);
    x.push_back(state.rsus.combined);
    // History scaled into comparable ranges.
    x.push_back(state.history.prior_retrieval_count / 6.0);
    x.push_back(state.history.steps_since_last_retrieval / 8.0);
    x.push_back(state.history.last_query_overlap);
    x.push_back(state.history.cumulative_retrieval_latency_s / 2.0);
    if (static_cast<int>(x.size()) != input_dim_)
        throw std::invalid_argument("policy state dimension mismatch");
    return x;
}

namespace {

double squash(double z) {
    const double p = 1.0 / (1.0 + std::exp(-z));
    return std::clamp(p, 1e-12, 1.0 - 1e-12);  // keep output strictly inside (0,1)
}

}  // namespace

double PolicyModel::forward(const PolicyState& state) const {
    const auto x = flatten_input(state);
    const std::size_t d = static_cast<std::size_t>(input_dim_);
    const std::size_t h = static_cast<std::size_t>(hidden_);
    const double* w1 = params_.data();
    const double* b1 = w1 + h * d;
    const double* w2 = b1 + h;
    const double b2 = *(w2 + h);
    double z = b2;
    for (std::size_t i = 0; i < h; ++i) {
        double a = b1[i];
        for (std::size_t j = 0; j < d; ++j) a += w1[i * d + j] * x[j];
        z += w2[i] * std::tanh(a);
    }
    return squash(z);
}

double PolicyModel::forward_with_grad(const PolicyState& state,
                                      std::vector<double>& grad_out) const {
    const auto x = flatten_input(state);
    const std::size_t d = static_cast<std::size_t>(input_dim_);
    const std::size_t h = static_cast<std::size_t>(hidden_);
    const double* w1 = params_.data();
    const double* b1 = w1 + h * d;
    const double* w2 = b1 + h;
    const double b2 = *(w2 + h);

    std::vector<double> act(h);
    double z = b2;
    for (std::size_t i = 0; i < h; ++i) {
        double a = b1[i];
        for (std::size_t j = 0; j < d; ++j) a += w1[i * d + j] * x[j];
        act[i] = std::tanh(a);
        z += w2[i] * act[i];
    }

    // grad_out receives dz/dtheta (the logit gradient).
    grad_out.assign(params_.size(), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        const double dz_da = w2[i] * (1.0 - act[i] * act[i]);
        for (std::size_t j = 0; j < d; ++j) grad_out[i * d + j] = dz_da * x[j];
        grad_out[h * d + i] = dz_da;       // b1
        grad_out[h * d + h + i] = act[i];  // w2
    }
    grad_out[h * d + 2 * h] = 1.0;  // b2
    return squash(z);
}

RetrievalDecision decide(const PolicyModel& model, const PolicyState& state, DecideMode mode,
                         Rng* rng) {
    RetrievalDecision d;
    d.probability = model.forward(state);
    if (mode == DecideMode::greedy) {
        d.retrieve = d.probability > model.tau() ? 1 : 0;
    } else {
        if (!rng) throw std::invalid_argument("sample mode requires a generator");
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        d.retrieve = unit(*rng) < d.probability ? 1 : 0;
    }
    return d;
}

std::string formulate_query(const std::string& step_text, const std::string& question) {
    const auto entities = rsus::extract_entities(step_text);
    if (entities.empty()) return question;
    const auto* relation = relations::detect(step_text);
    if (!relation) return question;
    return relations::render_question(*relation, entities.front().surface);
}

double reward(double f1, int n_ret, double t_latency_s, double lambda1, double lambda2) {
    return f1 - lambda1 * n_ret - lambda2 * t_latency_s;
}

namespace {

struct Adam {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int t = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void ascend(std::vector<double>& params, const std::vector<double>& grad, double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            params[i] += lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

}  // namespace

PolicyModel train_reinforce(RolloutEnv& env, const TrainConfig& config, TrainStats* stats) {
    if (config.steps < 1 || config.batch_size < 1)
        throw std::invalid_argument("training requires positive steps and batch size");
    if (config.lambda1_start < config.lambda1_end || config.lambda1_end < 0)
        throw std::invalid_argument("require lambda1_start >= lambda1_end >= 0");

    const int input_dim = 2 * kTextVecDim + 8;
    PolicyModel model(input_dim, config.hidden, derive_seed(config.seed, 0xad0e),
                      config.tau_trainable ? 0.5 : config.tau, config.tau_trainable);
    // A trainable threshold folds into the output bias: shifting the decision
    // boundary in logit space is the same parameter, so learned-threshold mode
    // trains normally and pins tau to 0.5.

    Adam adam(model.parameter_count());
    double baseline = 0.0;
    bool baseline_primed = false;

    std::vector<double> grad(model.parameter_count(), 0.0);
    std::vector<double> logit_grad;
    for (int step = 0; step < config.steps; ++step) {
        const double frac =
            config.steps > 1 ? static_cast<double>(step) / (config.steps - 1) : 1.0;
        const double lambda1 =
            config.lambda1_start + (config.lambda1_end - config.lambda1_start) * frac;

        std::vector<Rollout> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int i = 0; i < config.batch_size; ++i)
            batch.push_back(env.rollout(model, derive_seed(config.seed, step, i)));

        double mean_reward = 0.0;
        std::fill(grad.begin(), grad.end(), 0.0);
        const double b0 = baseline;
        for (const auto& ep : batch) {
            const double r = reward(ep.f1, ep.n_ret, ep.latency_s, lambda1, config.lambda2);
            mean_reward += r;
            const double advantage = r - (baseline_primed ? b0 : 0.0);
            for (std::size_t t = 0; t < ep.states.size(); ++t) {
                const double p = model.forward_with_grad(ep.states[t], logit_grad);
                // dH/dz for Bernoulli(sigmoid(z)) is -z * p * (1-p).
                const double z = std::log(p / (1.0 - p));
                const double scale = advantage * (ep.actions[t] - p) -
                                     config.entropy_coef * z * p * (1.0 - p);
                for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += scale * logit_grad[k];
            }
        }
        mean_reward /= config.batch_size;
        for (auto& g : grad) g /= config.batch_size;
        adam.ascend(model.parameters(), grad, config.learning_rate);

        // EMA baseline updated after the batch, in episode order.
        for (const auto& ep : batch) {
            const double r = reward(ep.f1, ep.n_ret, ep.latency_s, lambda1, config.lambda2);
            if (!baseline_primed) {
                baseline = r;
                baseline_primed = true;
            } else {
                baseline = 0.99 * baseline + 0.01 * r;
            }
        }
        if (stats) stats->mean_reward_per_step.push_back(mean_reward);
        if (stats) stats->final_lambda1 = lambda1;
    }
    return model;
}

GradientCheckResult gradient_check(std::uint64_t seed, int mc_samples) {
    GradientCheckResult result;

    // (a) Forward scorer gradients vs central finite differences.
    {
        const int dim = 2 * kTextVecDim + 8;
        PolicyModel model(dim, 8, derive_seed(seed, 1));
        Rng rng(derive_seed(seed, 2));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        PolicyState state;
        state.query_vec.resize(kTextVecDim);
        state.step_vec.resize(kTextVecDim);
        for (auto& v : state.query_vec) v = unit(rng);
        for (auto& v : state.step_vec) v = unit(rng);
        state.rsus = {unit(rng), unit(rng), unit(rng), unit(rng)};
        state.history = {1, 2, unit(rng), unit(rng)};

        std::vector<double> logit_grad;
        const double p = model.forward_with_grad(state, logit_grad);
        const double dp_dz = p * (1.0 - p);
        const double h = 1e-5;
        for (std::size_t k = 0; k < model.parameter_count(); ++k) {
            const double saved = model.parameters()[k];
            model.parameters()[k] = saved + h;
            const double up = model.forward(state);
            model.parameters()[k] = saved - h;
            const double down = model.forward(state);
            model.parameters()[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = dp_dz * logit_grad[k];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            result.max_forward_rel_error = std::max(result.max_forward_rel_error, rel);
        }
    }

    // (b) REINFORCE estimator mean vs the analytic gradient of expected
    // reward on a 2-armed softmax bandit with rewards (1, 0).
    {
        const double theta0 = 0.2, theta1 = -0.1;
        const double p0 = std::exp(theta0) / (std::exp(theta0) + std::exp(theta1));
        const double analytic = p0 * (1.0 - p0);  // d E[R] / d theta0
        Rng rng(derive_seed(seed, 3));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double sum = 0.0;
        for (int i = 0; i < mc_samples; ++i) {
            const int arm = unit(rng) < p0 ? 0 : 1;
            const double r = arm == 0 ? 1.0 : 0.0;
            sum += r * ((arm == 0 ? 1.0 : 0.0) - p0);  // R * dlogpi/dtheta0
        }
        const double estimate = sum / mc_samples;
        result.bandit_rel_error = std::abs(estimate - analytic) / std::abs(analytic);
    }

    // (c) Identical-reward arms: the analytic gradient is exactly zero.
    {
        const double p0 = 0.5;
        Rng rng(derive_seed(seed, 4));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double sum = 0.0;
        for (int i = 0; i < mc_samples; ++i) {
            const int arm = unit(rng) < p0 ? 0 : 1;
            sum += 1.0 * ((arm == 0 ? 1.0 : 0.0) - p0);
        }
        result.bandit_symmetric_mean = sum / mc_samples;
    }
    return result;
}

void save_policy(const PolicyModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write policy file: " + path);
    out << "adret-policy/1\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", model.tau());
    out << "dims\t" << model.input_dim() << '\t' << model.hidden() << '\t' << buf << '\t'
        << (model.tau_trainable() ? 1 : 0) << '\n';
    out << "params";
    for (double p : model.parameters()) {
        std::snprintf(buf, sizeof(buf), "%a", p);
        out << '\t' << buf;
    }
    out << '\n';
}

PolicyModel load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "adret-policy/1")
        throw std::runtime_error("unrecognized policy file version: " + path);
    int input_dim = 0, hidden = 0, trainable = 0;
    double tau = kDefaultTau;
    std::vector<double> params;
    while (std::getline(in, line)) {
        if (line.rfind("dims\t", 0) == 0) {
            char taubuf[64];
            std::sscanf(line.c_str(), "dims\t%d\t%d\t%63s\t%d", &input_dim, &hidden, taubuf,
                        &trainable);
            tau = std::strtod(taubuf, nullptr);
        } else if (line.rfind("params", 0) == 0) {
            const char* p = line.c_str() + 6;
            char* end = nullptr;
            while (true) {
                const double v = std::strtod(p, &end);
                if (end == p) break;
                params.push_back(v);
                p = end;
            }
        }
    }
    PolicyModel model(input_dim, hidden, 0, tau, trainable != 0);
    if (params.size() != model.parameter_count())
        throw std::runtime_error("policy file parameter count mismatch");
    model.parameters() = params;
    return model;
}

}  // namespace adret::policy
