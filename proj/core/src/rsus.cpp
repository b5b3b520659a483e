#include "adret/rsus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "adret/trace.hpp"

namespace adret::rsus {

RsusConfig RsusConfig::make(double alpha, double beta, double gamma, int consistency_samples,
                            int entropy_window) {
    if (alpha < 0 || beta < 0 || gamma < 0)
        throw std::invalid_argument("rsus weights must be non-negative");
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-9)
        throw std::invalid_argument("rsus weights must sum to 1");
    if (consistency_samples < 2) throw std::invalid_argument("consistency_samples must be >= 2");
    if (entropy_window < 1) throw std::invalid_argument("entropy_window must be >= 1");
    RsusConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.gamma = gamma;
    c.consistency_samples = consistency_samples;
    c.entropy_window = entropy_window;
    return c;
}

const std::vector<std::string>& hedge_phrases() {
    static const std::vector<std::string> hedges = {"probably", "i think",   "maybe",
                                                    "perhaps",  "possibly",  "not sure"};
    return hedges;
}

int hedge_count(const std::string& text) {
    const auto tokens = tokenize_terms(text);
    int count = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (const auto& h : hedge_phrases()) {
            const auto words = tokenize_terms(h);
            if (i + words.size() > tokens.size()) continue;
            bool ok = true;
            for (std::size_t j = 0; j < words.size(); ++j)
                if (tokens[i + j] != words[j]) {
                    ok = false;
                    break;
                }
            if (ok) {
                ++count;
                break;
            }
        }
    }
    return count;
}

namespace {

const std::unordered_set<std::string>& entity_stopwords() {
    static const std::unordered_set<std::string> words = {
        // articles, pronouns, determiners
        "the", "a", "an", "i", "he", "she", "it", "they", "we", "you", "this", "that", "these",
        "those", "my", "his", "her", "its", "their", "our", "your",
        // prepositions and conjunctions
        "in", "on", "at", "of", "and", "or", "but", "if", "as", "by", "to", "for", "with", "from",
        "so", "then",
        // auxiliaries and question words
        "is", "are", "was", "were", "be", "been", "am", "do", "does", "did", "have", "has", "had",
        "will", "would", "can", "could", "should", "must", "may", "might", "what", "who", "when",
        "where", "why", "how", "which", "there", "here", "not", "no", "yes",
        // discourse openers and hedges
        "however", "therefore", "thus", "hence", "next", "also", "moreover", "meanwhile",
        "finally", "first", "second", "third", "now", "well", "okay", "maybe", "probably",
        "perhaps", "possibly", "let", "given", "after", "before", "according"};
    return words;
}

struct Word {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool sentence_initial = false;
};

std::vector<Word> split_words(const std::string& text) {
    std::vector<Word> words;
    std::size_t i = 0;
    bool sentence_start = true;
    while (i < text.size()) {
        if (is_alnum(text[i])) {
            Word w;
            w.begin = i;
            while (i < text.size() && is_alnum(text[i])) ++i;
            w.end = i;
            w.text = text.substr(w.begin, w.end - w.begin);
            w.sentence_initial = sentence_start;
            sentence_start = false;
            words.push_back(std::move(w));
        } else {
            if (text[i] == '.' || text[i] == '!' || text[i] == '?') sentence_start = true;
            ++i;
        }
    }
    return words;
}

bool capitalized(const std::string& w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w[0])) != 0;
}

bool bare_year(const std::string& w) {
    if (w.size() != 4) return false;
    for (char c : w)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

// Only whitespace may separate the words of one mention.
bool whitespace_between(const std::string& text, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i)
        if (!std::isspace(static_cast<unsigned char>(text[i]))) return false;
    return true;
}

}  // namespace

std::vector<EntityMention> extract_entities(const std::string& text) {
    const auto words = split_words(text);
    std::vector<EntityMention> mentions;
    std::set<std::string> seen;

    std::size_t i = 0;
    while (i < words.size()) {
        const auto& w = words[i];
        const auto lower = lowercase(w.text);
        const bool starts_span = capitalized(w.text) && !bare_year(w.text) && w.text != "I" &&
                                 !(w.sentence_initial && entity_stopwords().count(lower));
        if (!starts_span) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < words.size() && capitalized(words[j + 1].text) &&
               words[j + 1].text != "I" && !bare_year(words[j + 1].text) &&
               whitespace_between(text, words[j].end, words[j + 1].begin))
            ++j;
        EntityMention m;
        m.begin = words[i].begin;
        m.end = words[j].end;
        m.surface = text.substr(m.begin, m.end - m.begin);
        if (seen.insert(m.surface).second) mentions.push_back(std::move(m));
        i = j + 1;
    }
    return mentions;
}

std::optional<double> parse_confidence_reply(const std::string& reply) {
    std::size_t i = 0;
    while (i < reply.size()) {
        if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
            std::size_t j = i;
            unsigned long value = 0;
            while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) {
                value = value * 10 + static_cast<unsigned long>(reply[j] - '0');
                if (value > 100000) break;  // guard absurd runs
                ++j;
            }
            if (value <= 100) return 1.0 - static_cast<double>(value) / 100.0;
            i = j;
        } else {
            ++i;
        }
    }
    return std::nullopt;
}

namespace {

std::array<double, 4> proxy_features(const std::string& step_text,
                                     std::span<const double> recent_u_ent) {
    const auto tokens = tokenize_terms(step_text);
    double u_ent_mean = 0.0;
    if (!recent_u_ent.empty()) {
        const std::size_t n = std::min<std::size_t>(3, recent_u_ent.size());
        for (std::size_t i = recent_u_ent.size() - n; i < recent_u_ent.size(); ++i)
            u_ent_mean += recent_u_ent[i];
        u_ent_mean /= static_cast<double>(n);
    }
    return {static_cast<double>(tokens.size()) / 32.0,
            static_cast<double>(hedge_count(step_text)),
            static_cast<double>(extract_entities(step_text).size()), u_ent_mean};
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double auroc_of(const std::vector<std::pair<double, int>>& scored) {
    // Mann-Whitney with average ranks for ties.
    auto sorted = scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (sorted[k].second == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    for (const auto& [s, y] : sorted) (y == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) return 0.5;
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double UverbProxy::score(const std::string& step_text,
                         std::span<const double> recent_u_ent) const {
    const auto f = proxy_features(step_text, recent_u_ent);
    double z = weights[4];
    for (std::size_t i = 0; i < 4; ++i) z += weights[i] * f[i];
    return logistic(z);
}

UverbProxy u_verb_proxy_train(const std::vector<ProxyExample>& examples, std::uint64_t seed,
                              int epochs, double learning_rate) {
    if (examples.size() < 50) throw std::invalid_argument("insufficient labeled steps");
    bool any_pos = false, any_neg = false;
    for (const auto& e : examples) (e.revised_next ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg) throw std::invalid_argument("degenerate labels");

    std::vector<std::array<double, 4>> feats;
    feats.reserve(examples.size());
    for (const auto& e : examples) feats.push_back(proxy_features(e.step_text, e.recent_u_ent));

    UverbProxy proxy;
    Rng rng(seed);
    std::uniform_real_distribution<double> init(-0.01, 0.01);
    for (auto& w : proxy.weights) w = init(rng);

    // Every fifth example is held out for the AUROC report.
    std::vector<std::size_t> train_idx, held_idx;
    for (std::size_t i = 0; i < examples.size(); ++i)
        (i % 5 == 4 ? held_idx : train_idx).push_back(i);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::array<double, 5> grad{};
        for (std::size_t i : train_idx) {
            double z = proxy.weights[4];
            for (std::size_t k = 0; k < 4; ++k) z += proxy.weights[k] * feats[i][k];
            const double err = logistic(z) - examples[i].revised_next;
            for (std::size_t k = 0; k < 4; ++k) grad[k] += err * feats[i][k];
            grad[4] += err;
        }
        for (std::size_t k = 0; k < 5; ++k)
            proxy.weights[k] -= learning_rate * grad[k] / static_cast<double>(train_idx.size());
    }

    auto score_set = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::pair<double, int>> scored;
        scored.reserve(idx.size());
        for (std::size_t i : idx)
            scored.emplace_back(proxy.score(examples[i].step_text, examples[i].recent_u_ent),
                                examples[i].revised_next);
        return scored;
    };
    auto held = score_set(held_idx);
    bool held_pos = false, held_neg = false;
    for (const auto& [s, y] : held) (y ? held_pos : held_neg) = true;
    // A single-class held-out split cannot be ranked; report on the full set.
    proxy.auroc = (held_pos && held_neg) ? auroc_of(held) : auroc_of(score_set(train_idx));
    return proxy;
}

double u_verb(ReasoningBackend& backend, const std::string& context, const std::string& step_text,
              std::span<const double> recent_u_ent, const UverbProxy* proxy,
              WarningLog* warnings) {
    const auto reply = backend.probe_confidence(context + "\n\n" + kConfidenceProbePrompt);
    if (reply) {
        if (auto value = parse_confidence_reply(*reply)) return *value;
        if (!proxy) {
            if (warnings) warnings->add("u_verb: unparseable confidence reply; using fallback 0.5");
            return 0.5;
        }
        return proxy->score(step_text, recent_u_ent);
    }
    if (proxy) return proxy->score(step_text, recent_u_ent);
    if (warnings) warnings->add("u_verb: backend does not support probing; using fallback 0.5");
    return 0.5;
}

double normalized_entropy(std::span<const double> probabilities) {
    const std::size_t m = probabilities.size();
    if (m <= 1) return 0.0;
    double h = 0.0;
    for (double p : probabilities)
        if (p > 0.0) h -= p * std::log(p);
    return std::clamp(h / std::log(static_cast<double>(m)), 0.0, 1.0);
}

double u_ent(const corpus::CorpusIndex& index, const std::vector<EntityMention>& entities, int n) {
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (const auto& e : entities)
        if (seen.insert(e.surface).second) unique.push_back(e.surface);
    if (unique.empty()) return 0.0;

    double total = 0.0;
    for (const auto& surface : unique) {
        const auto dist = corpus::score_distribution(index, "What is " + surface + "?", n);
        if (dist.empty()) {
            total += 1.0;  // no coverage at all
            continue;
        }
        std::vector<double> probs;
        probs.reserve(dist.size());
        for (const auto& [id, p] : dist) probs.push_back(p);
        total += normalized_entropy(probs);
    }
    return total / static_cast<double>(unique.size());
}

double u_cons(ReasoningBackend& backend, const std::string& context, const std::string& step_text,
              int k, WarningLog* warnings) {
    if (k < 2) throw std::invalid_argument("u_cons requires k >= 2");
    const auto tokens = tokenize_stream(step_text);
    bool critical = false;
    for (std::size_t i = 0; i < tokens.size() && !critical; ++i)
        critical = trace::phrase_match_at(tokens, i, trace::discourse_markers());
    if (!critical) return 0.0;

    const auto samples = backend.sample_continuations(context, k);
    if (samples.size() < 2) {
        if (warnings) warnings->add("u_cons: backend cannot sample continuations; using 0.0");
        return 0.0;
    }
    std::vector<std::set<std::string>> sets;
    sets.reserve(samples.size());
    for (const auto& s : samples) {
        const auto terms = tokenize_terms(s);
        sets.emplace_back(terms.begin(), terms.end());
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            std::size_t inter = 0;
            for (const auto& t : sets[i]) inter += sets[j].count(t);
            const std::size_t uni = sets[i].size() + sets[j].size() - inter;
            sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
            ++pairs;
        }
    }
    return std::clamp(1.0 - sum / pairs, 0.0, 1.0);
}

RsusScore combine(const RsusConfig& config, double u_verb, double u_ent, double u_cons) {
    for (double v : {u_verb, u_ent, u_cons})
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("rsus component out of range");
    RsusScore s;
    s.u_verb = u_verb;
    s.u_ent = u_ent;
    s.u_cons = u_cons;
    s.combined = config.alpha * u_verb + config.beta * u_ent + config.gamma * u_cons;
    return s;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pearson: size mismatch");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) throw std::invalid_argument("pearson: zero variance");
    return cov / std::sqrt(va * vb);
}

FitResult fit_weights(const std::vector<LabeledStep>& steps) {
    if (steps.size() < 20) throw std::invalid_argument("too few labeled steps");
    std::vector<double> labels;
    labels.reserve(steps.size());
    for (const auto& s : steps) labels.push_back(s.benefit);
    bool constant = true;
    for (double v : labels)
        if (v != labels.front()) {
            constant = false;
            break;
        }
    if (constant) throw std::invalid_argument("constant labels");

    auto corr_for = [&](double a, double b, double c) -> double {
        std::vector<double> combined;
        combined.reserve(steps.size());
        for (const auto& s : steps) combined.push_back(a * s.u_verb + b * s.u_ent + c * s.u_cons);
        bool degenerate = true;
        for (double v : combined)
            if (v != combined.front()) {
                degenerate = false;
                break;
            }
        if (degenerate) return -2.0;  // below any achievable correlation
        return pearson(combined, labels);
    };

    FitResult result;
    result.equal_weights_correlation = corr_for(1.0 / 3, 1.0 / 3, 1.0 / 3);

    double best = -3.0, best_a = 1.0 / 3, best_b = 1.0 / 3, best_c = 1.0 / 3;
    // 0.05-resolution simplex plus the exact equal-weights point.
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j + i <= 20; ++j) {
            const double a = i * 0.05, b = j * 0.05, c = (20 - i - j) * 0.05;
            const double r = corr_for(a, b, c);
            if (r > best) {
                best = r;
                best_a = a;
                best_b = b;
                best_c = c;
            }
        }
    }
    if (result.equal_weights_correlation > best) {
        best = result.equal_weights_correlation;
        best_a = best_b = best_c = 1.0 / 3;
    }
    if (best <= -2.0) throw std::invalid_argument("degenerate rsus components");

    result.correlation = best;
    result.config = RsusConfig::make(best_a, best_b, best_c);
    return result;
}

}  // namespace adret::rsus
