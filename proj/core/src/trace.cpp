#include "adret/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace adret::trace {

TokenStream TokenStream::from_text(std::string_view text, StreamSource source) {
    TokenStream s;
    s.tokens = tokenize_stream(text);
    s.source = source;
    return s;
}

std::string TokenStream::text() const { return join_tokens(tokens, 0, tokens.size()); }

namespace {

std::string clean_token(const std::string& t) {
    std::string out;
    for (char c : t)
        if (is_alnum(c)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

double cosine_of_ranges(const std::vector<std::string>& tokens, std::size_t a_begin,
                        std::size_t a_end, std::size_t b_begin, std::size_t b_end) {
    std::unordered_map<std::string, double> fa, fb;
    for (std::size_t i = a_begin; i < a_end; ++i) {
        auto t = clean_token(tokens[i]);
        if (!t.empty()) fa[t] += 1.0;
    }
    for (std::size_t i = b_begin; i < b_end; ++i) {
        auto t = clean_token(tokens[i]);
        if (!t.empty()) fb[t] += 1.0;
    }
    if (fa.empty() || fb.empty()) return 1.0;  // no evidence of shift
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [t, f] : fa) {
        na += f * f;
        auto it = fb.find(t);
        if (it != fb.end()) dot += f * it->second;
    }
    for (const auto& [t, f] : fb) nb += f * f;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

const std::vector<std::string>& discourse_markers() {
    static const std::vector<std::string> markers = {
        "therefore", "however", "this means", "so",   "next",
        "let me verify", "to confirm", "thus", "hence"};
    return markers;
}

const std::vector<std::string>& logical_connectives() {
    static const std::vector<std::string> connectives = {
        "because", "since", "implies", "consequently", "it follows that", "as a result"};
    return connectives;
}

bool phrase_match_at(const std::vector<std::string>& tokens, std::size_t pos,
                     const std::vector<std::string>& lexicon) {
    for (const auto& phrase : lexicon) {
        auto words = tokenize_terms(phrase);
        if (words.empty() || pos + words.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (clean_token(tokens[pos + i]) != words[i]) {
                ok = false;
                break;
            }
        }
        if (ok) return true;
    }
    return false;
}

std::vector<std::size_t> candidate_positions(const TokenStream& stream) {
    std::vector<std::size_t> out;
    for (std::size_t p = 1; p < stream.tokens.size(); ++p) {
        const auto& prev = stream.tokens[p - 1];
        if (prev == "\n" || ends_sentence(prev)) out.push_back(p);
    }
    return out;
}

BoundaryFeatures boundary_features(const std::vector<std::string>& tokens, std::size_t pos,
                                   std::size_t window_begin, std::size_t window_end) {
    BoundaryFeatures f;
    f.discourse_marker_hit = phrase_match_at(tokens, pos, discourse_markers()) ? 1.0 : 0.0;
    f.logical_connective_hit = phrase_match_at(tokens, pos, logical_connectives()) ? 1.0 : 0.0;

    const std::size_t before_begin =
        std::max(window_begin, pos >= kTopicContextTokens ? pos - kTopicContextTokens : 0);
    const std::size_t after_end = std::min(window_end, pos + kTopicContextTokens);
    const double cos = cosine_of_ranges(tokens, before_begin, pos, pos, after_end);
    f.topic_shift_score = std::clamp(1.0 - cos, 0.0, 1.0);

    // Skip a newline token to find the word carrying the sentence end.
    std::size_t q = pos;
    while (q > window_begin && tokens[q - 1] == "\n") --q;
    const bool punct = q > window_begin && ends_sentence(tokens[q - 1]);
    const auto& next = tokens[pos];
    const bool opener =
        next == "\n" || (!next.empty() && std::isupper(static_cast<unsigned char>(next[0])));
    f.punctuation_signal = (punct && opener) ? 1.0 : 0.0;
    return f;
}

double SegmenterModel::probability(const BoundaryFeatures& f) const {
    const auto x = f.as_array();
    double z = weights[kFeatureCount];
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += weights[i] * x[i];
    return 1.0 / (1.0 + std::exp(-z));
}

SegmenterModel SegmenterModel::bundled() {
    SegmenterModel m;
    m.weights = {2.5, 0.8, 0.6, 1.5, -2.0};
    m.decision_threshold = 0.5;
    return m;
}

std::vector<std::pair<std::size_t, double>> boundary_probabilities(const TokenStream& stream,
                                                                   const SegmenterModel& model,
                                                                   int window, int stride) {
    if (stream.tokens.empty()) throw std::invalid_argument("empty stream");
    if (stride < 1 || window < stride) throw std::invalid_argument("require window >= stride >= 1");
    const auto candidates = candidate_positions(stream);
    const std::size_t n = stream.tokens.size();

    std::vector<double> sum(candidates.size(), 0.0);
    std::vector<int> hits(candidates.size(), 0);
    for (std::size_t wb = 0;; wb += static_cast<std::size_t>(stride)) {
        const std::size_t we = std::min(n, wb + static_cast<std::size_t>(window));
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            const std::size_t p = candidates[ci];
            if (p > wb && p < we) {
                sum[ci] += model.probability(boundary_features(stream.tokens, p, wb, we));
                ++hits[ci];
            }
        }
        if (we >= n) break;
    }

    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(candidates.size());
    for (std::size_t ci = 0; ci < candidates.size(); ++ci)
        out.emplace_back(candidates[ci], hits[ci] > 0 ? sum[ci] / hits[ci] : 0.0);
    return out;
}

std::vector<ReasoningStep> segment(const TokenStream& stream, const SegmenterModel& model,
                                   int window, int stride) {
    const auto probs = boundary_probabilities(stream, model, window, stride);

    std::vector<std::pair<std::size_t, double>> boundaries;
    for (const auto& [pos, p] : probs)
        if (p > model.decision_threshold) boundaries.emplace_back(pos, p);

    std::vector<ReasoningStep> steps;
    std::size_t begin = 0;
    double confidence = 1.0;
    int idx = 1;
    auto flush = [&](std::size_t end) {
        ReasoningStep s;
        s.index = idx++;
        s.span_begin = begin;
        s.span_end = end;
        s.text = join_tokens(stream.tokens, begin, end);
        s.boundary_confidence = confidence;
        steps.push_back(std::move(s));
    };
    for (const auto& [pos, p] : boundaries) {
        flush(pos);
        begin = pos;
        confidence = p;
    }
    flush(stream.tokens.size());
    return steps;
}

namespace {

struct CandidateExample {
    BoundaryFeatures features;
    int label = 0;
};

void collect_examples(const AnnotatedStream& a, int window, int stride,
                      std::vector<CandidateExample>& out) {
    const auto candidates = candidate_positions(a.stream);
    const std::set<std::size_t> gold(a.boundaries.begin(), a.boundaries.end());
    const std::size_t n = a.stream.tokens.size();
    for (std::size_t wb = 0;; wb += static_cast<std::size_t>(stride)) {
        const std::size_t we = std::min(n, wb + static_cast<std::size_t>(window));
        for (std::size_t p : candidates) {
            if (p > wb && p < we)
                out.push_back({boundary_features(a.stream.tokens, p, wb, we),
                               gold.count(p) ? 1 : 0});
        }
        if (we >= n) break;
    }
}

}  // namespace

SegmenterReport train_segmenter(const std::vector<AnnotatedStream>& annotated, std::uint64_t seed,
                                int epochs, double learning_rate,
                                std::array<bool, kFeatureCount> feature_mask) {
    if (annotated.size() < 10) throw std::invalid_argument("insufficient training data");
    for (const auto& a : annotated)
        if (a.stream.tokens.empty()) throw std::invalid_argument("insufficient training data");

    // Deterministic held-out split: every fifth stream.
    std::vector<CandidateExample> train;
    std::vector<const AnnotatedStream*> heldout;
    for (std::size_t i = 0; i < annotated.size(); ++i) {
        if (i % 5 == 4)
            heldout.push_back(&annotated[i]);
        else
            collect_examples(annotated[i], kDefaultWindow, kDefaultStride, train);
    }

    SegmenterModel model;
    model.weights.fill(0.0);
    Rng rng(seed);
    std::uniform_real_distribution<double> init(-0.01, 0.01);
    for (auto& w : model.weights) w = init(rng);
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (!feature_mask[i]) model.weights[i] = 0.0;

    const double n = static_cast<double>(train.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::array<double, kFeatureCount + 1> grad{};
        for (const auto& ex : train) {
            const double p = model.probability(ex.features);
            const double err = p - ex.label;
            const auto x = ex.features.as_array();
            for (std::size_t i = 0; i < kFeatureCount; ++i)
                if (feature_mask[i]) grad[i] += err * x[i];
            grad[kFeatureCount] += err;
        }
        for (std::size_t i = 0; i <= kFeatureCount; ++i)
            model.weights[i] -= learning_rate * grad[i] / n;
    }

    SegmenterReport report;
    report.model = model;
    report.heldout_streams = heldout.size();
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto* a : heldout) {
        const auto steps = segment(a->stream, model);
        std::set<std::size_t> pred;
        for (std::size_t i = 1; i < steps.size(); ++i) pred.insert(steps[i].span_begin);
        const std::set<std::size_t> gold(a->boundaries.begin(), a->boundaries.end());
        for (auto p : pred) gold.count(p) ? ++tp : ++fp;
        for (auto g : gold)
            if (!pred.count(g)) ++fn;
    }
    report.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    report.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    report.f1 = (report.precision + report.recall > 0)
                    ? 2 * report.precision * report.recall / (report.precision + report.recall)
                    : 0.0;
    return report;
}

namespace {

const std::vector<std::vector<std::string>>& topic_pools() {
    static const std::vector<std::vector<std::string>> pools = {
        {"river",  "delta",   "basin",  "flood",   "sediment", "channel", "bank",
         "stream", "current", "valley", "estuary", "gravel",   "silt",    "meander"},
        {"engine", "piston", "torque", "valve",  "cylinder", "fuel",    "ignition",
         "shaft",  "gear",   "clutch", "intake", "exhaust",  "bearing", "manifold"},
        {"ledger", "credit", "debit",   "balance", "account", "audit",  "invoice",
         "margin", "asset",  "revenue", "expense", "capital", "budget", "interest"},
        {"orbit",   "planet",  "comet",   "gravity", "lunar",    "stellar", "nebula",
         "eclipse", "transit", "perigee", "vector",  "velocity", "horizon", "flare"},
        {"protein", "enzyme", "membrane", "nucleus", "cell",    "tissue",  "receptor",
         "ligand",  "genome", "sequence", "folding", "pathway", "culture", "assay"}};
    return pools;
}

}  // namespace

std::vector<AnnotatedStream> synthetic_annotated_traces(std::uint64_t seed, std::size_t count) {
    const auto& pools = topic_pools();
    const auto& markers = discourse_markers();
    const auto& connectives = logical_connectives();
    std::vector<AnnotatedStream> out;
    out.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        Rng rng(derive_seed(seed, t));
        std::uniform_int_distribution<std::size_t> pool_pick(0, pools.size() - 1);
        std::uniform_int_distribution<int> steps_per_trace(3, 6);
        std::uniform_int_distribution<int> sentences_per_step(2, 6);
        std::uniform_int_distribution<int> words_per_sentence(6, 14);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        AnnotatedStream a;
        a.stream.source = StreamSource::synthetic;
        auto& tokens = a.stream.tokens;
        const int n_steps = steps_per_trace(rng);
        for (int s = 0; s < n_steps; ++s) {
            const auto& pool = pools[pool_pick(rng)];
            std::uniform_int_distribution<std::size_t> word_pick(0, pool.size() - 1);
            if (s > 0) a.boundaries.push_back(tokens.size());
            const int n_sent = sentences_per_step(rng);
            for (int j = 0; j < n_sent; ++j) {
                std::vector<std::string> words;
                if (j == 0 && s > 0) {
                    // Marker phrase opens the step.
                    auto phrase = tokenize_terms(markers[rng() % markers.size()]);
                    phrase[0][0] = static_cast<char>(std::toupper(
                        static_cast<unsigned char>(phrase[0][0])));
                    for (auto& w : phrase) words.push_back(w);
                    words.back() += ",";
                }
                const int n_words = words_per_sentence(rng);
                for (int w = 0; w < n_words; ++w) {
                    std::string word = pool[word_pick(rng)];
                    if (words.empty() && w == 0)
                        word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
                    words.push_back(std::move(word));
                }
                if (unit(rng) < 0.15) {
                    // Occasional mid-sentence connective.
                    words.insert(words.begin() + static_cast<long>(words.size() / 2),
                                 connectives[rng() % 4]);
                }
                words.back() += ".";
                for (auto& w : words) tokens.push_back(std::move(w));
            }
        }
        out.push_back(std::move(a));
    }
    return out;
}

double step_to_sentence_length_ratio(const std::vector<AnnotatedStream>& traces) {
    std::uint64_t step_tokens = 0, sentence_count = 0, step_count = 0;
    for (const auto& a : traces) {
        step_tokens += a.stream.tokens.size();
        step_count += a.boundaries.size() + 1;
        for (const auto& t : a.stream.tokens)
            if (ends_sentence(t)) ++sentence_count;
    }
    if (step_count == 0 || sentence_count == 0) return 0.0;
    const double mean_step = static_cast<double>(step_tokens) / static_cast<double>(step_count);
    const double mean_sentence =
        static_cast<double>(step_tokens) / static_cast<double>(sentence_count);
    return mean_step / mean_sentence;
}

void save_segmenter(const SegmenterModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write segmenter file: " + path);
    out << "adret-segmenter/1\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", model.decision_threshold);
    out << "threshold\t" << buf << '\n';
    out << "weights";
    for (double w : model.weights) {
        std::snprintf(buf, sizeof(buf), "%a", w);
        out << '\t' << buf;
    }
    out << '\n';
}

SegmenterModel load_segmenter(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open segmenter file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "adret-segmenter/1")
        throw std::runtime_error("unrecognized segmenter file version: " + path);
    SegmenterModel m;
    while (std::getline(in, line)) {
        if (line.rfind("threshold\t", 0) == 0) {
            m.decision_threshold = std::strtod(line.c_str() + 10, nullptr);
        } else if (line.rfind("weights", 0) == 0) {
            const char* p = line.c_str() + 7;
            for (auto& w : m.weights) {
                char* end = nullptr;
                w = std::strtod(p, &end);
                p = end;
            }
        }
    }
    return m;
}

void save_annotated(const std::vector<AnnotatedStream>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    for (const auto& a : traces) {
        nlohmann::json j;
        j["tokens"] = a.stream.tokens;
        j["boundaries"] = a.boundaries;
        out << j.dump() << '\n';
    }
}

std::vector<AnnotatedStream> load_annotated(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    std::vector<AnnotatedStream> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        AnnotatedStream a;
        a.stream.tokens = j.at("tokens").get<std::vector<std::string>>();
        a.stream.source = StreamSource::external;
        a.boundaries = j.at("boundaries").get<std::vector<std::size_t>>();
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace adret::trace
