#include "adret/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "adret/relations.hpp"
#include "adret/rsus.hpp"

namespace adret::integrate {

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        cur.push_back(text[i]);
        if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
            // Swallow closing quotes attached to the terminator.
            while (i + 1 < text.size() && (text[i + 1] == '"' || text[i + 1] == '\'')) {
                cur.push_back(text[++i]);
            }
            auto s = trim(cur);
            if (!s.empty()) out.push_back(std::move(s));
            cur.clear();
        }
    }
    auto tail = trim(cur);
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

InjectionBlock compress(const std::vector<corpus::Passage>& passages, const std::string& query,
                        const CompressionConfig& config) {
    if (passages.empty()) throw std::invalid_argument("compress: empty passage list");
    const auto query_terms = tokenize_terms(query);

    InjectionBlock block;
    block.source_query = query;
    ScoredSentence best;
    double best_score = -1.0;
    for (const auto& p : passages) {
        for (auto& text : split_sentences(p.text)) {
            ScoredSentence s{p.id, std::move(text), 0.0};
            s.relevance = token_cosine(query_terms, tokenize_terms(s.text));
            if (s.relevance > best_score) {
                best_score = s.relevance;
                best = s;
            }
            if (s.relevance >= config.tau_rel) block.sentences.push_back(std::move(s));
        }
    }
    if (block.sentences.empty()) block.sentences.push_back(std::move(best));  // top-1 fallback
    return block;
}

std::string render_injection(const InjectionBlock& block) {
    if (block.sentences.empty()) throw std::invalid_argument("render_injection: empty block");
    std::string out = kRetrievedOpen;
    out.push_back('\n');
    for (const auto& s : block.sentences) {
        out.push_back('[');
        out += s.passage_id;
        out += "] ";
        out += s.text;
        out.push_back('\n');
    }
    out += kRetrievedClose;
    out.push_back('\n');
    out += kContinuationPrompt;
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_injection(const std::string& rendered) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos < rendered.size()) {
        auto eol = rendered.find('\n', pos);
        if (eol == std::string::npos) eol = rendered.size();
        const std::string line = rendered.substr(pos, eol - pos);
        pos = eol + 1;
        if (line == kRetrievedOpen) continue;
        if (line == kRetrievedClose) break;
        if (line.size() > 1 && line[0] == '[') {
            const auto close = line.find("] ");
            if (close != std::string::npos)
                out.emplace_back(line.substr(1, close - 1), line.substr(close + 2));
        }
    }
    return out;
}

void LatencyModel::validate() const {
    if (retrieval_ms <= 0 || per_token_ms <= 0 || prefix_reuse_discount <= 0 ||
        output_token_price_per_million <= 0)
        throw std::invalid_argument("latency model values must be positive");
}

std::string normalize_query(const std::string& query) {
    std::string s = collapse_whitespace(lowercase(query));
    while (!s.empty() && (s.back() == '?' || s.back() == '.' || s.back() == '!')) s.pop_back();
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

bool SpeculativeCache::insert(const std::string& query,
                              std::vector<corpus::RetrievalResult> results, int creation_step) {
    const auto key = normalize_query(query);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
        it->second.results = std::move(results);  // last write wins
        return false;
    }
    if (entries_.size() >= capacity_ && !creation_order_.empty()) {
        entries_.erase(creation_order_.front());
        creation_order_.pop_front();
    }
    entries_.emplace(key, Entry{std::move(results), creation_step});
    creation_order_.push_back(key);
    return true;
}

bool SpeculativeCache::contains(const std::string& query) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.count(normalize_query(query)) > 0;
}

std::size_t SpeculativeCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

double SpeculativeCache::hit_rate() const {
    const auto total = hits_ + misses_;
    return total == 0 ? 0.0 : static_cast<double>(hits_.load()) / static_cast<double>(total);
}

CacheLookup cache_lookup(SpeculativeCache& cache, const std::string& query,
                         const corpus::CorpusIndex& index, int k, const LatencyModel& latency) {
    const auto key = normalize_query(query);
    {
        std::lock_guard<std::mutex> lock(cache.mutex_);
        auto it = cache.entries_.find(key);
        if (it != cache.entries_.end()) {
            ++cache.hits_;
            return {it->second.results, 1, 0.0};
        }
    }
    ++cache.misses_;
    return {corpus::retrieve(index, query, k), 0, latency.retrieval_ms};
}

namespace {

// Rarity of an entity surface: document frequency of its rarest term.
std::uint64_t min_term_df(const corpus::CorpusIndex& index, const std::string& surface) {
    std::uint64_t best = UINT64_MAX;
    for (const auto& term : tokenize_terms(surface)) {
        auto it = index.postings.find(term);
        const std::uint64_t df = it == index.postings.end() ? 0 : it->second.size();
        best = std::min(best, df);
    }
    return best == UINT64_MAX ? 0 : best;
}

}  // namespace

int speculative_prefetch(SpeculativeCache& cache, const InjectionBlock& retrieved,
                         const corpus::CorpusIndex& index, int k, int current_step) {
    const auto query_terms = tokenize_terms(retrieved.source_query);
    const std::set<std::string> query_term_set(query_terms.begin(), query_terms.end());

    struct Candidate {
        std::string surface;
        std::string sentence;
        std::uint64_t rarity;
    };
    std::vector<Candidate> candidates;
    std::set<std::string> seen;
    for (const auto& s : retrieved.sentences) {
        for (const auto& e : rsus::extract_entities(s.text)) {
            if (!seen.insert(e.surface).second) continue;
            // Skip entities the triggering query already asked about.
            bool in_query = true;
            for (const auto& t : tokenize_terms(e.surface))
                if (!query_term_set.count(t)) {
                    in_query = false;
                    break;
                }
            if (in_query) continue;
            candidates.push_back({e.surface, s.text, min_term_df(index, e.surface)});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.rarity != b.rarity) return a.rarity < b.rarity;
        return a.surface < b.surface;
    });
    if (candidates.size() > kPrefetchEntityCap) candidates.resize(kPrefetchEntityCap);

    int issued = 0;
    for (const auto& c : candidates) {
        const auto* relation = relations::detect(c.sentence);
        const std::string query = relation ? relations::render_question(*relation, c.surface)
                                           : "What is " + c.surface + "?";
        if (cache.contains(query)) continue;
        cache.insert(query, corpus::retrieve(index, query, k), current_step);
        cache.count_issued();
        ++issued;
    }
    return issued;
}

LatencyReport account(const std::vector<RetrievalEvent>& events, std::size_t output_tokens,
                      const LatencyModel& model, std::optional<double> f1) {
    model.validate();
    LatencyReport report;
    report.total_calls = events.size();
    double restart_ms = 0.0;
    for (const auto& e : events) {
        if (!e.hit) {
            ++report.charged_calls;
            report.charged_retrieval_ms += e.charged_latency_ms;
        }
        restart_ms += static_cast<double>(e.context_tokens) * model.per_token_ms /
                      model.prefix_reuse_discount;
    }
    if (report.total_calls > 0)
        report.per_call_ms =
            report.charged_retrieval_ms / static_cast<double>(report.total_calls);
    report.simulated_e2e_ms = static_cast<double>(output_tokens) * model.per_token_ms +
                              report.charged_retrieval_ms + restart_ms;
    report.output_token_cost =
        static_cast<double>(output_tokens) * model.output_token_price_per_million / 1e6;
    if (f1) report.f1_per_call = f1_per_call(*f1, static_cast<double>(report.total_calls));
    return report;
}

std::optional<double> f1_per_call(double f1, double avg_calls) {
    if (avg_calls <= 0.0) return std::nullopt;
    return f1 / avg_calls;
}

}  // namespace adret::integrate
