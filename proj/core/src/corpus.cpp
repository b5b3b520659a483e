#include "adret/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace adret::corpus {

Passage Passage::make(std::string id, std::string title, std::string text) {
    if (text.empty()) throw std::invalid_argument("passage text empty: " + id);
    Passage p;
    p.id = std::move(id);
    p.title = std::move(title);
    p.tokens = tokenize_terms(text);
    p.text = std::move(text);
    return p;
}

CorpusIndex build_index(const std::vector<Passage>& passages) {
    if (passages.empty()) throw std::invalid_argument("empty passage list");
    CorpusIndex index;
    std::set<std::string> seen;
    std::uint64_t total_len = 0;
    for (const auto& p : passages) {
        if (!seen.insert(p.id).second) throw std::invalid_argument("duplicate passage id: " + p.id);
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : p.tokens) ++tf[t];
        for (const auto& [term, count] : tf) index.postings[term].push_back({p.id, count});
        index.doc_lengths[p.id] = static_cast<std::uint32_t>(p.tokens.size());
        total_len += p.tokens.size();
    }
    // Postings were appended in input order; normalize to ascending id.
    for (auto& [term, list] : index.postings) {
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b) { return a.passage_id < b.passage_id; });
    }
    index.doc_count = static_cast<std::uint32_t>(passages.size());
    index.avg_doc_length = static_cast<double>(total_len) / static_cast<double>(index.doc_count);
    return index;
}

double bm25_term_score(std::uint32_t tf, std::uint32_t df, std::uint32_t doc_len,
                       std::uint32_t doc_count, double avg_doc_length, const Bm25Params& p) {
    // Non-negative idf variant: log(1 + (N - df + 0.5) / (df + 0.5)).
    const double idf = std::log(1.0 + (doc_count - df + 0.5) / (df + 0.5));
    const double norm = p.k1 * (1.0 - p.b + p.b * doc_len / avg_doc_length);
    return idf * tf * (p.k1 + 1.0) / (tf + norm);
}

namespace {

// Accumulate BM25 scores for every passage matching at least one query term.
std::vector<std::pair<std::string, double>> score_matches(const CorpusIndex& index,
                                                          const std::string& query) {
    const auto terms = tokenize_terms(query);
    std::map<std::string, std::uint32_t> qtf;
    for (const auto& t : terms) ++qtf[t];

    std::unordered_map<std::string, double> acc;
    for (const auto& [term, qcount] : qtf) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const auto df = static_cast<std::uint32_t>(it->second.size());
        for (const auto& post : it->second) {
            const auto dl = index.doc_lengths.at(post.passage_id);
            acc[post.passage_id] += qcount * bm25_term_score(post.tf, df, dl, index.doc_count,
                                                             index.avg_doc_length, index.bm25);
        }
    }
    std::vector<std::pair<std::string, double>> out(acc.begin(), acc.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

}  // namespace

std::vector<RetrievalResult> retrieve(const CorpusIndex& index, const std::string& query, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    auto scored = score_matches(index, query);
    if (scored.size() > static_cast<std::size_t>(k)) scored.resize(static_cast<std::size_t>(k));
    std::vector<RetrievalResult> out;
    out.reserve(scored.size());
    int rank = 1;
    for (auto& [id, score] : scored) out.push_back({std::move(id), score, rank++});
    return out;
}

std::vector<std::pair<std::string, double>> score_distribution(const CorpusIndex& index,
                                                               const std::string& query, int n) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    auto scored = score_matches(index, query);
    if (scored.size() > static_cast<std::size_t>(n)) scored.resize(static_cast<std::size_t>(n));
    double total = 0.0;
    for (const auto& [id, s] : scored) total += s;
    if (total <= 0.0) return {};
    for (auto& [id, s] : scored) s /= total;
    return scored;
}

std::vector<Passage> split_long_passages(const std::vector<Passage>& raw) {
    std::vector<Passage> out;
    for (const auto& p : raw) {
        if (p.tokens.size() <= kMaxPassageTokens) {
            out.push_back(p);
            continue;
        }
        // Chunk on whitespace-word boundaries so each chunk's text still
        // tokenizes to exactly its token slice.
        std::vector<std::string> words = tokenize_stream(p.text);
        std::vector<std::size_t> word_token_count(words.size());
        for (std::size_t i = 0; i < words.size(); ++i)
            word_token_count[i] = tokenize_terms(words[i]).size();

        std::size_t begin = 0;
        int part = 1;
        while (begin < words.size()) {
            std::size_t tokens = 0, end = begin;
            while (end < words.size() && tokens + word_token_count[end] <= kMaxPassageTokens) {
                tokens += word_token_count[end];
                ++end;
            }
            if (end == begin) ++end;  // single word exceeding the cap
            std::string chunk_text = join_tokens(words, begin, end);
            out.push_back(Passage::make(p.id + "#" + std::to_string(part), p.title, chunk_text));
            ++part;
            if (end >= words.size()) break;
            // Restart with ~32 tokens of overlap.
            std::size_t overlap = 0, back = end;
            while (back > begin && overlap < kSplitOverlapTokens) {
                --back;
                overlap += word_token_count[back];
            }
            begin = (back > begin) ? back : end;
        }
    }
    return out;
}

std::vector<Passage> load_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::vector<Passage> raw;
    std::string line;
    bool world_file = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corpus parse error at line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
        if (lineno == 1 && j.contains("version")) {
            world_file = j.at("version").get<std::string>().rfind("adret-world", 0) == 0;
            if (world_file) continue;
        }
        if (world_file && (!j.contains("type") || j.at("type") != "passage")) continue;
        raw.push_back(Passage::make(j.at("id").get<std::string>(),
                                    j.value("title", std::string{}),
                                    j.at("text").get<std::string>()));
    }
    return split_long_passages(raw);
}

namespace {

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

// Ids may contain spaces in principle; escape the separators we use.
std::string escape_field(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '\\' || c == '\t' || c == '\n') {
            out.push_back('\\');
            out.push_back(c == '\t' ? 't' : (c == '\n' ? 'n' : '\\'));
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string unescape_field(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;
            out.push_back(s[i] == 't' ? '\t' : (s[i] == 'n' ? '\n' : s[i]));
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

}  // namespace

void save_index(const CorpusIndex& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write index file: " + path);
    out << "adret-index/1\n";
    out << "params\t" << hex_double(index.bm25.k1) << '\t' << hex_double(index.bm25.b) << '\n';
    out << "stats\t" << index.doc_count << '\t' << hex_double(index.avg_doc_length) << '\n';
    for (const auto& [id, len] : index.doc_lengths)
        out << "doc\t" << escape_field(id) << '\t' << len << '\n';
    for (const auto& [term, list] : index.postings) {
        out << "term\t" << escape_field(term);
        for (const auto& p : list) out << '\t' << escape_field(p.passage_id) << ' ' << p.tf;
        out << '\n';
    }
}

CorpusIndex load_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open index file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "adret-index/1")
        throw std::runtime_error("unrecognized index file version: " + path);
    CorpusIndex index;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            auto tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        if (fields[0] == "params") {
            index.bm25.k1 = parse_hex_double(fields.at(1));
            index.bm25.b = parse_hex_double(fields.at(2));
        } else if (fields[0] == "stats") {
            index.doc_count = static_cast<std::uint32_t>(std::stoul(fields.at(1)));
            index.avg_doc_length = parse_hex_double(fields.at(2));
        } else if (fields[0] == "doc") {
            index.doc_lengths[unescape_field(fields.at(1))] =
                static_cast<std::uint32_t>(std::stoul(fields.at(2)));
        } else if (fields[0] == "term") {
            auto& list = index.postings[unescape_field(fields.at(1))];
            for (std::size_t i = 2; i < fields.size(); ++i) {
                auto space = fields[i].rfind(' ');
                list.push_back({unescape_field(fields[i].substr(0, space)),
                                static_cast<std::uint32_t>(std::stoul(fields[i].substr(space + 1)))});
            }
        } else {
            throw std::runtime_error("bad index record: " + fields[0]);
        }
    }
    return index;
}

}  // namespace adret::corpus
