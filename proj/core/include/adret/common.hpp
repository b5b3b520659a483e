#pragma once

#include <cctype>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace adret {

using Rng = std::mt19937_64;

/// Collects non-fatal events (fallbacks, unparseable replies) raised by
/// scoring operations so callers can inspect or surface them.
class WarningLog {
public:
    void add(std::string msg) { messages_.push_back(std::move(msg)); }
    const std::vector<std::string>& messages() const { return messages_; }
    std::size_t size() const { return messages_.size(); }
    bool empty() const { return messages_.empty(); }
    void clear() { messages_.clear(); }

private:
    std::vector<std::string> messages_;
};

inline bool is_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

/// Lowercase, split on non-alphanumeric. The canonical term tokenizer used
/// by the corpus index, topic vectors and answer metrics. No stemming.
std::vector<std::string> tokenize_terms(std::string_view text);

/// Split into surface word tokens: maximal whitespace-free runs, with each
/// newline emitted as its own "\n" token. Preserves punctuation and case.
std::vector<std::string> tokenize_stream(std::string_view text);

std::string lowercase(std::string_view s);

/// Strip leading/trailing whitespace.
std::string trim(std::string_view s);

/// Collapse internal whitespace runs to single spaces and trim.
std::string collapse_whitespace(std::string_view s);

/// Join tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens,
                        std::size_t begin, std::size_t end);

/// Stable 64-bit FNV-1a. Used wherever hashes must be identical across
/// platforms and standard library implementations.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Derive an independent stream seed from a base seed and indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = base;
    h ^= a + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

/// True if the word carries sentence-final punctuation ('.', '!' or '?'),
/// ignoring trailing quotes/brackets.
bool ends_sentence(std::string_view word);

/// Cosine similarity of two term-frequency maps built from token ranges.
/// Returns 0 when either side is empty.
double token_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace adret
