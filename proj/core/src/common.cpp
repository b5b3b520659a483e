#include "adret/common.hpp"

#include <cmath>
#include <unordered_map>

#include "adret/backend.hpp"

namespace adret {

std::optional<std::string> extract_answer(const std::string& step_text) {
    const auto pos = step_text.find(kAnswerMarker);
    if (pos == std::string::npos) return std::nullopt;
    std::string answer = trim(step_text.substr(pos + std::string(kAnswerMarker).size()));
    while (!answer.empty() &&
           (answer.back() == '.' || answer.back() == '!' || answer.back() == '?')) {
        answer.pop_back();
    }
    return trim(answer);
}

std::vector<std::string> tokenize_terms(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (is_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> tokenize_stream(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
            out.emplace_back("\n");
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool in_space = true;  // swallow leading whitespace
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else {
            out.push_back(c);
            in_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens,
                        std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end && i < tokens.size(); ++i) {
        if (i > begin) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

bool ends_sentence(std::string_view word) {
    std::size_t e = word.size();
    while (e > 0) {
        char c = word[e - 1];
        if (c == '"' || c == '\'' || c == ')' || c == ']') {
            --e;
            continue;
        }
        return c == '.' || c == '!' || c == '?';
    }
    return false;
}

double token_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0.0;
    std::unordered_map<std::string, double> fa, fb;
    for (const auto& t : a) fa[lowercase(t)] += 1.0;
    for (const auto& t : b) fb[lowercase(t)] += 1.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [t, f] : fa) {
        na += f * f;
        auto it = fb.find(t);
        if (it != fb.end()) dot += f * it->second;
    }
    for (const auto& [t, f] : fb) nb += f * f;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace adret
