#include "adret/relations.hpp"

#include <stdexcept>

#include "adret/common.hpp"

namespace adret::relations {

const std::vector<Relation>& catalog() {
    static const std::vector<Relation> table = {
        {"director", {"director", "directed", "directs"},
         "{S} was directed by {O}.", "Who directed {S}?"},
        {"author", {"author", "wrote", "written"},
         "The author of {S} is {O}.", "What is {S}'s author?"},
        {"capital", {"capital"},
         "The capital of {S} is {O}.", "What is {S}'s capital?"},
        {"founder", {"founder", "founded"},
         "{S} was founded by {O}.", "Who founded {S}?"},
        {"spouse", {"spouse", "married"},
         "The spouse of {S} is {O}.", "What is {S}'s spouse?"},
        {"mentor", {"mentor", "mentored"},
         "The mentor of {S} is {O}.", "What is {S}'s mentor?"},
        {"employer", {"employer", "employed"},
         "The employer of {S} is {O}.", "What is {S}'s employer?"},
        {"birthplace", {"birthplace", "born"},
         "The birthplace of {S} is {O}.", "What is {S}'s birthplace?"},
    };
    return table;
}

const Relation* find(const std::string& name) {
    for (const auto& r : catalog())
        if (r.name == name) return &r;
    return nullptr;
}

const Relation* detect(const std::string& text) {
    const auto tokens = tokenize_terms(text);
    for (const auto& tok : tokens) {
        for (const auto& r : catalog()) {
            for (const auto& alias : r.aliases)
                if (tok == alias) return &r;
        }
    }
    return nullptr;
}

namespace {

std::string substitute(const std::string& pattern, const std::string& subject,
                       const std::string& object) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern.compare(i, 3, "{S}") == 0) {
            out += subject;
            i += 2;
        } else if (pattern.compare(i, 3, "{O}") == 0) {
            out += object;
            i += 2;
        } else {
            out.push_back(pattern[i]);
        }
    }
    return out;
}

}  // namespace

std::string render_fact(const Relation& r, const std::string& subject, const std::string& object) {
    return substitute(r.fact_pattern, subject, object);
}

std::string render_question(const Relation& r, const std::string& entity) {
    return substitute(r.question_pattern, entity, "");
}

}  // namespace adret::relations
