#pragma once

#include <optional>
#include <string>
#include <vector>

namespace adret::relations {

/// One relation type of the bundled lexicon. Fact sentences and information-
/// need questions deliberately share their key term so lexical retrieval can
/// connect them without stemming.
struct Relation {
    std::string name;                       // noun form, e.g. "director"
    std::vector<std::string> aliases;       // detection terms, lowercased
    std::string fact_pattern;               // "{S} was directed by {O}."
    std::string question_pattern;           // "Who directed {S}?"
};

const std::vector<Relation>& catalog();

const Relation* find(const std::string& name);

/// First relation whose alias occurs in the text (token-wise, lowercased),
/// scanning the text left to right.
const Relation* detect(const std::string& text);

std::string render_fact(const Relation& r, const std::string& subject,
                        const std::string& object);

/// The information-need question for (relation, entity).
std::string render_question(const Relation& r, const std::string& entity);

}  // namespace adret::relations
