#include "adret/env.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "adret/integrate.hpp"
#include "adret/relations.hpp"

namespace adret::env {

const Fact* FactWorld::find_fact(const std::string& subject, const std::string& relation) const {
    auto it = lookup_.find({subject, relation});
    return it == lookup_.end() ? nullptr : &facts[it->second];
}

const std::vector<std::string>& FactWorld::objects_of(const std::string& relation) const {
    static const std::vector<std::string> empty;
    auto it = relation_objects_.find(relation);
    return it == relation_objects_.end() ? empty : it->second;
}

void FactWorld::rebuild_lookup() {
    lookup_.clear();
    relation_objects_.clear();
    for (std::size_t i = 0; i < facts.size(); ++i) {
        lookup_[{facts[i].subject, facts[i].relation}] = i;
        auto& objs = relation_objects_[facts[i].relation];
        if (std::find(objs.begin(), objs.end(), facts[i].object) == objs.end())
            objs.push_back(facts[i].object);
    }
}

namespace {

std::vector<std::string> make_name_tokens(std::size_t count, Rng& rng) {
    static const std::vector<std::string> onsets = {
        "bar", "bel", "cor",  "dan", "dor", "fal", "fen", "gar", "gol", "hal", "hol", "jar",
        "jun", "kel", "kor",  "lan", "lor", "mar", "mer", "nal", "nor", "pel", "por", "quin",
        "ral", "ros", "sal",  "sor", "tal", "tor", "val", "ven", "war", "wil", "yar", "zan"};
    static const std::vector<std::string> mids = {"", "a", "e", "i", "o", "u"};
    static const std::vector<std::string> tails = {"a",  "eth", "ia", "io", "on",
                                                   "or", "un",  "us", "yn", "el"};
    std::vector<std::string> pool;
    pool.reserve(onsets.size() * mids.size() * tails.size());
    for (const auto& o : onsets)
        for (const auto& m : mids)
            for (const auto& t : tails) pool.push_back(o + m + t);
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& token : pool) {
        if (!seen.insert(token).second) continue;
        token[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
        out.push_back(token);
        if (out.size() == count) return out;
    }
    throw std::invalid_argument("name pool exhausted; reduce entity count");
}

}  // namespace

WorldGenResult generate_world(std::uint64_t seed, int n_entities, int relation_types) {
    if (n_entities < 20) throw std::invalid_argument("insufficient entities for 4-hop chains");
    if (relation_types < 2) throw std::invalid_argument("need at least 2 relation types");
    if (relation_types > static_cast<int>(relations::catalog().size()))
        throw std::invalid_argument("relation catalog has only " +
                                    std::to_string(relations::catalog().size()) + " types");

    WorldGenResult result;
    FactWorld& world = result.world;
    world.seed = seed;
    Rng rng(derive_seed(seed, 0x9031d));

    const auto tokens = make_name_tokens(static_cast<std::size_t>(2 * n_entities), rng);
    for (int i = 0; i < n_entities; ++i)
        world.entities.push_back(tokens[2 * i] + " " + tokens[2 * i + 1]);
    for (int r = 0; r < relation_types; ++r)
        world.relations.push_back(relations::catalog()[r].name);

    const auto n = static_cast<std::size_t>(n_entities);
    std::set<std::pair<std::string, std::string>> used;
    // Spine: e_i -> e_{i+1}, guaranteeing chains of every length.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto& rel = world.relations[rng() % world.relations.size()];
        world.facts.push_back({world.entities[i], rel, world.entities[i + 1]});
        used.insert({world.entities[i], rel});
    }
    // Extra density so wrong-guess pools and branching exist.
    const std::size_t extra = n / 2;
    for (std::size_t i = 0; i < extra; ++i) {
        const auto& s = world.entities[rng() % n];
        const auto& rel = world.relations[rng() % world.relations.size()];
        const auto& o = world.entities[rng() % n];
        if (o == s || used.count({s, rel})) continue;
        world.facts.push_back({s, rel, o});
        used.insert({s, rel});
    }
    world.rebuild_lookup();
    result.fact_count = world.facts.size();

    for (std::size_t i = 0; i < world.facts.size(); ++i) {
        const auto& f = world.facts[i];
        const auto* rel = relations::find(f.relation);
        result.passages.push_back(corpus::Passage::make(
            "f" + std::to_string(i), f.subject, relations::render_fact(*rel, f.subject, f.object)));
    }
    // Distractors reuse subjects with wrong relations, 1:1 with facts.
    for (std::size_t i = 0; i < result.fact_count; ++i) {
        const auto& f = world.facts[i];
        for (int attempt = 0; attempt < 16; ++attempt) {
            const auto& rel_name = world.relations[rng() % world.relations.size()];
            const auto& o = world.entities[rng() % n];
            if (rel_name == f.relation || used.count({f.subject, rel_name}) || o == f.subject)
                continue;
            const auto* rel = relations::find(rel_name);
            result.passages.push_back(
                corpus::Passage::make("d" + std::to_string(i), f.subject,
                                      relations::render_fact(*rel, f.subject, o)));
            ++result.distractor_count;
            break;
        }
    }
    return result;
}

std::vector<SyntheticQuestion> generate_questions(const FactWorld& world, int hops, int n,
                                                  double gap_rate, std::uint64_t seed) {
    if (hops < 2 || hops > 4) throw std::invalid_argument("hops outside [2,4]");
    if (gap_rate < 0.0 || gap_rate > 1.0) throw std::invalid_argument("gap_rate outside [0,1]");
    if (n < 1) throw std::invalid_argument("question count must be >= 1");
    if (world.entities.empty() || world.facts.empty())
        throw std::invalid_argument("empty world");

    // Outgoing adjacency for random chain walks.
    std::map<std::string, std::vector<std::size_t>> outgoing;
    for (std::size_t i = 0; i < world.facts.size(); ++i)
        outgoing[world.facts[i].subject].push_back(i);

    Rng rng(derive_seed(seed, 0x90e57));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<SyntheticQuestion> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int qi = 0; qi < n; ++qi) {
        std::vector<Fact> chain;
        for (int attempt = 0; attempt < 200 && chain.empty(); ++attempt) {
            std::vector<Fact> walk;
            std::string at = world.entities[rng() % world.entities.size()];
            for (int h = 0; h < hops; ++h) {
                auto it = outgoing.find(at);
                if (it == outgoing.end()) break;
                const auto& f = world.facts[it->second[rng() % it->second.size()]];
                walk.push_back(f);
                at = f.object;
            }
            if (static_cast<int>(walk.size()) == hops) chain = std::move(walk);
        }
        if (chain.empty()) throw std::runtime_error("could not build a chain; world too sparse");

        SyntheticQuestion q;
        q.id = "q" + std::to_string(qi);
        q.hops = hops;
        q.gold_chain = chain;
        q.gold_answer = chain.back().object;
        std::string text = "What is ";
        for (int h = hops - 1; h >= 0; --h) text += "the " + chain[h].relation + " of ";
        text += chain.front().subject + "?";
        q.text = std::move(text);
        for (int h = 1; h <= hops; ++h)
            if (unit(rng) < gap_rate) q.gap_steps.insert(h);
        out.push_back(std::move(q));
    }
    return out;
}

SyntheticBackend::SyntheticBackend(const FactWorld& world, const SyntheticQuestion& question,
                                   std::uint64_t seed)
    : world_(world), question_(question), seed_(seed) {}

std::string SyntheticBackend::wrong_object(int hop, const std::string& subject,
                                           std::uint64_t salt) const {
    const auto& relation = question_.gold_chain[static_cast<std::size_t>(hop) - 1].relation;
    const auto* fact = world_.find_fact(subject, relation);
    std::vector<std::string> candidates;
    for (const auto& o : world_.objects_of(relation))
        if ((!fact || o != fact->object) && o != subject) candidates.push_back(o);
    const auto pick = derive_seed(seed_, fnv1a(subject) + static_cast<std::uint64_t>(hop), salt);
    if (candidates.empty()) {
        // Degenerate relation pool; fall back to an arbitrary other entity.
        return world_.entities[pick % world_.entities.size()];
    }
    return candidates[pick % candidates.size()];
}

namespace {
const char* hop_marker(int hop) {
    static const char* cycle[] = {"Next", "Therefore", "Thus"};
    return cycle[(hop - 2) % 3];
}
}  // namespace

std::string SyntheticBackend::confident_text(int hop, const std::string& subject,
                                             const std::string& object, bool correction) const {
    const auto& relation = question_.gold_chain[static_cast<std::size_t>(hop) - 1].relation;
    if (correction)
        return "To confirm, the " + relation + " of " + subject + " is actually " + object + ".";
    if (hop == 1) return "The " + relation + " of " + subject + " is " + object + ".";
    return std::string(hop_marker(hop)) + ", the " + relation + " of " + subject + " is " +
           object + ".";
}

std::string SyntheticBackend::hedged_text(int hop, const std::string& subject,
                                          const std::string& object) const {
    const auto& relation = question_.gold_chain[static_cast<std::size_t>(hop) - 1].relation;
    const std::string core =
        "I think the " + relation + " of " + subject + " is probably " + object + ".";
    if (hop == 1) return core;
    return std::string(hop_marker(hop)) + ", " + core;
}

std::set<std::string> SyntheticBackend::injected_sentences(const std::string& context) const {
    std::set<std::string> out;
    std::size_t pos = 0;
    while ((pos = context.find(integrate::kRetrievedOpen, pos)) != std::string::npos) {
        for (const auto& [id, sentence] : integrate::parse_injection(context.substr(pos)))
            out.insert(sentence);
        pos += 1;
    }
    return out;
}

ReasoningBackend::Step SyntheticBackend::next_step(const std::string& context) {
    if (context.rfind(question_.text, 0) != 0)
        throw std::runtime_error("malformed context: missing question prefix");
    if (answered_) return {last_text_, true};

    const auto injected = injected_sentences(context);

    // Revisit the earliest wrong hop whose true fact is now in evidence.
    for (std::size_t j = 0; j < emitted_.size(); ++j) {
        if (!emitted_[j].wrong) continue;
        const int hop = static_cast<int>(j) + 1;
        const auto& relation = question_.gold_chain[j].relation;
        const auto* fact = world_.find_fact(emitted_[j].subject, relation);
        if (!fact) continue;
        const auto* rel = relations::find(relation);
        if (!injected.count(relations::render_fact(*rel, fact->subject, fact->object))) continue;
        emitted_.resize(j + 1);
        emitted_[j] = {fact->subject, fact->object, false};
        ++steps_emitted_;
        last_hop_ = hop;
        last_wrong_ = false;
        last_text_ = confident_text(hop, fact->subject, fact->object, true);
        return {last_text_, false};
    }

    const int hop = static_cast<int>(emitted_.size()) + 1;
    if (hop <= question_.hops) {
        const std::string subject =
            hop == 1 ? question_.gold_chain.front().subject : emitted_.back().object;
        const auto& relation = question_.gold_chain[static_cast<std::size_t>(hop) - 1].relation;
        const auto* fact = world_.find_fact(subject, relation);
        const bool on_gold_subject =
            subject == question_.gold_chain[static_cast<std::size_t>(hop) - 1].subject;
        const bool withheld = question_.gap_steps.count(hop) > 0 && on_gold_subject;
        const bool known = fact != nullptr && !withheld;
        bool visible = false;
        if (fact) {
            const auto* rel = relations::find(relation);
            visible = injected.count(relations::render_fact(*rel, subject, fact->object)) > 0;
        }

        ++steps_emitted_;
        last_hop_ = hop;
        if (known || visible) {
            emitted_.push_back({subject, fact->object, false});
            last_wrong_ = false;
            last_text_ = confident_text(hop, subject, fact->object, false);
        } else {
            const auto wrong = wrong_object(hop, subject, 0);
            emitted_.push_back({subject, wrong, true});
            ++hedged_emitted_;
            last_wrong_ = true;
            last_text_ = hedged_text(hop, subject, wrong);
        }
        return {last_text_, false};
    }

    ++steps_emitted_;
    last_hop_ = question_.hops + 1;
    last_wrong_ = false;
    last_text_ = "Therefore, ANSWER: " + emitted_.back().object + ".";
    answered_ = true;
    return {last_text_, true};
}

std::vector<std::string> SyntheticBackend::sample_continuations(const std::string& context,
                                                                int k) {
    (void)context;
    if (steps_emitted_ == 0 || k < 1) return {};
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(k));
    if (!last_wrong_) {
        // A grounded step regenerates identically.
        for (int i = 0; i < k; ++i) out.push_back(last_text_);
        return out;
    }
    const auto& subject = emitted_.back().subject;
    for (int i = 0; i < k; ++i)
        out.push_back(hedged_text(last_hop_, subject,
                                  wrong_object(last_hop_, subject,
                                               static_cast<std::uint64_t>(i) + 1)));
    return out;
}

std::optional<std::string> SyntheticBackend::probe_confidence(const std::string& context) {
    (void)context;
    if (steps_emitted_ == 0) return "50";
    const auto jitter = derive_seed(seed_, 0xc0f, static_cast<std::uint64_t>(steps_emitted_));
    const int c = last_wrong_ ? 20 + static_cast<int>(jitter % 21)    // 20..40
                              : 85 + static_cast<int>(jitter % 11);   // 85..95
    return std::to_string(c);
}

ReplayBackend::ReplayBackend(ReplayTrace trace) : trace_(std::move(trace)) {
    if (trace_.steps.empty()) throw std::invalid_argument("replay trace has no steps");
}

ReasoningBackend::Step ReplayBackend::next_step(const std::string& context) {
    (void)context;
    if (cursor_ >= trace_.steps.size()) return {trace_.steps.back(), true};
    const auto& text = trace_.steps[cursor_];
    ++cursor_;
    return {text, cursor_ == trace_.steps.size()};
}

std::vector<std::string> ReplayBackend::sample_continuations(const std::string& context, int k) {
    (void)context;
    if (cursor_ == 0) return {};
    const std::size_t idx = cursor_ - 1;
    if (idx >= trace_.alternatives.size() || trace_.alternatives[idx].empty()) return {};
    auto alts = trace_.alternatives[idx];
    if (alts.size() > static_cast<std::size_t>(k)) alts.resize(static_cast<std::size_t>(k));
    return alts;
}

std::optional<std::string> ReplayBackend::probe_confidence(const std::string& context) {
    (void)context;
    if (cursor_ == 0) return std::nullopt;
    const std::size_t idx = cursor_ - 1;
    if (idx >= trace_.confidence_replies.size() || trace_.confidence_replies[idx].empty())
        return std::nullopt;
    return trace_.confidence_replies[idx];
}

std::vector<ReplayTrace> load_traces(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    std::vector<ReplayTrace> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("malformed trace file at line " + std::to_string(lineno) +
                                     ": " + e.what());
        }
        ReplayTrace t;
        t.question = j.at("question").get<std::string>();
        t.gold_answer = j.value("gold_answer", std::string{});
        t.steps = j.at("steps").get<std::vector<std::string>>();
        if (t.steps.empty())
            throw std::runtime_error("malformed trace file at line " + std::to_string(lineno) +
                                     ": empty steps");
        if (j.contains("alternatives"))
            t.alternatives = j.at("alternatives").get<std::vector<std::vector<std::string>>>();
        if (j.contains("confidence_replies"))
            t.confidence_replies = j.at("confidence_replies").get<std::vector<std::string>>();
        out.push_back(std::move(t));
    }
    return out;
}

void save_traces(const std::vector<ReplayTrace>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    for (const auto& t : traces) {
        nlohmann::json j;
        j["question"] = t.question;
        j["gold_answer"] = t.gold_answer;
        j["steps"] = t.steps;
        if (!t.alternatives.empty()) j["alternatives"] = t.alternatives;
        if (!t.confidence_replies.empty()) j["confidence_replies"] = t.confidence_replies;
        out << j.dump() << '\n';
    }
}

namespace {

nlohmann::json world_record(const WorldGenResult& w) {
    nlohmann::json j;
    j["type"] = "world";
    j["seed"] = w.world.seed;
    j["entities"] = w.world.entities;
    j["relations"] = w.world.relations;
    nlohmann::json facts = nlohmann::json::array();
    for (const auto& f : w.world.facts) facts.push_back({f.subject, f.relation, f.object});
    j["facts"] = facts;
    j["fact_count"] = w.fact_count;
    j["distractor_count"] = w.distractor_count;
    return j;
}

WorldGenResult parse_world_record(const nlohmann::json& j) {
    WorldGenResult w;
    w.world.seed = j.at("seed").get<std::uint64_t>();
    w.world.entities = j.at("entities").get<std::vector<std::string>>();
    w.world.relations = j.at("relations").get<std::vector<std::string>>();
    for (const auto& f : j.at("facts"))
        w.world.facts.push_back({f.at(0).get<std::string>(), f.at(1).get<std::string>(),
                                 f.at(2).get<std::string>()});
    w.world.rebuild_lookup();
    w.fact_count = j.at("fact_count").get<std::size_t>();
    w.distractor_count = j.at("distractor_count").get<std::size_t>();
    return w;
}

nlohmann::json passage_record(const corpus::Passage& p) {
    return {{"type", "passage"}, {"id", p.id}, {"title", p.title}, {"text", p.text}};
}

}  // namespace

void save_world(const WorldGenResult& world, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write world file: " + path);
    out << nlohmann::json{{"version", "adret-world/1"}}.dump() << '\n';
    out << world_record(world).dump() << '\n';
    for (const auto& p : world.passages) out << passage_record(p).dump() << '\n';
}

WorldGenResult load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open world file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty world file: " + path);
    auto header = nlohmann::json::parse(line);
    if (header.value("version", std::string{}) != "adret-world/1")
        throw std::runtime_error("unrecognized world file version: " + path);
    WorldGenResult w;
    bool have_world = false;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        const auto type = j.value("type", std::string{});
        if (type == "world") {
            const auto passages = std::move(w.passages);
            w = parse_world_record(j);
            w.passages = std::move(passages);
            have_world = true;
        } else if (type == "passage") {
            w.passages.push_back(corpus::Passage::make(j.at("id").get<std::string>(),
                                                       j.value("title", std::string{}),
                                                       j.at("text").get<std::string>()));
        }
    }
    if (!have_world) throw std::runtime_error("world file missing world record: " + path);
    return w;
}

void save_questions(const QuestionFile& bundle, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write question file: " + path);
    out << nlohmann::json{{"version", "adret-questions/1"}}.dump() << '\n';
    out << world_record(bundle.world).dump() << '\n';
    for (const auto& p : bundle.world.passages) out << passage_record(p).dump() << '\n';
    for (const auto& q : bundle.questions) {
        nlohmann::json j;
        j["type"] = "question";
        j["id"] = q.id;
        j["text"] = q.text;
        j["hops"] = q.hops;
        j["gold_answer"] = q.gold_answer;
        nlohmann::json chain = nlohmann::json::array();
        for (const auto& f : q.gold_chain) chain.push_back({f.subject, f.relation, f.object});
        j["chain"] = chain;
        j["gaps"] = q.gap_steps;
        out << j.dump() << '\n';
    }
}

QuestionFile load_questions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open question file: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty question file: " + path);
    auto header = nlohmann::json::parse(line);
    if (header.value("version", std::string{}) != "adret-questions/1")
        throw std::runtime_error("unrecognized question file version: " + path);
    QuestionFile bundle;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        const auto type = j.value("type", std::string{});
        if (type == "world") {
            const auto passages = std::move(bundle.world.passages);
            bundle.world = parse_world_record(j);
            bundle.world.passages = std::move(passages);
        } else if (type == "passage") {
            bundle.world.passages.push_back(
                corpus::Passage::make(j.at("id").get<std::string>(),
                                      j.value("title", std::string{}),
                                      j.at("text").get<std::string>()));
        } else if (type == "question") {
            SyntheticQuestion q;
            q.id = j.at("id").get<std::string>();
            q.text = j.at("text").get<std::string>();
            q.hops = j.at("hops").get<int>();
            q.gold_answer = j.at("gold_answer").get<std::string>();
            for (const auto& f : j.at("chain"))
                q.gold_chain.push_back({f.at(0).get<std::string>(), f.at(1).get<std::string>(),
                                        f.at(2).get<std::string>()});
            for (const auto& g : j.at("gaps")) q.gap_steps.insert(g.get<int>());
            bundle.questions.push_back(std::move(q));
        }
    }
    return bundle;
}

}  // namespace adret::env
