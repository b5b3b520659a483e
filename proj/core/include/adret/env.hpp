#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adret/backend.hpp"
#include "adret/common.hpp"
#include "adret/corpus.hpp"

namespace adret::env {

struct Fact {
    std::string subject;
    std::string relation;
    std::string object;
    bool operator==(const Fact&) const = default;
};

/// Seeded entity-relation graph with functional relations: every
/// (subject, relation) pair maps to exactly one object, so multi-hop
/// questions have unique answers. The spine ordering guarantees chains of
/// length 4 exist.
struct FactWorld {
    std::vector<std::string> entities;
    std::vector<std::string> relations;  // names drawn from the relation catalog
    std::vector<Fact> facts;
    std::uint64_t seed = 0;

    const Fact* find_fact(const std::string& subject, const std::string& relation) const;
    const std::vector<std::string>& objects_of(const std::string& relation) const;
    void rebuild_lookup();

private:
    std::map<std::pair<std::string, std::string>, std::size_t> lookup_;
    std::map<std::string, std::vector<std::string>> relation_objects_;
};

struct WorldGenResult {
    FactWorld world;
    std::vector<corpus::Passage> passages;
    std::size_t fact_count = 0;
    std::size_t distractor_count = 0;
};

/// Build a world plus its passage corpus: one passage per fact in template
/// form and distractor passages (entity reused with a wrong relation) at a
/// 1:1 ratio. Fully determined by the seed.
WorldGenResult generate_world(std::uint64_t seed, int n_entities, int relation_types);

struct SyntheticQuestion {
    std::string id;
    std::string text;
    int hops = 2;
    std::string gold_answer;
    std::vector<Fact> gold_chain;
    std::set<int> gap_steps;  // 1-based hop indices withheld from the reasoner
};

/// Compose relation chains into questions ("What is the r2 of the r1 of A?").
/// Each hop is withheld independently with probability gap_rate.
std::vector<SyntheticQuestion> generate_questions(const FactWorld& world, int hops, int n,
                                                  double gap_rate, std::uint64_t seed);

/// Deterministic multi-hop reasoner over a fact world. Emits confident steps
/// for known or injected facts and hedged wrong guesses for withheld ones;
/// corrects itself when later evidence covers an earlier wrong hop.
class SyntheticBackend : public ReasoningBackend {
public:
    SyntheticBackend(const FactWorld& world, const SyntheticQuestion& question,
                     std::uint64_t seed);

    Step next_step(const std::string& context) override;
    std::vector<std::string> sample_continuations(const std::string& context, int k) override;
    std::optional<std::string> probe_confidence(const std::string& context) override;

    int hedge_steps_emitted() const { return hedged_emitted_; }

private:
    struct HopOutcome {
        std::string subject;
        std::string object;
        bool wrong = false;
    };

    std::string wrong_object(int hop, const std::string& subject, std::uint64_t salt) const;
    std::string confident_text(int hop, const std::string& subject, const std::string& object,
                               bool correction) const;
    std::string hedged_text(int hop, const std::string& subject, const std::string& object) const;
    std::set<std::string> injected_sentences(const std::string& context) const;

    const FactWorld& world_;
    SyntheticQuestion question_;
    std::uint64_t seed_;
    std::vector<HopOutcome> emitted_;  // per emitted hop
    bool answered_ = false;
    int steps_emitted_ = 0;
    int hedged_emitted_ = 0;
    // Descriptor of the step most recently emitted, for probes/sampling.
    int last_hop_ = 0;
    bool last_wrong_ = false;
    std::string last_text_;
};

struct ReplayTrace {
    std::string question;
    std::string gold_answer;
    std::vector<std::string> steps;
    std::vector<std::vector<std::string>> alternatives;  // optional, per step
    std::vector<std::string> confidence_replies;         // optional, per step
};

/// Replays a recorded chain through the backend contract. Alternatives and
/// confidence replies are served when recorded and reported unsupported
/// otherwise.
class ReplayBackend : public ReasoningBackend {
public:
    explicit ReplayBackend(ReplayTrace trace);

    Step next_step(const std::string& context) override;
    std::vector<std::string> sample_continuations(const std::string& context, int k) override;
    std::optional<std::string> probe_confidence(const std::string& context) override;

    const ReplayTrace& trace() const { return trace_; }

private:
    ReplayTrace trace_;
    std::size_t cursor_ = 0;
};

std::vector<ReplayTrace> load_traces(const std::string& path);
void save_traces(const std::vector<ReplayTrace>& traces, const std::string& path);

void save_world(const WorldGenResult& world, const std::string& path);
WorldGenResult load_world(const std::string& path);

struct QuestionFile {
    WorldGenResult world;
    std::vector<SyntheticQuestion> questions;
};

/// Question files embed their world (facts and passages) so a run is fully
/// self-contained.
void save_questions(const QuestionFile& bundle, const std::string& path);
QuestionFile load_questions(const std::string& path);

}  // namespace adret::env
