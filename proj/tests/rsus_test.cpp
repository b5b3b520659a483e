#include <doctest.h>

#include <algorithm>

#include "adret/rsus.hpp"

using namespace adret;
using rsus::EntityMention;

namespace {

// Scripted backend for probe/sampling behavior.
struct FakeBackend : ReasoningBackend {
    std::optional<std::string> confidence_reply;
    std::vector<std::string> continuations;

    Step next_step(const std::string&) override { return {"", true}; }
    std::vector<std::string> sample_continuations(const std::string&, int k) override {
        auto out = continuations;
        if (out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
        return out;
    }
    std::optional<std::string> probe_confidence(const std::string& context) override {
        last_probe_context = context;
        return confidence_reply;
    }
    std::string last_probe_context;
};

std::vector<std::string> surfaces(const std::vector<EntityMention>& mentions) {
    std::vector<std::string> out;
    for (const auto& m : mentions) out.push_back(m.surface);
    return out;
}

}  // namespace

TEST_CASE("entity extraction follows the capitalized-span rule") {
    CHECK(surfaces(rsus::extract_entities("The Berlin Wall fell in 1989")) ==
          std::vector<std::string>{"Berlin Wall"});
    CHECK(rsus::extract_entities("").empty());
    CHECK(rsus::extract_entities("driving miss daisy").empty());
    CHECK(surfaces(rsus::extract_entities(
              "However, I think the director of Driving Miss Daisy is probably Marc Bower.")) ==
          std::vector<std::string>{"Driving Miss Daisy", "Marc Bower"});
    // Deduplicated by surface, original order.
    CHECK(surfaces(rsus::extract_entities("Berlin Wall stood. Berlin Wall fell. Checkpoint Charlie.")) ==
          std::vector<std::string>{"Berlin Wall", "Checkpoint Charlie"});
    // Punctuation splits spans.
    CHECK(surfaces(rsus::extract_entities("He saw Berlin, Germany once.")) ==
          std::vector<std::string>{"Berlin", "Germany"});
    // Span offsets address the original text.
    const auto mentions = rsus::extract_entities("The Berlin Wall fell in 1989");
    REQUIRE(mentions.size() == 1);
    CHECK(std::string("The Berlin Wall fell in 1989").substr(
              mentions[0].begin, mentions[0].end - mentions[0].begin) == "Berlin Wall");
}

TEST_CASE("confidence replies parse to inverted uncertainty") {
    CHECK(*rsus::parse_confidence_reply("85") == doctest::Approx(0.15));
    CHECK(*rsus::parse_confidence_reply("100") == doctest::Approx(0.0));
    CHECK(*rsus::parse_confidence_reply("I'd say 70 or so") == doctest::Approx(0.30));
    CHECK(!rsus::parse_confidence_reply("very sure").has_value());
    CHECK(!rsus::parse_confidence_reply("").has_value());
    CHECK(!rsus::parse_confidence_reply("150").has_value());
}

TEST_CASE("u_verb probes, falls back, and warns") {
    FakeBackend backend;
    WarningLog warnings;

    backend.confidence_reply = "85";
    CHECK(rsus::u_verb(backend, "context") == doctest::Approx(0.15));
    // The probe carries the verbatim prompt.
    CHECK(backend.last_probe_context.find(rsus::kConfidenceProbePrompt) != std::string::npos);

    backend.confidence_reply = "very sure";
    CHECK(rsus::u_verb(backend, "context", {}, {}, nullptr, &warnings) == doctest::Approx(0.5));
    CHECK(warnings.size() == 1);

    backend.confidence_reply = std::nullopt;
    CHECK(rsus::u_verb(backend, "context", {}, {}, nullptr, &warnings) == doctest::Approx(0.5));
    CHECK(warnings.size() == 2);
}

TEST_CASE("u_verb proxy trains on revision labels") {
    CHECK(rsus::hedge_count("I think it is probably maybe fine") == 3);
    // Lexicon anchors.
    const auto& hedges = rsus::hedge_phrases();
    for (const char* h : {"probably", "i think", "maybe"})
        CHECK(std::find(hedges.begin(), hedges.end(), h) != hedges.end());

    std::vector<rsus::ProxyExample> examples;
    for (int i = 0; i < 120; ++i) {
        rsus::ProxyExample e;
        const bool hedgy = i % 2 == 0;
        e.step_text = hedgy ? "I think the value is probably Kern Vale here."
                            : "The value is Kern Vale here.";
        e.revised_next = hedgy ? 1 : 0;
        examples.push_back(std::move(e));
    }
    const auto proxy = rsus::u_verb_proxy_train(examples);
    CHECK(proxy.auroc >= 0.95);
    // Proxy-backed u_verb when the backend cannot be probed.
    FakeBackend backend;
    backend.confidence_reply = std::nullopt;
    const double hedged = rsus::u_verb(backend, "ctx", examples[0].step_text, {}, &proxy);
    const double confident = rsus::u_verb(backend, "ctx", examples[1].step_text, {}, &proxy);
    CHECK(hedged > confident);

    CHECK_THROWS_WITH_AS(
        rsus::u_verb_proxy_train(std::vector<rsus::ProxyExample>(10)),
        "insufficient labeled steps", std::invalid_argument);
    std::vector<rsus::ProxyExample> degenerate(60);
    for (auto& e : degenerate) {
        e.step_text = "Same text.";
        e.revised_next = 1;
    }
    CHECK_THROWS_WITH_AS(rsus::u_verb_proxy_train(degenerate), "degenerate labels",
                         std::invalid_argument);
}

TEST_CASE("normalized entropy hits its anchors") {
    for (std::size_t m : {2u, 4u, 10u, 100u}) {
        std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
        CHECK(rsus::normalized_entropy(uniform) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(rsus::normalized_entropy(std::vector<double>{1.0}) == 0.0);
    CHECK(rsus::normalized_entropy({}) == 0.0);
    CHECK(rsus::normalized_entropy(std::vector<double>{0.9, 0.1}) < 1.0);
}

TEST_CASE("u_ent coverage semantics") {
    std::vector<corpus::Passage> passages = {
        corpus::Passage::make("a", "", "kestrel alpha"),
        corpus::Passage::make("b", "", "kestrel beta"),
        corpus::Passage::make("c", "", "kestrel gamma"),
        corpus::Passage::make("d", "", "kestrel delta"),
        corpus::Passage::make("e", "", "osprey alone here now"),
    };
    const auto index = corpus::build_index(passages);

    CHECK(rsus::u_ent(index, {}) == 0.0);

    // Absent entity: maximum uncertainty.
    CHECK(rsus::u_ent(index, {{"Zzyzx", 0, 5}}) == doctest::Approx(1.0));

    // Four equally-scored passages: normalized entropy 1.
    CHECK(rsus::u_ent(index, {{"Kestrel", 0, 7}}) == doctest::Approx(1.0).epsilon(1e-9));

    // Single matching passage: zero entropy.
    CHECK(rsus::u_ent(index, {{"Osprey", 0, 6}}) == doctest::Approx(0.0));

    // Order and duplicates do not matter.
    std::vector<EntityMention> forward = {{"Kestrel", 0, 7}, {"Osprey", 8, 14}};
    std::vector<EntityMention> reversed = {{"Osprey", 8, 14}, {"Kestrel", 0, 7}};
    std::vector<EntityMention> duplicated = {
        {"Kestrel", 0, 7}, {"Kestrel", 0, 7}, {"Osprey", 8, 14}};
    const double base = rsus::u_ent(index, forward);
    CHECK(rsus::u_ent(index, reversed) == doctest::Approx(base).epsilon(1e-15));
    CHECK(rsus::u_ent(index, duplicated) == doctest::Approx(base).epsilon(1e-15));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
}

TEST_CASE("u_cons agreement semantics") {
    FakeBackend backend;
    // Critical step: contains a discourse marker.
    const std::string critical = "Therefore, the capital is Doro Venn.";

    backend.continuations = {"same words here", "same words here", "same words here"};
    CHECK(rsus::u_cons(backend, "ctx", critical, 3) == doctest::Approx(0.0));

    backend.continuations = {"alpha beta", "gamma delta", "epsilon zeta"};
    CHECK(rsus::u_cons(backend, "ctx", critical, 3) == doctest::Approx(1.0));

    // Non-critical steps are not probed.
    backend.continuations = {"alpha", "beta"};
    CHECK(rsus::u_cons(backend, "ctx", "The capital is Doro Venn.", 3) == 0.0);

    // Backend that cannot sample: fallback with a warning.
    WarningLog warnings;
    backend.continuations = {};
    CHECK(rsus::u_cons(backend, "ctx", critical, 3, &warnings) == 0.0);
    CHECK(warnings.size() == 1);

    CHECK_THROWS_AS(rsus::u_cons(backend, "ctx", critical, 1), std::invalid_argument);
    CHECK(rsus::RsusConfig{}.consistency_samples == 3);
}

TEST_CASE("combine is the exact weighted sum") {
    const auto config = rsus::RsusConfig::make(0.40, 0.35, 0.25);
    CHECK(rsus::combine(config, 1, 1, 1).combined == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rsus::combine(config, 0, 0, 0).combined == 0.0);
    CHECK(rsus::combine(config, 0.68, 0.81, 0.50).combined ==
          doctest::Approx(0.6805).epsilon(1e-12));
    CHECK_THROWS_AS(rsus::combine(config, 1.2, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(rsus::combine(config, 0, -0.1, 0), std::invalid_argument);

    // Monotone non-decreasing in each component.
    Rng rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double a = unit(rng), b = unit(rng), c = unit(rng);
        const double bump = unit(rng) * (1.0 - a);
        CHECK(rsus::combine(config, a + bump, b, c).combined >=
              rsus::combine(config, a, b, c).combined);
    }
}

TEST_CASE("rsus config enforces the simplex") {
    CHECK_THROWS_AS(rsus::RsusConfig::make(0.5, 0.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(rsus::RsusConfig::make(-0.1, 0.6, 0.5), std::invalid_argument);
    const auto c = rsus::RsusConfig::make(1.0 / 3, 1.0 / 3, 1.0 / 3);
    CHECK(c.alpha == doctest::Approx(1.0 / 3));
    CHECK(rsus::RsusConfig{}.entropy_window == 100);
}

TEST_CASE("fit_weights recovers a linear construction") {
    Rng rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<rsus::LabeledStep> steps;
    for (int i = 0; i < 100; ++i) {
        rsus::LabeledStep s;
        s.u_verb = unit(rng);
        s.u_ent = unit(rng);
        s.u_cons = unit(rng);
        s.benefit = 0.5 * s.u_verb + 0.5 * s.u_ent;
        steps.push_back(s);
    }
    const auto fit = rsus::fit_weights(steps);
    CHECK(fit.config.gamma <= 0.05);
    CHECK(fit.correlation >= 0.99);
    CHECK(fit.correlation >= fit.equal_weights_correlation);
}

TEST_CASE("fit_weights validates input") {
    std::vector<rsus::LabeledStep> few(10);
    CHECK_THROWS_AS(rsus::fit_weights(few), std::invalid_argument);
    std::vector<rsus::LabeledStep> constant(30);
    Rng rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& s : constant) {
        s.u_verb = unit(rng);
        s.u_ent = unit(rng);
        s.u_cons = unit(rng);
        s.benefit = 0.7;
    }
    CHECK_THROWS_WITH_AS(rsus::fit_weights(constant), "constant labels", std::invalid_argument);
}

TEST_CASE("fit_weights never loses to equal weights") {
    Rng rng(29);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<rsus::LabeledStep> steps;
        for (int i = 0; i < 40; ++i) {
            rsus::LabeledStep s;
            s.u_verb = unit(rng);
            s.u_ent = unit(rng);
            s.u_cons = unit(rng);
            s.benefit = unit(rng) < 0.5 ? 0.0 : 1.0;

            steps.push_back(s);
        }
        bool constant = true;
        for (const auto& s : steps) constant = constant && s.benefit == steps[0].benefit;
        if (constant) continue;
        const auto fit = rsus::fit_weights(steps);
        CHECK(fit.correlation >= fit.equal_weights_correlation);
    }
}
