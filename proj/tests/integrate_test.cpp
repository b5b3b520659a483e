#include <doctest.h>

#include <set>
#include <thread>

#include "adret/integrate.hpp"

using namespace adret;
using corpus::Passage;
using integrate::InjectionBlock;
using integrate::SpeculativeCache;

namespace {

std::vector<Passage> cache_corpus() {
    return {
        Passage::make("p1", "", "Driving Miss Daisy was directed by Bruce Beresford."),
        Passage::make("p2", "", "The capital of Varen Holt is Doro Venn."),
        Passage::make("p3", "", "The spouse of Bruce Beresford is Kel Mar."),
        Passage::make("p4", "", "Varen Holt was written by Tam Ros."),
    };
}

}  // namespace

TEST_CASE("compress keeps sentences at or above tau_rel in order") {
    // Query of four distinct terms; sentences engineered to cosine 1.0, 0.25
    // and 0.5 against it.
    const std::string query = "alpha beta gamma delta";
    std::vector<Passage> passages = {
        Passage::make("a", "", "alpha beta gamma delta. alpha moss rock silt. alpha beta rock silt."),
    };
    const auto block = integrate::compress(passages, query, {0.45});
    REQUIRE(block.sentences.size() == 2);
    CHECK(block.sentences[0].text == "alpha beta gamma delta.");
    CHECK(block.sentences[1].text == "alpha beta rock silt.");
    CHECK(block.sentences[0].relevance == doctest::Approx(1.0));
    CHECK(block.sentences[1].relevance == doctest::Approx(0.5));
    CHECK(block.source_query == query);
    for (const auto& s : block.sentences) CHECK(s.relevance >= 0.45);
}

TEST_CASE("compress falls back to the single best sentence") {
    const std::string query = "alpha beta gamma delta";
    std::vector<Passage> passages = {
        Passage::make("a", "", "moss rock. alpha moss rock silt fern."),
        Passage::make("b", "", "fern silt pond."),
    };
    const auto block = integrate::compress(passages, query, {0.45});
    REQUIRE(block.sentences.size() == 1);
    CHECK(block.sentences[0].text == "alpha moss rock silt fern.");
    CHECK(block.sentences[0].relevance < 0.45);
    CHECK_THROWS_AS(integrate::compress({}, query, {}), std::invalid_argument);
}

TEST_CASE("compress output is a subset and idempotent") {
    const std::string query = "directed Driving Miss Daisy";
    const auto passages = cache_corpus();
    const auto block = integrate::compress(passages, query, {0.45});
    std::set<std::string> input_sentences;
    for (const auto& p : passages)
        for (const auto& s : integrate::split_sentences(p.text)) input_sentences.insert(s);
    for (const auto& s : block.sentences) CHECK(input_sentences.count(s.text) == 1);

    // Re-compressing the rendered-then-parsed block changes nothing.
    const auto rendered = integrate::render_injection(block);
    const auto parsed = integrate::parse_injection(rendered);
    std::vector<Passage> again;
    for (const auto& [id, text] : parsed) again.push_back(Passage::make(id, "", text));
    const auto block2 = integrate::compress(again, query, {0.45});
    REQUIRE(block2.sentences.size() == block.sentences.size());
    for (std::size_t i = 0; i < block.sentences.size(); ++i) {
        CHECK(block2.sentences[i].passage_id == block.sentences[i].passage_id);
        CHECK(block2.sentences[i].text == block.sentences[i].text);
    }
}

TEST_CASE("render_injection is bit-exact") {
    InjectionBlock block;
    block.sentences.push_back({"p7", "The capital of Varen Holt is Doro Venn.", 0.9});
    block.source_query = "q";
    CHECK(integrate::render_injection(block) ==
          "<retrieved>\n[p7] The capital of Varen Holt is Doro Venn.\n</retrieved>\n"
          "Continue your reasoning, using this evidence if relevant.");
    CHECK_THROWS_AS(integrate::render_injection(InjectionBlock{}), std::invalid_argument);
}

TEST_CASE("parse_injection inverts render_injection") {
    Rng rng(21);
    std::uniform_int_distribution<int> n_sentences(1, 6);
    std::uniform_int_distribution<int> word(0, 9);
    for (int trial = 0; trial < 30; ++trial) {
        InjectionBlock block;
        const int n = n_sentences(rng);
        for (int i = 0; i < n; ++i) {
            std::string text = "w" + std::to_string(word(rng));
            for (int j = 0; j < 4; ++j) text += " w" + std::to_string(word(rng));
            text += ".";
            block.sentences.push_back({"p" + std::to_string(word(rng)), text, 0.5});
        }
        const auto parsed = integrate::parse_injection(integrate::render_injection(block));
        REQUIRE(parsed.size() == block.sentences.size());
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            CHECK(parsed[i].first == block.sentences[i].passage_id);
            CHECK(parsed[i].second == block.sentences[i].text);
        }
    }
}

TEST_CASE("query normalization and cache hits") {
    const auto passages = cache_corpus();
    const auto index = corpus::build_index(passages);
    SpeculativeCache cache(32);
    integrate::LatencyModel latency;

    CHECK(integrate::normalize_query("  Who   directed X?  ") == "who directed x");

    const auto fresh = corpus::retrieve(index, "Who directed Driving Miss Daisy?", 5);
    cache.insert("Who directed Driving Miss Daisy?", fresh, 1);

    auto hit = integrate::cache_lookup(cache, "who directed driving miss daisy", index, 5, latency);
    CHECK(hit.hit == 1);
    CHECK(hit.charged_latency_ms == 0.0);
    CHECK(hit.results == fresh);

    auto miss = integrate::cache_lookup(cache, "What is Varen Holt's capital?", index, 5, latency);
    CHECK(miss.hit == 0);
    CHECK(miss.charged_latency_ms == doctest::Approx(171.0));
    CHECK(!miss.results.empty());

    CHECK(cache.hits() == 1);
    CHECK(cache.misses() == 1);
    CHECK(cache.hits() + cache.misses() == 2);
}

TEST_CASE("cache evicts the oldest entry at capacity") {
    const auto passages = cache_corpus();
    const auto index = corpus::build_index(passages);
    SpeculativeCache cache(3);
    for (int i = 0; i < 5; ++i)
        cache.insert("query number " + std::to_string(i), {}, i);
    CHECK(cache.size() == 3);
    CHECK(!cache.contains("query number 0"));
    CHECK(!cache.contains("query number 1"));
    CHECK(cache.contains("query number 2"));
    CHECK(cache.contains("query number 4"));
    // Reinsertion of an existing key is not a new entry.
    CHECK(cache.insert("query number 4", {}, 9) == false);
    CHECK(cache.size() == 3);
}

TEST_CASE("cache supports concurrent insert and lookup") {
    const auto passages = cache_corpus();
    const auto index = corpus::build_index(passages);
    SpeculativeCache cache(64);
    integrate::LatencyModel latency;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 200; ++i) {
                const auto q = "capital Varen Holt " + std::to_string(i % 8);
                if ((i + t) % 2 == 0) cache.insert(q, corpus::retrieve(index, q, 5), i);
                integrate::cache_lookup(cache, q, index, 5, latency);
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(cache.hits() + cache.misses() == 800);
    CHECK(cache.size() <= 64);
}

TEST_CASE("speculative prefetch issues one template query per new entity") {
    const auto passages = cache_corpus();
    const auto index = corpus::build_index(passages);
    SpeculativeCache cache(32);

    InjectionBlock block;
    block.source_query = "Who directed Driving Miss Daisy?";
    block.sentences.push_back(
        {"p1", "Driving Miss Daisy was directed by Bruce Beresford.", 0.6});

    const int issued = integrate::speculative_prefetch(cache, block, index, 5, 2);
    CHECK(issued == 1);
    CHECK(cache.issued() == 1);
    CHECK(cache.contains("Who directed Bruce Beresford?"));
    // Queried entity itself is not prefetched.
    CHECK(!cache.contains("Who directed Driving Miss Daisy?"));

    InjectionBlock empty_block;
    empty_block.source_query = "anything";
    empty_block.sentences.push_back({"p9", "no capitalized words here.", 0.5});
    CHECK(integrate::speculative_prefetch(cache, empty_block, index, 5, 3) == 0);
}

TEST_CASE("prefetch fan-out is capped at four rarest entities") {
    std::vector<Passage> passages;
    for (int i = 0; i < 6; ++i) {
        // Entity i appears in i+1 passages, so lower i = rarer.
        for (int c = 0; c <= i; ++c)
            passages.push_back(Passage::make("e" + std::to_string(i) + "_" + std::to_string(c),
                                             "", "Ent" + std::to_string(i) + " filler text."));
    }
    const auto index = corpus::build_index(passages);
    SpeculativeCache cache(32);
    InjectionBlock block;
    block.source_query = "unrelated query";
    block.sentences.push_back(
        {"x", "The capital of Ent0 is Ent1. The capital of Ent2 is Ent3. "
              "The capital of Ent4 is Ent5.", 0.5});
    const int issued = integrate::speculative_prefetch(cache, block, index, 5, 1);
    CHECK(issued == 4);
    CHECK(cache.contains("What is Ent0's capital?"));
    CHECK(cache.contains("What is Ent3's capital?"));
    CHECK(!cache.contains("What is Ent4's capital?"));
    CHECK(!cache.contains("What is Ent5's capital?"));
}

TEST_CASE("hit-rate accounting is plain counter arithmetic") {
    const auto passages = cache_corpus();
    const auto index = corpus::build_index(passages);
    SpeculativeCache cache(128);
    integrate::LatencyModel latency;
    for (int i = 0; i < 37; ++i)
        cache.insert("hit query " + std::to_string(i), {}, 0);
    for (int i = 0; i < 37; ++i)
        integrate::cache_lookup(cache, "hit query " + std::to_string(i), index, 5, latency);
    for (int i = 0; i < 63; ++i)
        integrate::cache_lookup(cache, "miss query " + std::to_string(i), index, 5, latency);
    CHECK(cache.hits() == 37);
    CHECK(cache.misses() == 63);
    CHECK(cache.hit_rate() == doctest::Approx(0.37));
}

TEST_CASE("account reproduces the latency and cost arithmetic") {
    integrate::LatencyModel model;
    CHECK(model.retrieval_ms == 171.0);
    CHECK(model.prefix_reuse_discount == 2.1);
    CHECK(model.output_token_price_per_million == 2.19);

    std::vector<integrate::RetrievalEvent> events(2);
    events[0].charged_latency_ms = 168.0;
    events[0].trigger_step = 2;
    events[1].charged_latency_ms = 174.0;
    events[1].trigger_step = 4;
    auto report = integrate::account(events, 1342, model, 1.0);
    CHECK(report.total_calls == 2);
    CHECK(report.charged_calls == 2);
    CHECK(report.charged_retrieval_ms == doctest::Approx(342.0).epsilon(1e-12));
    CHECK(*report.per_call_ms == doctest::Approx(171.0).epsilon(1e-12));
    CHECK(report.output_token_cost == doctest::Approx(1342 * 2.19 / 1e6).epsilon(1e-12));
    CHECK(*report.f1_per_call == doctest::Approx(0.5).epsilon(1e-12));

    // One hit: only the miss is charged.
    events[1].hit = 1;
    events[1].charged_latency_ms = 0.0;
    report = integrate::account(events, 1342, model);
    CHECK(report.total_calls == 2);
    CHECK(report.charged_calls == 1);
    CHECK(report.charged_retrieval_ms == doctest::Approx(168.0));

    // Zero calls: per-call metrics are absent.
    report = integrate::account({}, 100, model, 0.5);
    CHECK(report.total_calls == 0);
    CHECK(!report.per_call_ms.has_value());
    CHECK(!report.f1_per_call.has_value());
    CHECK(report.simulated_e2e_ms == doctest::Approx(100 * model.per_token_ms));

    integrate::LatencyModel bad;
    bad.retrieval_ms = 0.0;
    CHECK_THROWS_AS(integrate::account({}, 0, bad), std::invalid_argument);
}

TEST_CASE("f1 per call handles averages") {
    CHECK(*integrate::f1_per_call(0.712, 1.8) == doctest::Approx(0.712 / 1.8).epsilon(1e-12));
    CHECK(!integrate::f1_per_call(0.5, 0.0).has_value());
}
