#include <benchmark/benchmark.h>

#include "adret/corpus.hpp"
#include "adret/env.hpp"
#include "adret/harness.hpp"
#include "adret/integrate.hpp"
#include "adret/trace.hpp"

using namespace adret;

namespace {

struct BenchWorld {
    env::WorldGenResult world = env::generate_world(5, 200, 3);
    corpus::CorpusIndex index = corpus::build_index(world.passages);
    harness::PassageStore store{world.passages};
    std::vector<env::SyntheticQuestion> questions =
        env::generate_questions(world.world, 3, 64, 0.5, 9);
};

BenchWorld& bench_world() {
    static BenchWorld w;
    return w;
}

}  // namespace

static void BM_Retrieve(benchmark::State& state) {
    auto& w = bench_world();
    std::size_t qi = 0;
    for (auto _ : state) {
        const auto& q = w.questions[qi++ % w.questions.size()];
        benchmark::DoNotOptimize(corpus::retrieve(w.index, q.text, 5));
    }
}
BENCHMARK(BM_Retrieve);

static void BM_ScoreDistribution(benchmark::State& state) {
    auto& w = bench_world();
    std::size_t ei = 0;
    for (auto _ : state) {
        const auto& e = w.world.world.entities[ei++ % w.world.world.entities.size()];
        benchmark::DoNotOptimize(corpus::score_distribution(w.index, "What is " + e + "?", 100));
    }
}
BENCHMARK(BM_ScoreDistribution);

static void BM_Segment(benchmark::State& state) {
    const auto traces = trace::synthetic_annotated_traces(3, 8);
    const auto model = trace::SegmenterModel::bundled();
    std::size_t ti = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(trace::segment(traces[ti++ % traces.size()].stream, model));
    }
}
BENCHMARK(BM_Segment);

static void BM_Compress(benchmark::State& state) {
    auto& w = bench_world();
    const auto& q = w.questions.front();
    const auto results = corpus::retrieve(w.index, q.text, 5);
    std::vector<corpus::Passage> passages;
    for (const auto& r : results) passages.push_back(w.store.at(r.passage_id));
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate::compress(passages, q.text, {0.45}));
    }
}
BENCHMARK(BM_Compress);

static void BM_EpisodeFixed(benchmark::State& state) {
    auto& w = bench_world();
    const auto spec = harness::StrategySpec::parse("fixed:1");
    harness::PipelineConfig config;
    std::size_t qi = 0;
    for (auto _ : state) {
        const auto& q = w.questions[qi++ % w.questions.size()];
        env::SyntheticBackend backend(w.world.world, q, 11);
        benchmark::DoNotOptimize(
            harness::run_episode(spec, backend, w.index, w.store, config, q, 11));
    }
}
BENCHMARK(BM_EpisodeFixed);

BENCHMARK_MAIN();
