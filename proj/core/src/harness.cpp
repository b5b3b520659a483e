#include "adret/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "adret/relations.hpp"

namespace adret::harness {

std::string normalize_answer(const std::string& text) {
    const auto terms = tokenize_terms(text);
    std::string out;
    for (const auto& t : terms) {
        if (t == "a" || t == "an" || t == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

std::pair<int, double> answer_metrics(const std::string& prediction, const std::string& gold) {
    const auto p = normalize_answer(prediction);
    const auto g = normalize_answer(gold);
    if (p.empty() && g.empty()) return {1, 1.0};
    if (p.empty() || g.empty()) return {0, 0.0};
    const int em = p == g ? 1 : 0;

    const auto pt = tokenize_terms(p);
    const auto gt = tokenize_terms(g);
    std::map<std::string, int> gcount;
    for (const auto& t : gt) ++gcount[t];
    int overlap = 0;
    for (const auto& t : pt) {
        auto it = gcount.find(t);
        if (it != gcount.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    if (overlap == 0) return {em, 0.0};
    const double precision = static_cast<double>(overlap) / static_cast<double>(pt.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(gt.size());
    return {em, 2.0 * precision * recall / (precision + recall)};
}

StrategySpec StrategySpec::parse(const std::string& text) {
    StrategySpec s;
    if (text == "none") {
        s.kind = StrategyKind::none;
    } else if (text == "single") {
        s.kind = StrategyKind::single;
    } else if (text == "naive") {
        s.kind = StrategyKind::naive_interleave;
    } else if (text == "adaptive") {
        s.kind = StrategyKind::adaptive;
    } else if (text.rfind("fixed", 0) == 0) {
        s.kind = StrategyKind::fixed_interval;
        const auto colon = text.find(':');
        if (colon != std::string::npos) {
            const auto arg = text.substr(colon + 1);
            if (arg == "sentence") {
                s.per_sentence = true;
            } else {
                s.interval = std::stoi(arg);
                if (s.interval < 1) throw std::invalid_argument("fixed interval must be >= 1");
            }
        }
    } else {
        throw std::invalid_argument("unknown strategy: " + text);
    }
    return s;
}

std::string StrategySpec::name() const {
    switch (kind) {
        case StrategyKind::none: return "none";
        case StrategyKind::single: return "single";
        case StrategyKind::naive_interleave: return "naive";
        case StrategyKind::adaptive: return "adaptive";
        case StrategyKind::fixed_interval:
            if (per_sentence) return "fixed:sentence";
            return "fixed:" + std::to_string(interval);
    }
    return "?";
}

PassageStore::PassageStore(std::vector<corpus::Passage> passages)
    : passages_(std::move(passages)) {
    for (std::size_t i = 0; i < passages_.size(); ++i) by_id_[passages_[i].id] = i;
}

const corpus::Passage& PassageStore::at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw std::out_of_range("unknown passage id: " + id);
    return passages_[it->second];
}

namespace {

std::vector<corpus::Passage> gather(const PassageStore& store,
                                    const std::vector<corpus::RetrievalResult>& results) {
    std::vector<corpus::Passage> out;
    out.reserve(results.size());
    for (const auto& r : results) out.push_back(store.at(r.passage_id));
    return out;
}

// Uncompressed block: every sentence of every passage, scored but unfiltered.
integrate::InjectionBlock full_block(const std::vector<corpus::Passage>& passages,
                                     const std::string& query) {
    integrate::InjectionBlock block;
    block.source_query = query;
    const auto qterms = tokenize_terms(query);
    for (const auto& p : passages) {
        for (auto& text : integrate::split_sentences(p.text)) {
            integrate::ScoredSentence s{p.id, std::move(text), 0.0};
            s.relevance = token_cosine(qterms, tokenize_terms(s.text));
            block.sentences.push_back(std::move(s));
        }
    }
    return block;
}

struct EpisodeDriver {
    const StrategySpec& strategy;
    ReasoningBackend& backend;
    const corpus::CorpusIndex& index;
    const PassageStore& passages;
    const PipelineConfig& config;
    const env::SyntheticQuestion& question;
    std::uint64_t seed;
    policy::DecideMode mode = policy::DecideMode::greedy;
    Rng* sample_rng = nullptr;
    policy::Rollout* rollout = nullptr;

    Episode run() {
        Episode ep;
        ep.question_id = question.id;
        ep.question = question.text;
        ep.gold_answer = question.gold_answer;
        ep.hops = question.hops;
        ep.seed = seed;

        std::string context = question.text;
        trace::TokenStream stream;
        stream.source = trace::StreamSource::synthetic;
        integrate::SpeculativeCache cache(config.cache_capacity);
        policy::HistoryFeatures history;
        int last_trigger_index = 0;
        std::string last_query;
        std::vector<double> recent_u_ent;

        auto inject = [&](const std::string& query,
                          const std::vector<corpus::RetrievalResult>& results, int hit,
                          double charged_ms, int trigger_step, bool compressed,
                          std::size_t context_tokens) {
            integrate::RetrievalEvent ev;
            ev.trigger_step = trigger_step;
            ev.query = query;
            ev.results = results;
            ev.hit = hit;
            ev.charged_latency_ms = charged_ms;
            ev.context_tokens = context_tokens;
            if (!results.empty()) {
                const auto docs = gather(passages, results);
                const auto block = compressed
                                       ? integrate::compress(docs, query, config.compression)
                                       : full_block(docs, query);
                ev.injected_text = integrate::render_injection(block);
                context += "\n" + ev.injected_text;
                if (strategy.kind == StrategyKind::adaptive) {
                    ep.prefetches_issued += static_cast<std::uint64_t>(integrate::speculative_prefetch(
                        cache, block, index, config.top_k, trigger_step));
                }
            }
            ep.events.push_back(std::move(ev));
            history.prior_retrieval_count += 1;
            history.cumulative_retrieval_latency_s += charged_ms / 1000.0;
            last_trigger_index = trigger_step;
            last_query = query;
        };

        if (strategy.kind == StrategyKind::single) {
            const auto results = corpus::retrieve(index, question.text, config.top_k);
            inject(question.text, results, 0, config.latency.retrieval_ms, 0, true, 0);
        }

        int steps_emitted = 0;
        bool done = false;
        std::string last_step_text;
        while (!done && steps_emitted < config.step_cap) {
            const auto step = backend.next_step(context);
            ++steps_emitted;
            last_step_text = step.text;
            context += "\n" + step.text;
            for (auto& t : tokenize_stream(step.text)) stream.tokens.push_back(std::move(t));
            done = step.done;
            if (done) break;

            const auto segmented = trace::segment(stream, config.segmenter);
            const auto& current = segmented.back();

            bool retrieve_now = false;
            std::string query;
            switch (strategy.kind) {
                case StrategyKind::none:
                case StrategyKind::single:
                    break;
                case StrategyKind::naive_interleave:
                    retrieve_now = true;
                    break;
                case StrategyKind::fixed_interval:
                    retrieve_now = !strategy.per_sentence && steps_emitted % strategy.interval == 0;
                    break;
                case StrategyKind::adaptive: {
                    if (static_cast<int>(ep.events.size()) >= config.max_retrievals) break;
                    const double uv = rsus::u_verb(backend, context, current.text, recent_u_ent,
                                                   nullptr, &ep.warnings);
                    const double ue = rsus::u_ent(index, rsus::extract_entities(current.text),
                                                  config.rsus.entropy_window);
                    recent_u_ent.push_back(ue);
                    const double uc =
                        rsus::u_cons(backend, context, current.text,
                                     config.rsus.consistency_samples, &ep.warnings);
                    const auto score = rsus::combine(config.rsus, uv, ue, uc);
                    query = policy::formulate_query(current.text, question.text);
                    history.steps_since_last_retrieval =
                        last_trigger_index > 0 ? current.index - last_trigger_index
                                               : current.index;
                    history.last_query_overlap =
                        last_query.empty() ? 0.0 : policy::query_overlap(query, last_query);
                    const auto state =
                        policy::encode_state(question.text, current.text, score, history);
                    const auto decision =
                        policy::decide(*strategy.model, state, mode, sample_rng);
                    if (rollout) {
                        rollout->states.push_back(state);
                        rollout->actions.push_back(decision.retrieve);
                    }
                    retrieve_now = decision.retrieve == 1;
                    break;
                }
            }

            if (strategy.kind == StrategyKind::fixed_interval && strategy.per_sentence) {
                // Sentence-granularity variant: one retrieval per sentence of
                // the current step, injected at the boundary.
                for (const auto& sentence : integrate::split_sentences(current.text)) {
                    const auto q = policy::formulate_query(sentence, question.text);
                    const auto results = corpus::retrieve(index, q, config.top_k);
                    inject(q, results, 0, config.latency.retrieval_ms, current.index, true,
                           stream.tokens.size());
                }
                continue;
            }
            if (!retrieve_now) continue;

            if (strategy.kind == StrategyKind::adaptive) {
                auto lookup =
                    integrate::cache_lookup(cache, query, index, config.top_k, config.latency);
                inject(query, lookup.results, lookup.hit, lookup.charged_latency_ms,
                       current.index, true, stream.tokens.size());
            } else {
                query = policy::formulate_query(current.text, question.text);
                const auto results = corpus::retrieve(index, query, config.top_k);
                inject(query, results, 0, config.latency.retrieval_ms, current.index,
                       strategy.kind != StrategyKind::naive_interleave, stream.tokens.size());
            }
        }

        ep.answered = done;
        if (done) {
            if (auto answer = extract_answer(last_step_text)) ep.final_answer = *answer;
        }
        if (!stream.tokens.empty()) ep.steps = trace::segment(stream, config.segmenter);
        ep.token_count = stream.tokens.size();
        const auto [em, f1] = answer_metrics(ep.final_answer, ep.gold_answer);
        ep.em = em;
        ep.f1 = f1;
        for (const auto& e : ep.events) ep.charged_latency_ms += e.charged_latency_ms;
        ep.cache_hits = cache.hits();
        ep.cache_lookups = cache.hits() + cache.misses();
        return ep;
    }
};

}  // namespace

Episode run_episode(const StrategySpec& strategy, ReasoningBackend& backend,
                    const corpus::CorpusIndex& index, const PassageStore& passages,
                    const PipelineConfig& config, const env::SyntheticQuestion& question,
                    std::uint64_t seed) {
    if (strategy.kind == StrategyKind::adaptive && !strategy.model)
        throw std::invalid_argument("adaptive strategy requires a policy model");
    EpisodeDriver driver{strategy, backend, index, passages, config, question, seed};
    return driver.run();
}

BenchmarkReport run_benchmark(const StrategySpec& strategy,
                              const std::vector<env::SyntheticQuestion>& questions,
                              const env::FactWorld& world, const corpus::CorpusIndex& index,
                              const PassageStore& passages, const PipelineConfig& config,
                              const std::vector<std::uint64_t>& seeds, int workers) {
    if (questions.empty()) throw std::invalid_argument("empty question set");
    if (seeds.empty()) throw std::invalid_argument("empty seed list");

    struct Task {
        std::uint64_t seed;
        std::size_t question;
    };
    std::vector<Task> tasks;
    tasks.reserve(seeds.size() * questions.size());
    for (auto seed : seeds)
        for (std::size_t qi = 0; qi < questions.size(); ++qi) tasks.push_back({seed, qi});

    std::vector<Episode> episodes(tasks.size());
    auto run_task = [&](std::size_t ti) {
        const auto& t = tasks[ti];
        const auto episode_seed = derive_seed(t.seed, fnv1a(questions[t.question].id));
        env::SyntheticBackend backend(world, questions[t.question], episode_seed);
        episodes[ti] =
            run_episode(strategy, backend, index, passages, config, questions[t.question],
                        episode_seed);
    };

    workers = std::max(1, workers);
    if (workers == 1) {
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const auto ti = next.fetch_add(1);
                    if (ti >= tasks.size()) return;
                    run_task(ti);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    auto aggregate = [&](const std::vector<std::size_t>& idx) {
        MetricsReport m;
        m.episodes = idx.size();
        std::uint64_t hits = 0, lookups = 0;
        std::map<int, std::pair<double, std::size_t>> hop_acc;
        for (auto i : idx) {
            const auto& ep = episodes[i];
            m.em += ep.em;
            m.f1 += ep.f1;
            m.avg_calls += static_cast<double>(ep.events.size());
            m.avg_charged_latency_ms += ep.charged_latency_ms;
            m.avg_tokens += static_cast<double>(ep.token_count);
            m.cost_per_query += static_cast<double>(ep.token_count) *
                                config.latency.output_token_price_per_million / 1e6;
            hits += ep.cache_hits;
            lookups += ep.cache_lookups;
            auto& acc = hop_acc[ep.hops];
            acc.first += ep.f1;
            acc.second += 1;
            const auto total_steps = ep.steps.size();
            for (const auto& ev : ep.events) {
                ++m.total_events;
                std::size_t bin = 0;
                if (ev.trigger_step > 0 && total_steps > 0) {
                    const double frac =
                        static_cast<double>(ev.trigger_step) / static_cast<double>(total_steps);
                    bin = std::min<std::size_t>(9, static_cast<std::size_t>(frac * 10.0));
                }
                ++m.position_histogram[bin];
            }
        }
        const double n = static_cast<double>(idx.size());
        m.em /= n;
        m.f1 /= n;
        m.avg_calls /= n;
        m.avg_charged_latency_ms /= n;
        m.avg_tokens /= n;
        m.cost_per_query /= n;
        m.f1_per_call = integrate::f1_per_call(m.f1, m.avg_calls);
        m.cache_hit_rate =
            lookups == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(lookups);
        for (const auto& [hops, acc] : hop_acc)
            m.f1_by_hops[hops] = acc.first / static_cast<double>(acc.second);
        return m;
    };

    BenchmarkReport report;
    report.strategy = strategy.name();
    report.seeds = seeds;
    std::vector<std::size_t> all(tasks.size());
    std::iota(all.begin(), all.end(), 0);
    report.overall = aggregate(all);
    for (auto seed : seeds) {
        std::vector<std::size_t> idx;
        for (std::size_t ti = 0; ti < tasks.size(); ++ti)
            if (tasks[ti].seed == seed) idx.push_back(ti);
        report.per_seed.emplace_back(seed, aggregate(idx));
    }
    if (report.per_seed.size() > 1) {
        auto stddev = [&](auto&& get) {
            double mean = 0.0;
            for (const auto& [s, m] : report.per_seed) mean += get(m);
            mean /= static_cast<double>(report.per_seed.size());
            double var = 0.0;
            for (const auto& [s, m] : report.per_seed) {
                const double d = get(m) - mean;
                var += d * d;
            }
            return std::sqrt(var / static_cast<double>(report.per_seed.size()));
        };
        report.f1_seed_std = stddev([](const MetricsReport& m) { return m.f1; });
        report.calls_seed_std = stddev([](const MetricsReport& m) { return m.avg_calls; });
    }
    report.rows.reserve(tasks.size());
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const auto& ep = episodes[ti];
        report.rows.push_back({tasks[ti].seed, ep.question_id, ep.hops, ep.em, ep.f1,
                               ep.events.size(), ep.charged_latency_ms, ep.token_count});
    }
    return report;
}

BootstrapResult bootstrap_compare(const std::vector<double>& scores_a,
                                  const std::vector<double>& scores_b, int iterations,
                                  double alpha, int comparisons, std::uint64_t seed) {
    if (scores_a.size() != scores_b.size()) throw std::invalid_argument("paired length mismatch");
    if (scores_a.size() < 2) throw std::invalid_argument("need at least 2 paired scores");
    if (iterations < 100) throw std::invalid_argument("iterations must be >= 100");
    if (comparisons < 1) throw std::invalid_argument("comparisons must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha outside (0,1)");

    const std::size_t n = scores_a.size();
    std::vector<double> diffs(n);
    for (std::size_t i = 0; i < n; ++i) diffs[i] = scores_a[i] - scores_b[i];

    BootstrapResult result;
    result.delta = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(n);

    Rng rng(derive_seed(seed, n, static_cast<std::uint64_t>(iterations)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> means(static_cast<std::size_t>(iterations));
    std::size_t le_zero = 0, ge_zero = 0;
    for (auto& mean : means) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += diffs[pick(rng)];
        mean = sum / static_cast<double>(n);
        if (mean <= 0.0) ++le_zero;
        if (mean >= 0.0) ++ge_zero;
    }
    std::sort(means.begin(), means.end());

    const double corrected = alpha / static_cast<double>(comparisons);
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(means.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, means.size() - 1);
        const double w = pos - static_cast<double>(lo);
        return means[lo] * (1.0 - w) + means[hi] * w;
    };
    result.ci_low = quantile(corrected / 2.0);
    result.ci_high = quantile(1.0 - corrected / 2.0);

    const double b = static_cast<double>(iterations);
    const double p = 2.0 * std::min(static_cast<double>(le_zero) / b,
                                    static_cast<double>(ge_zero) / b);
    result.p_value = std::clamp(p, 1.0 / b, 1.0);
    return result;
}

std::vector<ParetoRow> pareto_report(
    const std::vector<std::pair<std::string, MetricsReport>>& reports) {
    if (reports.size() < 2) throw std::invalid_argument("pareto needs at least 2 reports");
    std::vector<ParetoRow> rows;
    rows.reserve(reports.size());
    for (const auto& [name, m] : reports) rows.push_back({name, m.f1, m.avg_calls, false});
    for (auto& r : rows) {
        for (const auto& other : rows) {
            if (&other == &r) continue;
            const bool weakly = other.f1 >= r.f1 && other.avg_calls <= r.avg_calls;
            const bool strictly = other.f1 > r.f1 || other.avg_calls < r.avg_calls;
            if (weakly && strictly) {
                r.dominated = true;
                break;
            }
        }
    }
    std::sort(rows.begin(), rows.end(), [](const ParetoRow& a, const ParetoRow& b) {
        if (a.avg_calls != b.avg_calls) return a.avg_calls < b.avg_calls;
        if (a.f1 != b.f1) return a.f1 > b.f1;
        return a.name < b.name;
    });
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_pareto_file(const std::vector<ParetoRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write pareto file: " + path);
    out << "# name\tavg_calls\tf1\tfrontier\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%.6g\t%.6g\t%d", r.name.c_str(), r.avg_calls, r.f1,
                      r.dominated ? 0 : 1);
        out << buf << '\n';
    }
}

void write_report(const BenchmarkReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path);
    out << "adret-report/1\n";
    out << "strategy\t" << report.strategy << '\n';
    out << "seeds";
    for (auto s : report.seeds) out << '\t' << s;
    out << '\n';
    auto metrics = [&](const std::string& prefix, const MetricsReport& m) {
        out << prefix << "episodes\t" << m.episodes << '\n';
        out << prefix << "em\t" << fmt(m.em) << '\n';
        out << prefix << "f1\t" << fmt(m.f1) << '\n';
        out << prefix << "avg_calls\t" << fmt(m.avg_calls) << '\n';
        out << prefix << "f1_per_call\t" << (m.f1_per_call ? fmt(*m.f1_per_call) : "-") << '\n';
        out << prefix << "avg_charged_latency_ms\t" << fmt(m.avg_charged_latency_ms) << '\n';
        out << prefix << "avg_tokens\t" << fmt(m.avg_tokens) << '\n';
        out << prefix << "cost_per_query\t" << fmt(m.cost_per_query) << '\n';
        out << prefix << "cache_hit_rate\t" << fmt(m.cache_hit_rate) << '\n';
        out << prefix << "total_events\t" << m.total_events << '\n';
        for (const auto& [hops, f1] : m.f1_by_hops)
            out << prefix << "hop\t" << hops << '\t' << fmt(f1) << '\n';
        for (std::size_t b = 0; b < m.position_histogram.size(); ++b)
            out << prefix << "hist\t" << b << '\t' << m.position_histogram[b] << '\n';
    };
    metrics("", report.overall);
    out << "f1_seed_std\t" << fmt(report.f1_seed_std) << '\n';
    out << "calls_seed_std\t" << fmt(report.calls_seed_std) << '\n';
    for (const auto& [seed, m] : report.per_seed) metrics("seed:" + std::to_string(seed) + "\t", m);
    for (const auto& r : report.rows)
        out << "row\t" << r.seed << '\t' << r.question_id << '\t' << r.hops << '\t' << r.em << '\t'
            << fmt(r.f1) << '\t' << r.calls << '\t' << fmt(r.charged_latency_ms) << '\t'
            << r.tokens << '\n';
}

BenchmarkReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "adret-report/1")
        throw std::runtime_error("unrecognized report file version: " + path);

    BenchmarkReport report;
    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const auto tab = s.find('\t', pos);
            if (tab == std::string::npos) {
                fields.push_back(s.substr(pos));
                break;
            }
            fields.push_back(s.substr(pos, tab - pos));
            pos = tab + 1;
        }
        return fields;
    };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split(line);
        MetricsReport* m = &report.overall;
        std::size_t base = 0;
        if (f[0].rfind("seed:", 0) == 0) {
            const auto seed = std::stoull(f[0].substr(5));
            if (report.per_seed.empty() || report.per_seed.back().first != seed)
                report.per_seed.emplace_back(seed, MetricsReport{});
            m = &report.per_seed.back().second;
            base = 1;
        }
        const auto& key = f[base];
        if (key == "strategy") {
            report.strategy = f[base + 1];
        } else if (key == "seeds") {
            for (std::size_t i = base + 1; i < f.size(); ++i)
                report.seeds.push_back(std::stoull(f[i]));
        } else if (key == "episodes") {
            m->episodes = std::stoull(f[base + 1]);
        } else if (key == "em") {
            m->em = std::stod(f[base + 1]);
        } else if (key == "f1") {
            m->f1 = std::stod(f[base + 1]);
        } else if (key == "avg_calls") {
            m->avg_calls = std::stod(f[base + 1]);
        } else if (key == "f1_per_call") {
            if (f[base + 1] != "-") m->f1_per_call = std::stod(f[base + 1]);
        } else if (key == "avg_charged_latency_ms") {
            m->avg_charged_latency_ms = std::stod(f[base + 1]);
        } else if (key == "avg_tokens") {
            m->avg_tokens = std::stod(f[base + 1]);
        } else if (key == "cost_per_query") {
            m->cost_per_query = std::stod(f[base + 1]);
        } else if (key == "cache_hit_rate") {
            m->cache_hit_rate = std::stod(f[base + 1]);
        } else if (key == "total_events") {
            m->total_events = std::stoull(f[base + 1]);
        } else if (key == "hop") {
            m->f1_by_hops[std::stoi(f[base + 1])] = std::stod(f[base + 2]);
        } else if (key == "hist") {
            m->position_histogram[std::stoul(f[base + 1])] = std::stoull(f[base + 2]);
        } else if (key == "f1_seed_std") {
            report.f1_seed_std = std::stod(f[base + 1]);
        } else if (key == "calls_seed_std") {
            report.calls_seed_std = std::stod(f[base + 1]);
        } else if (key == "row") {
            EpisodeRow r;
            r.seed = std::stoull(f[1]);
            r.question_id = f[2];
            r.hops = std::stoi(f[3]);
            r.em = std::stoi(f[4]);
            r.f1 = std::stod(f[5]);
            r.calls = std::stoull(f[6]);
            r.charged_latency_ms = std::stod(f[7]);
            r.tokens = std::stoull(f[8]);
            report.rows.push_back(std::move(r));
        }
    }
    return report;
}

EpisodeRolloutEnv::EpisodeRolloutEnv(std::vector<env::SyntheticQuestion> questions,
                                     const env::FactWorld& world,
                                     const corpus::CorpusIndex& index,
                                     const PassageStore& passages, PipelineConfig config)
    : questions_(std::move(questions)),
      world_(world),
      index_(index),
      passages_(passages),
      config_(std::move(config)) {
    if (questions_.empty()) throw std::invalid_argument("rollout environment has no episodes");
}

policy::Rollout EpisodeRolloutEnv::rollout(const policy::PolicyModel& model, std::uint64_t seed) {
    const auto& q = questions_[derive_seed(seed, 0x9e11) % questions_.size()];
    env::SyntheticBackend backend(world_, q, derive_seed(seed, 1));
    Rng sample_rng(derive_seed(seed, 2));

    StrategySpec strategy;
    strategy.kind = StrategyKind::adaptive;
    strategy.model = &model;

    policy::Rollout rollout;
    EpisodeDriver driver{strategy, backend,    index_, passages_,
                         config_,  q,          seed,   policy::DecideMode::sample,
                         &sample_rng, &rollout};
    const auto ep = driver.run();
    rollout.f1 = ep.f1;
    rollout.n_ret = static_cast<int>(ep.events.size());
    rollout.latency_s = ep.charged_latency_ms / 1000.0;
    return rollout;
}

}  // namespace adret::harness
