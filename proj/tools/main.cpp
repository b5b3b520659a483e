// adret: adaptive retrieval for multi-step reasoning chains.
//
// Subcommands cover the whole pipeline: corpus indexing, synthetic world and
// question generation, policy training, benchmark runs, paired-bootstrap
// comparison and Pareto reporting.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adret/config.hpp"
#include "adret/corpus.hpp"
#include "adret/env.hpp"
#include "adret/harness.hpp"
#include "adret/policy.hpp"
#include "adret/rsus.hpp"

namespace {

using namespace adret;

harness::PipelineConfig pipeline_from_config(const config::Config& cfg) {
    harness::PipelineConfig pc;
    pc.rsus = rsus::RsusConfig::make(cfg.get_double("rsus.alpha", 0.40),
                                     cfg.get_double("rsus.beta", 0.35),
                                     cfg.get_double("rsus.gamma", 0.25),
                                     cfg.get_int("rsus.k_consistency", 3),
                                     cfg.get_int("rsus.entropy_window", 100));
    pc.compression.tau_rel = cfg.get_double("integrate.tau_rel", 0.45);
    pc.cache_capacity = static_cast<std::size_t>(cfg.get_int("integrate.cache_capacity", 32));
    pc.latency.retrieval_ms = cfg.get_double("latency.retrieval_ms", 171.0);
    pc.latency.per_token_ms = cfg.get_double("latency.per_token_ms", 1.5);
    pc.latency.prefix_reuse_discount = cfg.get_double("latency.prefix_reuse_discount", 2.1);
    pc.latency.output_token_price_per_million =
        cfg.get_double("cost.output_price_per_million", 2.19);
    pc.top_k = cfg.get_int("retrieve.k", corpus::kDefaultTopK);
    pc.step_cap = cfg.get_int("run.step_cap", 32);
    pc.max_retrievals = cfg.get_int("policy.max_retrievals", policy::kMaxRetrievalsPerEpisode);
    return pc;
}

policy::TrainConfig train_from_config(const config::Config& cfg) {
    policy::TrainConfig tc;
    tc.lambda1_start = cfg.get_double("train.lambda1_start", 0.5);
    tc.lambda1_end = cfg.get_double("train.lambda1_end", 0.1);
    tc.lambda2 = cfg.get_double("train.lambda2", 0.05);
    tc.learning_rate = cfg.get_double("train.lr", 1e-4);
    tc.batch_size = cfg.get_int("train.batch", 64);
    tc.steps = cfg.get_int("train.steps", 5000);
    tc.seed = cfg.get_u64("train.seed", 42);
    tc.hidden = cfg.get_int("policy.hidden", policy::kDefaultHidden);
    tc.tau = cfg.get_double("policy.tau", policy::kDefaultTau);
    tc.tau_trainable = cfg.get_bool("policy.tau_trainable", false);
    tc.max_retrievals = cfg.get_int("policy.max_retrievals", policy::kMaxRetrievalsPerEpisode);
    tc.entropy_coef = cfg.get_double("train.entropy_coef", tc.entropy_coef);
    return tc;
}

std::vector<env::SyntheticQuestion> mixed_questions(const env::FactWorld& world, int n,
                                                    double gap_rate, std::uint64_t seed) {
    std::vector<env::SyntheticQuestion> out;
    int remaining = n;
    std::vector<std::vector<env::SyntheticQuestion>> batches;
    for (int hops = 2; hops <= 4; ++hops) {
        const int buckets_left = 5 - hops;
        const int count = remaining / buckets_left + (remaining % buckets_left > 0 ? 1 : 0);
        batches.push_back(
            env::generate_questions(world, hops, count, gap_rate, derive_seed(seed, hops)));
        remaining -= count;
    }
    for (std::size_t i = 0;; ++i) {
        bool any = false;
        for (auto& b : batches)
            if (i < b.size()) {
                out.push_back(std::move(b[i]));
                any = true;
            }
        if (!any) break;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = "q" + std::to_string(i);
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        seeds.push_back(std::stoull(text.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (seeds.empty()) throw std::runtime_error("no seeds given");
    return seeds;
}

int cmd_index_build(const std::string& corpus_path, const std::string& out_path,
                    const config::Config& cfg) {
    auto passages = corpus::load_corpus_file(corpus_path);
    auto index = corpus::build_index(passages);
    index.bm25.k1 = cfg.get_double("corpus.k1", 1.2);
    index.bm25.b = cfg.get_double("corpus.b", 0.75);
    corpus::save_index(index, out_path);
    std::printf("indexed %u passages, %zu terms -> %s\n", index.doc_count,
                index.postings.size(), out_path.c_str());
    return 0;
}

int cmd_world_gen(std::uint64_t seed, int entities, int relations, const std::string& out_path) {
    const auto world = env::generate_world(seed, entities, relations);
    env::save_world(world, out_path);
    std::printf("world seed=%llu entities=%zu facts=%zu distractors=%zu passages=%zu -> %s\n",
                static_cast<unsigned long long>(seed), world.world.entities.size(),
                world.fact_count, world.distractor_count, world.passages.size(),
                out_path.c_str());
    return 0;
}

int cmd_questions_gen(const std::string& world_path, const std::string& hops, int n,
                      double gap_rate, std::uint64_t seed, const std::string& out_path) {
    env::QuestionFile bundle;
    bundle.world = env::load_world(world_path);
    if (hops == "mixed") {
        bundle.questions = mixed_questions(bundle.world.world, n, gap_rate, seed);
    } else {
        bundle.questions =
            env::generate_questions(bundle.world.world, std::stoi(hops), n, gap_rate, seed);
    }
    if (out_path.empty()) {
        for (const auto& q : bundle.questions)
            std::printf("%s\t%d\t%s\t%s\n", q.id.c_str(), q.hops, q.text.c_str(),
                        q.gold_answer.c_str());
    } else {
        env::save_questions(bundle, out_path);
        std::printf("%zu questions -> %s\n", bundle.questions.size(), out_path.c_str());
    }
    return 0;
}

int cmd_train_policy(const std::string& config_path, const std::string& out_path) {
    const auto cfg = config::Config::load(config_path);
    const auto pc = pipeline_from_config(cfg);
    const auto tc = train_from_config(cfg);

    env::QuestionFile bundle;
    if (cfg.has("env.questions")) {
        bundle = env::load_questions(cfg.get_string("env.questions"));
    } else if (cfg.has("env.world")) {
        bundle.world = env::load_world(cfg.get_string("env.world"));
        bundle.questions = mixed_questions(bundle.world.world,
                                           cfg.get_int("train.gen_questions", 200),
                                           cfg.get_double("train.gen_gap_rate", 0.5),
                                           derive_seed(tc.seed, 0x7a11));
    } else {
        std::fprintf(stderr, "config must set env.questions or env.world\n");
        return 2;
    }

    const auto index = corpus::build_index(bundle.world.passages);
    harness::PassageStore store(bundle.world.passages);
    harness::EpisodeRolloutEnv rollout_env(bundle.questions, bundle.world.world, index, store,
                                           pc);
    policy::TrainStats stats;
    const auto model = policy::train_reinforce(rollout_env, tc, &stats);
    policy::save_policy(model, out_path);
    std::printf("trained policy: steps=%d batch=%d final_lambda1=%.3f -> %s\n", tc.steps,
                tc.batch_size, stats.final_lambda1, out_path.c_str());
    return 0;
}

int cmd_run(const std::string& strategy_text, const std::string& policy_path,
            const std::string& questions_path, const std::string& seed_text,
            const std::string& report_path, const std::string& config_path, int workers) {
    config::Config cfg;
    if (!config_path.empty()) cfg = config::Config::load(config_path);
    const auto pc = pipeline_from_config(cfg);

    auto strategy = harness::StrategySpec::parse(strategy_text);
    policy::PolicyModel model;
    if (strategy.kind == harness::StrategyKind::adaptive) {
        if (policy_path.empty()) {
            std::fprintf(stderr, "adaptive strategy requires --policy\n");
            return 2;
        }
        model = policy::load_policy(policy_path);
        if (cfg.has("policy.tau")) model.set_tau(cfg.get_double("policy.tau", model.tau()));
        strategy.model = &model;
    }

    const auto bundle = env::load_questions(questions_path);
    const auto index = corpus::build_index(bundle.world.passages);
    harness::PassageStore store(bundle.world.passages);
    const auto seeds = parse_seeds(seed_text);

    const auto report = harness::run_benchmark(strategy, bundle.questions, bundle.world.world,
                                               index, store, pc, seeds, workers);
    harness::write_report(report, report_path);
    std::printf("strategy=%s episodes=%zu em=%.4f f1=%.4f calls=%.3f", report.strategy.c_str(),
                report.overall.episodes, report.overall.em, report.overall.f1,
                report.overall.avg_calls);
    if (report.overall.f1_per_call) std::printf(" f1/call=%.4f", *report.overall.f1_per_call);
    std::printf(" latency_ms=%.1f tokens=%.1f -> %s\n", report.overall.avg_charged_latency_ms,
                report.overall.avg_tokens, report_path.c_str());
    return 0;
}

int cmd_eval_compare(const std::string& path_a, const std::string& path_b, int iters,
                     double alpha, int comparisons, std::uint64_t seed) {
    const auto a = harness::read_report(path_a);
    const auto b = harness::read_report(path_b);
    if (a.rows.size() != b.rows.size()) {
        std::fprintf(stderr, "reports have different episode counts (%zu vs %zu)\n",
                     a.rows.size(), b.rows.size());
        return 2;
    }
    std::vector<double> fa, fb;
    fa.reserve(a.rows.size());
    fb.reserve(b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].question_id != b.rows[i].question_id ||
            a.rows[i].seed != b.rows[i].seed) {
            std::fprintf(stderr, "reports are not paired at row %zu\n", i);
            return 2;
        }
        fa.push_back(a.rows[i].f1);
        fb.push_back(b.rows[i].f1);
    }
    const auto r = harness::bootstrap_compare(fa, fb, iters, alpha, comparisons, seed);
    const double corrected = alpha / comparisons;
    std::printf("n=%zu iterations=%d\n", fa.size(), iters);
    std::printf("delta_f1=%.6f ci%.1f%%=[%.6f, %.6f] p=%.6f%s\n", r.delta,
                100.0 * (1.0 - corrected), r.ci_low, r.ci_high, r.p_value,
                r.p_value < corrected ? " (significant)" : "");
    return 0;
}

int cmd_bench_pareto(const std::vector<std::string>& report_paths, const std::string& out_path) {
    std::vector<std::pair<std::string, harness::MetricsReport>> reports;
    for (const auto& p : report_paths) {
        auto r = harness::read_report(p);
        reports.emplace_back(r.strategy, r.overall);
    }
    const auto rows = harness::pareto_report(reports);
    std::printf("%-16s %10s %10s %s\n", "strategy", "avg_calls", "f1", "status");
    for (const auto& r : rows)
        std::printf("%-16s %10.3f %10.4f %s\n", r.name.c_str(), r.avg_calls, r.f1,
                    r.dominated ? "dominated" : "frontier");
    if (!out_path.empty()) {
        harness::write_pareto_file(rows, out_path);
        std::printf("-> %s\n", out_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive retrieval for multi-step reasoning chains"};
    app.require_subcommand(1);

    auto* index_cmd = app.add_subcommand("index", "corpus index operations");
    index_cmd->require_subcommand(1);
    auto* index_build = index_cmd->add_subcommand("build", "build a BM25 index from a corpus");
    std::string corpus_path, index_out, index_config;
    index_build->add_option("--corpus", corpus_path, "line-delimited corpus file")->required();
    index_build->add_option("--out", index_out, "index output path")->required();
    index_build->add_option("--config", index_config, "optional config file");

    auto* world_cmd = app.add_subcommand("world", "synthetic fact-world operations");
    world_cmd->require_subcommand(1);
    auto* world_gen = world_cmd->add_subcommand("gen", "generate a seeded fact world");
    std::uint64_t world_seed = 42;
    int world_entities = 200, world_relations = 6;
    std::string world_out;
    world_gen->add_option("--seed", world_seed, "world seed")->required();
    world_gen->add_option("--entities", world_entities, "entity count")->required();
    world_gen->add_option("--relations", world_relations, "relation type count")->required();
    world_gen->add_option("--out", world_out, "world output path")->required();

    auto* questions_cmd = app.add_subcommand("questions", "question set operations");
    questions_cmd->require_subcommand(1);
    auto* questions_gen = questions_cmd->add_subcommand("gen", "compose multi-hop questions");
    std::string q_world, q_hops = "mixed", q_out;
    int q_n = 100;
    double q_gap_rate = 0.5;
    std::uint64_t q_seed = 42;
    questions_gen->add_option("--world", q_world, "world file")->required();
    questions_gen->add_option("--hops", q_hops, "2|3|4|mixed");
    questions_gen->add_option("--n", q_n, "question count")->required();
    questions_gen->add_option("--gap-rate", q_gap_rate, "per-hop withholding probability");
    questions_gen->add_option("--seed", q_seed, "question seed");
    questions_gen->add_option("--out", q_out, "question file (stdout if omitted)");

    auto* train_cmd = app.add_subcommand("train-policy", "train the intervention policy");
    std::string train_config, train_out;
    train_cmd->add_option("--config", train_config, "config file")->required();
    train_cmd->add_option("--out", train_out, "policy output path")->required();

    auto* run_cmd = app.add_subcommand("run", "run a benchmark under a strategy");
    std::string run_strategy, run_policy, run_questions, run_seed = "42", run_report, run_config;
    int run_workers = 1;
    run_cmd->add_option("--strategy", run_strategy, "none|single|fixed:m|naive|adaptive")
        ->required();
    run_cmd->add_option("--policy", run_policy, "policy file (adaptive)");
    run_cmd->add_option("--questions", run_questions, "question file")->required();
    run_cmd->add_option("--seed", run_seed, "run seed (comma-separated for multi-seed)");
    run_cmd->add_option("--report", run_report, "report output path")->required();
    run_cmd->add_option("--config", run_config, "optional config file");
    run_cmd->add_option("--workers", run_workers, "episode workers");

    auto* eval_cmd = app.add_subcommand("eval", "statistical evaluation");
    eval_cmd->require_subcommand(1);
    auto* eval_compare = eval_cmd->add_subcommand("compare", "paired bootstrap of two reports");
    std::string eval_a, eval_b;
    int eval_iters = 10000, eval_comparisons = 1;
    double eval_alpha = 0.05;
    std::uint64_t eval_seed = 2024;
    eval_compare->add_option("--a", eval_a, "report A")->required();
    eval_compare->add_option("--b", eval_b, "report B")->required();
    eval_compare->add_option("--iters", eval_iters, "bootstrap iterations");
    eval_compare->add_option("--alpha", eval_alpha, "significance level");
    eval_compare->add_option("--comparisons", eval_comparisons, "Bonferroni comparisons");
    eval_compare->add_option("--seed", eval_seed, "resampling seed");

    auto* bench_cmd = app.add_subcommand("bench", "cross-strategy reporting");
    bench_cmd->require_subcommand(1);
    auto* bench_pareto = bench_cmd->add_subcommand("pareto", "frontier over strategy reports");
    std::vector<std::string> pareto_reports;
    std::string pareto_out;
    bench_pareto->add_option("--reports", pareto_reports, "report files")
        ->required()
        ->expected(-1);
    bench_pareto->add_option("--out", pareto_out, "plot-ready output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (index_build->parsed()) {
            config::Config cfg;
            if (!index_config.empty()) cfg = config::Config::load(index_config);
            return cmd_index_build(corpus_path, index_out, cfg);
        }
        if (world_gen->parsed())
            return cmd_world_gen(world_seed, world_entities, world_relations, world_out);
        if (questions_gen->parsed())
            return cmd_questions_gen(q_world, q_hops, q_n, q_gap_rate, q_seed, q_out);
        if (train_cmd->parsed()) return cmd_train_policy(train_config, train_out);
        if (run_cmd->parsed())
            return cmd_run(run_strategy, run_policy, run_questions, run_seed, run_report,
                           run_config, run_workers);
        if (eval_compare->parsed())
            return cmd_eval_compare(eval_a, eval_b, eval_iters, eval_alpha, eval_comparisons,
                                    eval_seed);
        if (bench_pareto->parsed()) return cmd_bench_pareto(pareto_reports, pareto_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
