#include "divrank/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "divrank/checkpoint.hpp"
#include "divrank/config.hpp"
#include "divrank/corpus_io.hpp"
#include "divrank/error.hpp"
#include "divrank/export.hpp"
#include "divrank/kernels.hpp"
#include "divrank/metrics.hpp"
#include "divrank/pipeline.hpp"
#include "divrank/synthetic.hpp"

namespace divrank {

namespace {

struct ConfigSources {
    std::string file;
    std::vector<std::string> sets;  // key=value overrides

    void add_options(CLI::App* app) {
        app->add_option("--config", file, "key = value config file");
        app->add_option("--set", sets, "override one config key (key=value), repeatable");
    }

    void apply(ExperimentConfig& cfg) const {
        if (!file.empty()) cfg.apply(read_config_file(file));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
    }
};

std::vector<std::string> preamble_of(const ConfigMap& cfg) {
    std::vector<std::string> lines;
    for (const auto& [k, v] : cfg) lines.push_back(k + "=" + v);
    return lines;
}

// Writes to `path`, or to `fallback` when the path is empty or "-".
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
    if (path.empty() || path == "-") {
        write(fallback);
        return;
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    write(f);
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Keyword-based diverse image retrieval on embedding corpora", "divrank"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: DIVRANK_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);

    // gen
    auto* gen = app.add_subcommand("gen", "write a synthetic long-tailed corpus");
    ConfigSources gen_src;
    std::optional<int> g_queries, g_test, g_dim, g_rel, g_irr;
    std::optional<double> g_mean, g_zipf, g_sigma, g_spread, g_reuse, g_affinity;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen_src.add_options(gen);
    gen->add_option("--queries", g_queries, "training queries");
    gen->add_option("--test-queries", g_test, "test queries");
    gen->add_option("--dim", g_dim, "feature dimension");
    gen->add_option("--mean-categories", g_mean, "Poisson mean of categories per query");
    gen->add_option("--zipf-s", g_zipf, "Zipf exponent of category sizes");
    gen->add_option("--sigma", g_sigma, "within-category noise");
    gen->add_option("--relevant", g_rel, "relevant images per query");
    gen->add_option("--irrelevant", g_irr, "irrelevant images per query");
    gen->add_option("--category-spread", g_spread, "weight of the category direction in each prototype");
    gen->add_option("--category-reuse", g_reuse, "mean queries sharing one category");
    gen->add_option("--irrelevant-affinity", g_affinity, "weight of the query topic in irrelevant images");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("-o,--output", gen_out, "output manifest path")->required();

    // train
    auto* train = app.add_subcommand("train", "train the re-encoder and token classifier");
    ConfigSources train_src;
    std::string train_corpus, train_ckpt, train_split = "train";
    bool skip_scl = false, skip_ttc = false, no_da = false;
    std::optional<std::uint64_t> train_seed;
    train_src.add_options(train);
    train->add_option("--corpus", train_corpus, "corpus manifest")->required();
    train->add_option("-o,--checkpoint", train_ckpt, "checkpoint to write")->required();
    train->add_option("--split", train_split, "query split to train on");
    train->add_option("--seed", train_seed, "training seed");
    train->add_flag("--skip-scl", skip_scl, "skip stage 1 (re-encoder stays the identity)");
    train->add_flag("--skip-ttc", skip_ttc, "skip stage 2 (no token classifier)");
    train->add_flag("--no-da", no_da, "train the classifier without data augmentation");

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "produce ranked lists");
    ConfigSources ret_src;
    std::string ret_corpus, ret_ckpt, ret_out, ret_split;
    RetrieveOptions ret_opt;
    ret_src.add_options(retrieve);
    retrieve->add_option("--corpus", ret_corpus, "corpus manifest")->required();
    retrieve->add_option("--checkpoint", ret_ckpt, "trained checkpoint")->required();
    retrieve->add_option("--strategy", ret_opt.strategy, "colt, topk, mmr or dbscan")
        ->check(CLI::IsMember(kStrategies));
    retrieve->add_option("-k", ret_opt.k, "list length")->check(CLI::PositiveNumber);
    retrieve->add_flag("--raw", ret_opt.raw, "baselines on raw features instead of re-encoded ones");
    retrieve->add_option("--split", ret_split, "query split (default: test if present, else all)");
    retrieve->add_option("-o,--output", ret_out, "run JSONL (default stdout)");

    // eval
    auto* eval = app.add_subcommand("eval", "score runs as a metrics CSV");
    std::string eval_corpus, eval_out, eval_ks = "10,20";
    std::vector<std::string> eval_runs;
    eval->add_option("--corpus", eval_corpus, "corpus manifest")->required();
    eval->add_option("--run", eval_runs, "run JSONL, repeatable")->required();
    eval->add_option("--ks", eval_ks, "comma-separated cutoffs");
    eval->add_option("-o,--output", eval_out, "metrics CSV (default stdout)");

    // ablate
    auto* abl = app.add_subcommand("ablate", "sweep one setting and score CoLT");
    ConfigSources abl_src;
    std::string abl_corpus, abl_axis, abl_values, abl_out, abl_split;
    int abl_k = 20;
    std::optional<std::uint64_t> abl_seed;
    abl_src.add_options(abl);
    abl->add_option("--corpus", abl_corpus, "corpus manifest")->required();
    abl->add_option("--axis", abl_axis, "X, L, N, pairs or da")
        ->required()
        ->check(CLI::IsMember({"X", "L", "N", "pairs", "da"}));
    abl->add_option("--values", abl_values, "comma-separated values")->required();
    abl->add_option("-k", abl_k, "cutoff")->check(CLI::PositiveNumber);
    abl->add_option("--seed", abl_seed, "training seed");
    abl->add_option("--split", abl_split, "evaluation split (default: test if present, else all)");
    abl->add_option("-o,--output", abl_out, "CSV (default stdout)");

    // export
    auto* exp = app.add_subcommand("export", "2D PCA of raw and re-encoded features");
    std::string exp_corpus, exp_ckpt, exp_out, exp_split = "all";
    exp->add_option("--corpus", exp_corpus, "corpus manifest")->required();
    exp->add_option("--checkpoint", exp_ckpt, "trained checkpoint")->required();
    exp->add_option("--split", exp_split, "query split");
    exp->add_option("-o,--output", exp_out, "CSV (default stdout)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (threads > 0) kernels::configure_threads(threads);
        else kernels::configure_threads();

        if (*gen) {
            ExperimentConfig cfg;
            gen_src.apply(cfg);
            GeneratorConfig& g = cfg.generator;
            auto take = [](auto& dst, const auto& flag) {
                if (flag) dst = *flag;
            };
            take(g.queries, g_queries);
            take(g.test_queries, g_test);
            take(g.dim, g_dim);
            take(g.mean_categories, g_mean);
            take(g.zipf_s, g_zipf);
            take(g.sigma, g_sigma);
            take(g.relevant_per_query, g_rel);
            take(g.irrelevant_per_query, g_irr);
            take(g.category_spread, g_spread);
            take(g.category_reuse, g_reuse);
            take(g.irrelevant_affinity, g_affinity);
            g.validate();
            save_corpus(generate_synthetic(g, gen_seed), gen_out);
        } else if (*train) {
            ExperimentConfig cfg;
            train_src.apply(cfg);
            if (train_seed) cfg.seed = *train_seed;
            if (skip_scl) cfg.skip_scl = true;
            if (skip_ttc) cfg.skip_ttc = true;
            if (no_da) cfg.augmentation.enabled = false;
            cfg.validate();
            const EmbeddingCorpus corpus = load_corpus(train_corpus);
            const EmbeddingCorpus split = evaluation_split(corpus, train_split);
            const TrainedSystem sys = train_system(split, cfg);
            save_checkpoint(to_checkpoint(sys, cfg), train_ckpt);
            err << "trained: scl steps " << sys.scl_report.steps << ", ttc steps " << sys.ttc_report.steps << '\n';
        } else if (*retrieve) {
            const Checkpoint ck = load_checkpoint(ret_ckpt);
            ExperimentConfig cfg;
            cfg.apply(ck.config);
            ret_src.apply(cfg);
            cfg.validate();
            const EmbeddingCorpus corpus = evaluation_split(load_corpus(ret_corpus), ret_split);
            const auto runs = run_strategy(corpus, from_checkpoint(ck), cfg, ret_opt);
            ConfigMap echo = cfg.to_map();
            echo["strategy"] = ret_opt.strategy;
            echo["raw"] = ret_opt.raw ? "true" : "false";
            emit(ret_out, out, [&](std::ostream& o) { write_run_jsonl(o, runs, echo); });
        } else if (*eval) {
            const EmbeddingCorpus corpus = load_corpus(eval_corpus);
            const std::vector<int> ks = parse_int_list(eval_ks);
            std::vector<RunMetrics> metrics;
            std::vector<std::string> preamble;
            for (const auto& path : eval_runs) {
                std::ifstream in(path);
                if (!in) throw std::runtime_error("cannot open " + path);
                ConfigMap echo;
                const auto runs = read_run_jsonl(in, &echo);
                metrics.push_back(evaluate_run(runs, corpus, ks));
                preamble.push_back("run=" + path);
                for (const auto& line : preamble_of(echo)) preamble.push_back(line);
            }
            emit(eval_out, out, [&](std::ostream& o) { write_metrics_csv(o, metrics, preamble); });
        } else if (*abl) {
            ExperimentConfig cfg;
            abl_src.apply(cfg);
            if (abl_seed) cfg.seed = *abl_seed;
            cfg.validate();
            const EmbeddingCorpus corpus = load_corpus(abl_corpus);
            const EmbeddingCorpus train_split_c = corpus.subset("train");
            if (train_split_c.queries.empty()) throw ConfigError("corpus has no training queries");
            const EmbeddingCorpus eval_split_c = evaluation_split(corpus, abl_split);
            std::vector<std::string> values;
            std::stringstream ss(abl_values);
            for (std::string v; std::getline(ss, v, ',');) values.push_back(v);
            const auto rows = ablate(train_split_c, eval_split_c, cfg, abl_axis, values, abl_k);
            emit(abl_out, out, [&](std::ostream& o) { write_ablation_csv(o, rows, preamble_of(cfg.to_map())); });
        } else if (*exp) {
            const Checkpoint ck = load_checkpoint(exp_ckpt);
            const EmbeddingCorpus corpus = evaluation_split(load_corpus(exp_corpus), exp_split);
            emit(exp_out, out,
                 [&](std::ostream& o) { export_projection_csv(o, corpus, ck.reencoder, preamble_of(ck.config)); });
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int run_command(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace divrank
