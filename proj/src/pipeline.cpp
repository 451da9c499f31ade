#include "divrank/pipeline.hpp"

#include <cstdio>
#include <exception>
#include <json.hpp>

#include "divrank/error.hpp"
#include "divrank/rng.hpp"

namespace divrank {

using nlohmann::json;

TrainedSystem train_system(const EmbeddingCorpus& train, const ExperimentConfig& cfg) {
    cfg.validate();
    require(!train.queries.empty(), "train_system: no training queries");
    const int dim = static_cast<int>(train.dim);
    TrainedSystem sys;
    RngStream init(cfg.seed, "init");

    RngStream re_rng = init.split("reencoder");
    sys.reencoder = ReEncoderModel::create(dim, cfg.skip_scl ? 0.0 : cfg.beta, re_rng);
    sys.bank = init_bank(train.descriptors);
    if (!cfg.skip_scl) sys.scl_report = train_reencoder(train, sys.reencoder, sys.bank, cfg.scl_config());

    if (!cfg.skip_ttc) {
        RngStream ttc_rng = init.split("ttc");
        auto model = TokenClassifierModel::create(cfg.transformer_config(dim), LabelSpace::from_bank(sys.bank),
                                                  static_cast<std::size_t>(cfg.budget), ttc_rng);
        sys.ttc_report = train_ttc(train, sys.reencoder, model, cfg.augmentation, cfg.ttc_config());
        sys.ttc = std::move(model);
    }
    return sys;
}

Checkpoint to_checkpoint(const TrainedSystem& sys, const ExperimentConfig& cfg) {
    Checkpoint ck;
    ck.config = cfg.to_map();
    ck.reencoder = sys.reencoder;
    ck.bank = sys.bank;
    ck.ttc = sys.ttc;
    ck.scl_steps = sys.scl_report.steps;
    ck.ttc_steps = sys.ttc_report.steps;
    ck.rng_labels = {"init/reencoder", "init/ttc", "scl.order", "scl.irrelevant", "ttc.order", "ttc.augment"};
    return ck;
}

TrainedSystem from_checkpoint(const Checkpoint& ckpt) {
    TrainedSystem sys;
    sys.reencoder = ckpt.reencoder;
    sys.bank = ckpt.bank;
    sys.ttc = ckpt.ttc;
    sys.scl_report.steps = ckpt.scl_steps;
    sys.ttc_report.steps = ckpt.ttc_steps;
    return sys;
}

namespace {

RankedList retrieve_one(const QueryRecord& q, const EmbeddingCorpus& corpus, const TrainedSystem& sys,
                        const ExperimentConfig& cfg, const RetrieveOptions& opt) {
    const auto k = static_cast<std::size_t>(opt.k);
    const ReEncoderModel* re = opt.raw ? nullptr : &sys.reencoder;
    if (opt.strategy == "colt") {
        if (!sys.ttc) throw ConfigError("strategy colt needs a token classifier (model was trained with skip_ttc)");
        return retrieve_colt(q, corpus, sys.reencoder, *sys.ttc, cfg.post_process_config(opt.k));
    }
    if (opt.strategy == "topk") return retrieve_topk(q, corpus, k, re);
    if (opt.strategy == "mmr")
        return retrieve_mmr(q, corpus, k, cfg.mmr_lambda, re, static_cast<std::size_t>(cfg.budget));
    if (opt.strategy == "dbscan") return retrieve_cluster(q, corpus, k, cfg.cluster_config(), re);
    throw ConfigError("unknown strategy '" + opt.strategy + "'");
}

void check_options(const RetrieveOptions& opt) {
    if (opt.k < 1) throw ConfigError("k must be >= 1");
    bool known = false;
    for (const auto& s : kStrategies) known = known || s == opt.strategy;
    if (!known) throw ConfigError("unknown strategy '" + opt.strategy + "'");
}

}  // namespace

std::vector<RankedList> run_strategy(const EmbeddingCorpus& corpus, const TrainedSystem& sys,
                                     const ExperimentConfig& cfg, const RetrieveOptions& opt) {
    check_options(opt);
    const auto n = static_cast<std::ptrdiff_t>(corpus.queries.size());
    std::vector<RankedList> out(corpus.queries.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                retrieve_one(corpus.queries[static_cast<std::size_t>(i)], corpus, sys, cfg, opt);
        } catch (...) {
#pragma omp critical(divrank_run_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::vector<RankedList> run_strategy_serial(const EmbeddingCorpus& corpus, const TrainedSystem& sys,
                                            const ExperimentConfig& cfg, const RetrieveOptions& opt) {
    check_options(opt);
    std::vector<RankedList> out;
    out.reserve(corpus.queries.size());
    for (const auto& q : corpus.queries) out.push_back(retrieve_one(q, corpus, sys, cfg, opt));
    return out;
}

void write_run_jsonl(std::ostream& out, const std::vector<RankedList>& runs, const ConfigMap& config) {
    out << json{{"config", config}}.dump() << '\n';
    for (const auto& r : runs) {
        json items = json::array();
        for (std::size_t i = 0; i < r.items.size(); ++i) {
            const auto& it = r.items[i];
            items.push_back({{"image_id", it.image_id},
                             {"rank", i + 1},
                             {"sim", it.similarity},
                             {"pred_category", it.predicted_category}});
        }
        json line = {{"query_id", r.query_id}, {"strategy", r.strategy}, {"k", r.k}, {"items", items}};
        if (r.flagged) line["flag"] = r.note;
        out << line.dump() << '\n';
    }
}

std::vector<RankedList> read_run_jsonl(std::istream& in, ConfigMap* config) {
    std::vector<RankedList> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (j.contains("config")) {
                if (config) *config = j.at("config").get<ConfigMap>();
                continue;
            }
            RankedList r;
            r.query_id = j.at("query_id").get<QueryId>();
            r.strategy = j.at("strategy").get<std::string>();
            r.k = j.at("k").get<std::size_t>();
            for (const auto& it : j.at("items"))
                r.items.push_back(RankedItem{it.at("image_id").get<ImageId>(), it.at("sim").get<double>(),
                                             it.at("pred_category").get<int>()});
            if (j.contains("flag")) {
                r.flagged = true;
                r.note = j.at("flag").get<std::string>();
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError("malformed run", "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<AblationRow> ablate(const EmbeddingCorpus& train, const EmbeddingCorpus& eval,
                                const ExperimentConfig& base, const std::string& axis,
                                const std::vector<std::string>& values, int k) {
    if (values.empty()) throw ConfigError("ablate: no values");
    std::vector<AblationRow> rows;
    std::optional<TrainedSystem> shared;
    for (const auto& value : values) {
        ExperimentConfig cfg = base;
        if (axis == "X") {
            cfg.set("X", value);
        } else if (axis == "L") {
            cfg.set("L", value);
        } else if (axis == "N") {
            cfg.set("N", value);
        } else if (axis == "pairs") {
            if (value == "both") {
            } else if (value == "no_proto_rel") {
                cfg.pair_prototype_relevant = false;
            } else if (value == "no_proto_irr") {
                cfg.pair_prototype_irrelevant = false;
            } else if (value == "none") {
                cfg.pair_prototype_relevant = cfg.pair_prototype_irrelevant = false;
            } else {
                throw ConfigError("ablate pairs: unknown value '" + value + "'");
            }
        } else if (axis == "da") {
            cfg.set("da", value);
        } else {
            throw ConfigError("ablate: unknown axis '" + axis + "'");
        }
        cfg.skip_ttc = false;
        cfg.validate();

        // X only changes post-processing, so one trained system serves the sweep.
        if (axis != "X" || !shared) shared = train_system(train, cfg);
        const auto runs = run_strategy(eval, *shared, cfg, RetrieveOptions{"colt", k, false});
        const RunMetrics m = evaluate_run(runs, eval, {k});
        rows.push_back(AblationRow{axis, value, k, m.at_k(k), m.n_queries});
    }
    return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows,
                        const std::vector<std::string>& preamble) {
    for (const auto& line : preamble) out << "# " << line << '\n';
    out << "axis,value,k,P,CR,F1_harmonic,F1_perquery_mean,n_queries\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%zu\n", r.axis.c_str(), r.value.c_str(), r.k,
                      r.metrics.p, r.metrics.cr, r.metrics.f1_harmonic, r.metrics.f1_perquery_mean, r.n_queries);
        out << buf;
    }
}

EmbeddingCorpus evaluation_split(const EmbeddingCorpus& corpus, const std::string& split) {
    if (split == "all") return corpus;
    if (split.empty()) {
        for (const auto& q : corpus.queries)
            if (q.split == "test") return corpus.subset("test");
        return corpus;
    }
    EmbeddingCorpus sub = corpus.subset(split);
    if (sub.queries.empty()) throw ConfigError("no queries tagged '" + split + "'");
    return sub;
}

}  // namespace divrank
