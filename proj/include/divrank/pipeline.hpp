#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "divrank/checkpoint.hpp"
#include "divrank/config.hpp"
#include "divrank/corpus.hpp"
#include "divrank/metrics.hpp"
#include "divrank/retrieval.hpp"

namespace divrank {

struct TrainedSystem {
    ReEncoderModel reencoder;
    PrototypeBank bank;
    std::optional<TokenClassifierModel> ttc;
    SclTrainReport scl_report;
    TtcTrainReport ttc_report;
};

/// Stage 1 (contrastive re-encoder + bank), then stage 2 (token classifier
/// on re-encoded sequences). `skip_scl` leaves the re-encoder at β = 0, the
/// identity; `skip_ttc` leaves no classifier.
TrainedSystem train_system(const EmbeddingCorpus& train, const ExperimentConfig& cfg);

Checkpoint to_checkpoint(const TrainedSystem& sys, const ExperimentConfig& cfg);
TrainedSystem from_checkpoint(const Checkpoint& ckpt);

inline const std::vector<std::string> kStrategies = {"colt", "topk", "mmr", "dbscan"};

struct RetrieveOptions {
    std::string strategy = "colt";
    int k = 20;
    bool raw = false;  // baselines on raw features instead of re-encoded ones
};

/// One list per query of `corpus`, in query order, queries spread over
/// OpenMP threads.
std::vector<RankedList> run_strategy(const EmbeddingCorpus& corpus, const TrainedSystem& sys,
                                     const ExperimentConfig& cfg, const RetrieveOptions& opt);
/// Same lists computed on one thread; the parallel path must match it.
std::vector<RankedList> run_strategy_serial(const EmbeddingCorpus& corpus, const TrainedSystem& sys,
                                            const ExperimentConfig& cfg, const RetrieveOptions& opt);

/// JSON lines: a {"config": {...}} line, then one object per query.
void write_run_jsonl(std::ostream& out, const std::vector<RankedList>& runs, const ConfigMap& config);
std::vector<RankedList> read_run_jsonl(std::istream& in, ConfigMap* config = nullptr);

struct AblationRow {
    std::string axis;
    std::string value;
    int k = 20;
    MetricsAtK metrics;
    std::size_t n_queries = 0;
};

/// Axes: X, L, N (retrain per value except X), pairs (both, no_proto_rel,
/// no_proto_irr, none), da (on, off). Every row evaluates CoLT on `eval`.
std::vector<AblationRow> ablate(const EmbeddingCorpus& train, const EmbeddingCorpus& eval,
                                const ExperimentConfig& base, const std::string& axis,
                                const std::vector<std::string>& values, int k);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows,
                        const std::vector<std::string>& preamble = {});

/// Queries to evaluate when no split is named: "test" if present, else all.
EmbeddingCorpus evaluation_split(const EmbeddingCorpus& corpus, const std::string& split);

}  // namespace divrank
