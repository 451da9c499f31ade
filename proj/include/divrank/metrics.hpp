#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/retrieval.hpp"

namespace divrank {

// Ground truth of one query: relevant image -> its category.
struct QueryTruth {
    QueryId query_id = 0;
    std::unordered_map<ImageId, int> relevant;
    std::size_t category_count = 0;

    static QueryTruth from_corpus(const EmbeddingCorpus& corpus, QueryId query);
};

/// (#relevant among the first min(k, |list|)) / k.
double precision_at_k(std::span<const ImageId> list, const QueryTruth& truth, int k);
/// (#distinct categories of relevant items in the first k) / category_count.
double cluster_recall_at_k(std::span<const ImageId> list, const QueryTruth& truth, int k);
/// Harmonic mean, 0 when p + cr = 0.
double f1_at_k(double p, double cr);

struct QueryMetrics {
    QueryId query_id = 0;
    std::vector<int> ks;
    Vec p, cr, f1;
};

struct MetricsAtK {
    int k = 0;
    double p = 0.0;
    double cr = 0.0;
    double f1_harmonic = 0.0;       // headline: F1 of the macro averages
    double f1_perquery_mean = 0.0;  // mean of per-query F1
};

struct RunMetrics {
    std::string strategy;
    std::size_t n_queries = 0;
    std::vector<MetricsAtK> at;
    std::vector<QueryMetrics> per_query;

    const MetricsAtK& at_k(int k) const;
};

RunMetrics evaluate_run(const std::vector<RankedList>& runs, const EmbeddingCorpus& corpus,
                        const std::vector<int>& ks = {10, 20});

/// CSV columns: strategy,k,P,CR,F1_harmonic,F1_perquery_mean,n_queries.
/// `preamble` lines are written first, each prefixed with "# ".
void write_metrics_csv(std::ostream& out, const std::vector<RunMetrics>& runs,
                       const std::vector<std::string>& preamble = {});

}  // namespace divrank
