#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "divrank/corpus.hpp"

namespace divrank {

/// Long-tailed synthetic corpus. Each global category c has a direction u_c;
/// each query has a topic t_q. The prototype of category c under query q is
/// normalize(t_q + spread·u_c), images are normalize(prototype + σ·N(0, I)),
/// and the query is the size-weighted mean of its category prototypes, so
/// it sits closest to the dominant categories.
struct GeneratorConfig {
    int queries = 50;       // tagged "train"
    int test_queries = 0;   // tagged "test"
    int dim = 64;
    double mean_categories = 11.8;
    double zipf_s = 1.0;
    double sigma = 0.15;
    int relevant_per_query = 60;
    int irrelevant_per_query = 30;
    double category_spread = 1.0;
    double irrelevant_affinity = 0.5;  // weight of the query topic in background images
    double category_reuse = 6.0;       // mean number of queries sharing a global category
    int global_categories = 0;         // 0: derived from category_reuse
    std::vector<int> forced_sizes;     // overrides Poisson/Zipf sizing when non-empty

    void validate() const;
};

struct SyntheticCorpus {
    EmbeddingCorpus corpus;
    // (query id, category id) -> canonical category prototype
    std::map<std::pair<QueryId, int>, Vec> prototypes;
};

SyntheticCorpus generate_synthetic_detailed(const GeneratorConfig& cfg, std::uint64_t seed);
EmbeddingCorpus generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed);

// Zipf(s) split of `total` items into `count` ranked groups, each at least 1.
std::vector<int> zipf_sizes(int total, int count, double s);

}  // namespace divrank
