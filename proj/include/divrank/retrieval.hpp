#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/matrix.hpp"
#include "divrank/reencoder.hpp"
#include "divrank/token_classifier.hpp"

namespace divrank {

struct RankedItem {
    ImageId image_id = 0;
    double similarity = 0.0;
    int predicted_category = kIrrelevant;  // global category id, or kIrrelevant
};

struct RankedList {
    QueryId query_id = 0;
    std::string strategy;
    std::size_t k = 0;
    std::vector<RankedItem> items;
    bool flagged = false;  // shorter than k, or produced by a fallback path
    std::string note;

    std::vector<ImageId> ids() const;
};

struct PostProcessConfig {
    int X = 1;
    int k = 20;

    void validate() const;
};

/// Candidate set of one query: ids, (re-encoded) features and cosine
/// similarity to the query.
struct CandidatePool {
    std::vector<ImageId> ids;
    Matrix features;
    Vec sims;
};

CandidatePool make_pool(const QueryRecord& query, const EmbeddingCorpus& corpus, const ReEncoderModel* reencoder);

// Indices into `sims` by (similarity desc, id asc).
std::vector<std::size_t> similarity_order(const Vec& sims, const std::vector<ImageId>& ids);

/// Turns token predictions into a list: each image token takes its argmax
/// class; IRRELEVANT/QUERY/pad tokens are set aside. Categories are ordered
/// by their best member's similarity. Round r takes members [rX, (r+1)X) of
/// every category in that order until k items; any shortfall comes from the
/// set-aside tokens by similarity. If nothing is predicted relevant, the
/// list is the plain similarity order and is flagged.
RankedList post_process(const Matrix& probs, const TokenSequence& seq, const LabelSpace& labels,
                        const PostProcessConfig& cfg);

RankedList retrieve_colt(const QueryRecord& query, const EmbeddingCorpus& corpus, const ReEncoderModel& reencoder,
                         const TokenClassifierModel& ttc, const PostProcessConfig& cfg);

RankedList topk_from_pool(const CandidatePool& pool, std::size_t k);
RankedList retrieve_topk(const QueryRecord& query, const EmbeddingCorpus& corpus, std::size_t k,
                         const ReEncoderModel* reencoder = nullptr);

/// Greedy MMR over the `pool_size` most similar candidates:
/// argmax λ·sim(q,d) − (1−λ)·max_{s∈S} cos(d,s); ties by similarity, then id.
RankedList mmr_from_pool(const CandidatePool& pool, std::size_t k, double lambda, std::size_t pool_size = 200);
RankedList retrieve_mmr(const QueryRecord& query, const EmbeddingCorpus& corpus, std::size_t k, double lambda,
                        const ReEncoderModel* reencoder = nullptr, std::size_t pool_size = 200);

struct ClusterConfig {
    double eps = 0.4;
    int min_pts = 3;
    double sim_threshold = 0.5;

    void validate() const;
};

inline constexpr int kNoise = -1;

/// DBSCAN with Euclidean distance (neighbors at distance ≤ eps, the point
/// itself included in the min_pts count). Points are visited in row order;
/// returns a cluster id per row, kNoise for noise.
std::vector<int> dbscan(const Matrix& points, double eps, int min_pts);

/// Filter (sim < threshold dropped) → DBSCAN → clusters ordered by their
/// most similar member, noise last → round-robin one image per cluster.
RankedList cluster_from_pool(const CandidatePool& pool, std::size_t k, const ClusterConfig& cfg);
RankedList retrieve_cluster(const QueryRecord& query, const EmbeddingCorpus& corpus, std::size_t k,
                            const ClusterConfig& cfg, const ReEncoderModel* reencoder = nullptr);

}  // namespace divrank
