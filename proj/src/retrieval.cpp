#include "divrank/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_set>

#include "divrank/error.hpp"
#include "divrank/kernels.hpp"

namespace divrank {

std::vector<ImageId> RankedList::ids() const {
    std::vector<ImageId> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.image_id);
    return out;
}

void PostProcessConfig::validate() const {
    if (X < 1) throw ConfigError("post-process: X must be >= 1");
    if (k < X) throw ConfigError("post-process: k must be >= X");
}

void ClusterConfig::validate() const {
    if (!(eps > 0.0)) throw ConfigError("cluster: eps must be > 0");
    if (min_pts < 1) throw ConfigError("cluster: min_pts must be >= 1");
}

CandidatePool make_pool(const QueryRecord& query, const EmbeddingCorpus& corpus, const ReEncoderModel* reencoder) {
    CandidatePool pool;
    pool.ids = query.candidate_ids;
    pool.features = corpus.candidate_features(query);
    if (reencoder) pool.features = reencode_batch(pool.features, *reencoder);
    pool.sims.resize(pool.ids.size());
    if (!pool.ids.empty())
        kernels::cosine_rows_serial(pool.features.data(), pool.ids.size(), corpus.dim, query.feature, pool.sims.data());
    return pool;
}

std::vector<std::size_t> similarity_order(const Vec& sims, const std::vector<ImageId>& ids) {
    std::vector<std::size_t> order(sims.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return ids[a] < ids[b];
    });
    return order;
}

RankedList post_process(const Matrix& probs, const TokenSequence& seq, const LabelSpace& labels,
                        const PostProcessConfig& cfg) {
    cfg.validate();
    require(probs.rows() == seq.budget() + 1, "post_process: probs rows do not match sequence");
    require(probs.cols() == static_cast<std::size_t>(labels.num_classes()), "post_process: probs cols != classes");
    const auto k = static_cast<std::size_t>(cfg.k);
    const auto x = static_cast<std::size_t>(cfg.X);

    auto better = [&](std::size_t a, std::size_t b) {
        if (seq.similarities[a] != seq.similarities[b]) return seq.similarities[a] > seq.similarities[b];
        return seq.image_ids[a] < seq.image_ids[b];
    };

    std::map<int, std::vector<std::size_t>> groups;  // class -> token positions
    std::vector<std::size_t> discarded;
    std::unordered_set<ImageId> seen;
    for (std::size_t i = 0; i < seq.budget(); ++i) {
        if (seq.is_pad(i) || !seen.insert(seq.image_ids[i]).second) continue;
        const int cls = static_cast<int>(argmax_row(probs, i + 1));
        if (labels.is_category(cls)) groups[cls].push_back(i);
        else discarded.push_back(i);
    }

    RankedList out;
    out.strategy = "colt";
    out.k = k;
    auto emit = [&](std::size_t pos, int category) {
        out.items.push_back(RankedItem{seq.image_ids[pos], seq.similarities[pos], category});
    };

    std::vector<std::pair<int, std::vector<std::size_t>>> cats(groups.begin(), groups.end());
    for (auto& [cls, members] : cats) std::sort(members.begin(), members.end(), better);
    std::sort(cats.begin(), cats.end(), [&](const auto& a, const auto& b) { return better(a.second[0], b.second[0]); });

    std::size_t longest = 0;
    for (const auto& c : cats) longest = std::max(longest, c.second.size());
    for (std::size_t round = 0; round * x < longest && out.items.size() < k; ++round) {
        for (const auto& [cls, members] : cats) {
            const std::size_t lo = round * x, hi = std::min(members.size(), lo + x);
            for (std::size_t j = lo; j < hi && out.items.size() < k; ++j) emit(members[j], labels.category_of(cls));
            if (out.items.size() >= k) break;
        }
    }

    std::sort(discarded.begin(), discarded.end(), better);
    for (std::size_t i = 0; i < discarded.size() && out.items.size() < k; ++i) emit(discarded[i], kIrrelevant);

    if (cats.empty()) {
        out.flagged = true;
        out.note = "no token classified relevant; similarity fallback";
    } else if (out.items.size() < k) {
        out.flagged = true;
        out.note = "fewer than k candidates";
    }
    return out;
}

RankedList retrieve_colt(const QueryRecord& query, const EmbeddingCorpus& corpus, const ReEncoderModel& reencoder,
                         const TokenClassifierModel& ttc, const PostProcessConfig& cfg) {
    require(!query.candidate_ids.empty(), "retrieve_colt: query has no candidates");
    const Matrix enc = reencode_batch(corpus.candidate_features(query), reencoder);
    const TokenSequence seq = build_sequence(query.feature, query.candidate_ids, enc, ttc.sequence_budget);
    const Matrix probs = classify_tokens(seq, ttc);
    RankedList out = post_process(probs, seq, ttc.labels, cfg);
    out.query_id = query.query_id;
    return out;
}

RankedList topk_from_pool(const CandidatePool& pool, std::size_t k) {
    RankedList out;
    out.strategy = "topk";
    out.k = k;
    const auto order = similarity_order(pool.sims, pool.ids);
    for (std::size_t i = 0; i < order.size() && i < k; ++i)
        out.items.push_back(RankedItem{pool.ids[order[i]], pool.sims[order[i]], kIrrelevant});
    if (out.items.size() < k) {
        out.flagged = true;
        out.note = "fewer than k candidates";
    }
    return out;
}

RankedList retrieve_topk(const QueryRecord& query, const EmbeddingCorpus& corpus, std::size_t k,
                         const ReEncoderModel* reencoder) {
    RankedList out = topk_from_pool(make_pool(query, corpus, reencoder), k);
    out.query_id = query.query_id;
    return out;
}

RankedList mmr_from_pool(const CandidatePool& pool, std::size_t k, double lambda, std::size_t pool_size) {
    require(lambda >= 0.0 && lambda <= 1.0, "mmr: lambda must be in [0, 1]");
    RankedList out;
    out.strategy = "mmr";
    out.k = k;
    auto order = similarity_order(pool.sims, pool.ids);
    if (order.size() > pool_size) order.resize(pool_size);

    const std::size_t n = order.size();
    Vec norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = norm2(pool.features.row(order[i]));
    // max cosine to anything selected so far
    Vec redundancy(n, -std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);

    for (std::size_t step = 0; step < std::min(k, n); ++step) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double rel = pool.sims[order[i]];
            const double score = step == 0 ? rel : lambda * rel - (1.0 - lambda) * redundancy[i];
            // `order` is already sorted by (sim desc, id asc), so strict > keeps that tie rule.
            if (best == n || score > best_score) {
                best = i;
                best_score = score;
            }
        }
        taken[best] = true;
        out.items.push_back(RankedItem{pool.ids[order[best]], pool.sims[order[best]], kIrrelevant});
        auto fb = pool.features.row(order[best]);
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            const double c = dot(pool.features.row(order[i]), fb) / (norms[i] * norms[best]);
            redundancy[i] = std::max(redundancy[i], c);
        }
    }
    if (out.items.size() < k) {
        out.flagged = true;
        out.note = "fewer than k candidates";
    }
    return out;
}

RankedList retrieve_mmr(const QueryRecord& query, const EmbeddingCorpus& corpus, std::size_t k, double lambda,
                        const ReEncoderModel* reencoder, std::size_t pool_size) {
    RankedList out = mmr_from_pool(make_pool(query, corpus, reencoder), k, lambda, pool_size);
    out.query_id = query.query_id;
    return out;
}

RankedList cluster_from_pool(const CandidatePool& pool, std::size_t k, const ClusterConfig& cfg) {
    cfg.validate();
    RankedList out;
    out.strategy = "dbscan";
    out.k = k;

    std::vector<std::size_t> kept;
    for (std::size_t i : similarity_order(pool.sims, pool.ids))
        if (!(pool.sims[i] < cfg.sim_threshold)) kept.push_back(i);
    if (kept.empty()) {
        out.flagged = true;
        out.note = "all candidates filtered";
        return out;
    }

    Matrix pts(kept.size(), pool.features.cols());
    for (std::size_t r = 0; r < kept.size(); ++r)
        std::copy_n(pool.features.row(kept[r]).begin(), pts.cols(), pts.row(r).begin());
    const std::vector<int> labels = dbscan(pts, cfg.eps, cfg.min_pts);

    // Points are in similarity order, so clusters come out ordered by their
    // best member and members stay sorted.
    std::vector<std::vector<std::size_t>> clusters;
    std::map<int, std::size_t> slot;
    std::vector<std::size_t> noise;
    for (std::size_t r = 0; r < kept.size(); ++r) {
        if (labels[r] == kNoise) {
            noise.push_back(r);
            continue;
        }
        auto [it, inserted] = slot.emplace(labels[r], clusters.size());
        if (inserted) clusters.emplace_back();
        clusters[it->second].push_back(r);
    }
    if (!noise.empty()) clusters.push_back(noise);

    for (std::size_t round = 0; out.items.size() < k; ++round) {
        bool any = false;
        for (const auto& c : clusters) {
            if (round >= c.size()) continue;
            any = true;
            const std::size_t src = kept[c[round]];
            out.items.push_back(RankedItem{pool.ids[src], pool.sims[src], kIrrelevant});
            if (out.items.size() >= k) break;
        }
        if (!any) break;
    }
    if (out.items.size() < k) {
        out.flagged = true;
        out.note = "fewer than k candidates after filtering";
    }
    return out;
}

RankedList retrieve_cluster(const QueryRecord& query, const EmbeddingCorpus& corpus, std::size_t k,
                            const ClusterConfig& cfg, const ReEncoderModel* reencoder) {
    RankedList out = cluster_from_pool(make_pool(query, corpus, reencoder), k, cfg);
    out.query_id = query.query_id;
    return out;
}

}  // namespace divrank
