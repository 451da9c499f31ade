#include "divrank/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "divrank/error.hpp"

namespace divrank {

QueryTruth QueryTruth::from_corpus(const EmbeddingCorpus& corpus, QueryId query) {
    const QueryRecord& q = corpus.query(query);
    QueryTruth t;
    t.query_id = query;
    t.category_count = q.gt_categories.size();
    for (ImageId id : q.candidate_ids) {
        const ImageRecord& im = corpus.image(id);
        if (im.relevant) t.relevant.emplace(id, im.category);
    }
    return t;
}

double precision_at_k(std::span<const ImageId> list, const QueryTruth& truth, int k) {
    require(k >= 1, "precision_at_k: k must be >= 1");
    const std::size_t n = std::min(list.size(), static_cast<std::size_t>(k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += truth.relevant.count(list[i]);
    return static_cast<double>(hits) / k;
}

double cluster_recall_at_k(std::span<const ImageId> list, const QueryTruth& truth, int k) {
    require(k >= 1, "cluster_recall_at_k: k must be >= 1");
    require(truth.category_count >= 1, "cluster_recall_at_k: query has no ground-truth category");
    const std::size_t n = std::min(list.size(), static_cast<std::size_t>(k));
    std::unordered_set<int> covered;
    for (std::size_t i = 0; i < n; ++i) {
        auto it = truth.relevant.find(list[i]);
        if (it != truth.relevant.end()) covered.insert(it->second);
    }
    return static_cast<double>(covered.size()) / static_cast<double>(truth.category_count);
}

double f1_at_k(double p, double cr) {
    require(p >= 0.0 && p <= 1.0 && cr >= 0.0 && cr <= 1.0, "f1_at_k: inputs must lie in [0, 1]");
    return p + cr == 0.0 ? 0.0 : 2.0 * p * cr / (p + cr);
}

const MetricsAtK& RunMetrics::at_k(int k) const {
    for (const auto& m : at)
        if (m.k == k) return m;
    throw ContractViolation("RunMetrics: k=" + std::to_string(k) + " was not evaluated");
}

RunMetrics evaluate_run(const std::vector<RankedList>& runs, const EmbeddingCorpus& corpus,
                        const std::vector<int>& ks) {
    require(!ks.empty(), "evaluate_run: no cutoffs");
    RunMetrics out;
    out.strategy = runs.empty() ? "" : runs.front().strategy;
    out.n_queries = runs.size();
    std::set<QueryId> seen;
    for (const auto& list : runs) {
        require(corpus.has_query(list.query_id), "evaluate_run: unknown query id " + std::to_string(list.query_id));
        require(seen.insert(list.query_id).second,
                "evaluate_run: query " + std::to_string(list.query_id) + " appears twice");
        const QueryTruth truth = QueryTruth::from_corpus(corpus, list.query_id);
        const auto ids = list.ids();
        QueryMetrics qm;
        qm.query_id = list.query_id;
        qm.ks = ks;
        for (int k : ks) {
            const double p = precision_at_k(ids, truth, k);
            const double cr = cluster_recall_at_k(ids, truth, k);
            qm.p.push_back(p);
            qm.cr.push_back(cr);
            qm.f1.push_back(f1_at_k(p, cr));
        }
        out.per_query.push_back(std::move(qm));
    }
    for (std::size_t j = 0; j < ks.size(); ++j) {
        MetricsAtK m;
        m.k = ks[j];
        if (!runs.empty()) {
            for (const auto& qm : out.per_query) {
                m.p += qm.p[j];
                m.cr += qm.cr[j];
                m.f1_perquery_mean += qm.f1[j];
            }
            const double n = static_cast<double>(runs.size());
            m.p /= n;
            m.cr /= n;
            m.f1_perquery_mean /= n;
            m.f1_harmonic = f1_at_k(m.p, m.cr);
        }
        out.at.push_back(m);
    }
    return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<RunMetrics>& runs,
                       const std::vector<std::string>& preamble) {
    for (const auto& line : preamble) out << "# " << line << '\n';
    out << "strategy,k,P,CR,F1_harmonic,F1_perquery_mean,n_queries\n";
    char buf[256];
    for (const auto& r : runs) {
        for (const auto& m : r.at) {
            std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%.6f,%.6f,%zu\n", r.strategy.c_str(), m.k, m.p, m.cr,
                          m.f1_harmonic, m.f1_perquery_mean, r.n_queries);
            out << buf;
        }
    }
}

}  // namespace divrank
