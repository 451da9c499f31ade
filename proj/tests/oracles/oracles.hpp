#pragma once

// Straight-line re-implementations used as test oracles. They share no code
// with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "divrank/params.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const divrank::Matrix& m) {
    Rows r(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
    return r;
}

// ---- transformer -------------------------------------------------------

inline std::vector<double> layer_norm(const std::vector<double>& x, const divrank::Matrix& g,
                                      const divrank::Matrix& b) {
    const double n = static_cast<double>(x.size());
    double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = g(0, i) * (x[i] - mean) / std::sqrt(var + 1e-5) + b(0, i);
    return y;
}

inline std::vector<double> affine(const std::vector<double>& x, const divrank::Matrix& w, const divrank::Matrix& b) {
    std::vector<double> y(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = b(0, j);
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, j);
        y[j] = s;
    }
    return y;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Rows encoder(Rows x, const divrank::ParamStore& p, int layers, int heads) {
    const std::size_t n = x.size(), d = x[0].size(), hd = d / static_cast<std::size_t>(heads);
    for (int l = 0; l < layers; ++l) {
        auto P = [&](const char* s) -> const divrank::Matrix& {
            return p.value("enc." + std::to_string(l) + "." + s);
        };
        Rows q(n), k(n), v(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto a = layer_norm(x[i], P("ln1.g"), P("ln1.b"));
            q[i] = affine(a, P("attn.wq"), P("attn.bq"));
            k[i] = affine(a, P("attn.wk"), P("attn.bk"));
            v[i] = affine(a, P("attn.wv"), P("attn.bv"));
        }
        Rows ctx(n, std::vector<double>(d, 0.0));
        for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> s(n);
                for (std::size_t j = 0; j < n; ++j) {
                    double dotv = 0;
                    for (std::size_t t = h * hd; t < (h + 1) * hd; ++t) dotv += q[i][t] * k[j][t];
                    s[j] = dotv / std::sqrt(static_cast<double>(hd));
                }
                const double mx = *std::max_element(s.begin(), s.end());
                double z = 0;
                for (double& e : s) z += (e = std::exp(e - mx));
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t t = h * hd; t < (h + 1) * hd; ++t) ctx[i][t] += s[j] / z * v[j][t];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto o = affine(ctx[i], P("attn.wo"), P("attn.bo"));
            for (std::size_t c = 0; c < d; ++c) x[i][c] += o[c];
            auto b = layer_norm(x[i], P("ln2.g"), P("ln2.b"));
            auto f = affine(b, P("ffn.w1"), P("ffn.b1"));
            for (double& e : f) e = gelu(e);
            auto f2 = affine(f, P("ffn.w2"), P("ffn.b2"));
            for (std::size_t c = 0; c < d; ++c) x[i][c] += f2[c];
        }
    }
    return x;
}

// ---- contrastive loss --------------------------------------------------

inline double dotv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Direct sums of exponentials (no stabilization); fine for small instances.
inline double scl_loss(const std::vector<double>& q, const Rows& rel, const std::vector<int>& rel_proto_row,
                       const Rows& irr, const Rows& bank, double tau, bool pair2 = true, bool pair4 = true) {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        s1 += std::exp(dotv(q, rel[i]) / tau);
        if (pair2) s2 += std::exp(dotv(bank[static_cast<std::size_t>(rel_proto_row[i])], rel[i]) / tau);
    }
    for (const auto& f : irr) {
        s3 += std::exp(dotv(q, f) / tau);
        if (pair4)
            for (const auto& b : bank) s4 += std::exp(dotv(b, f) / tau);
    }
    return -std::log((s1 + s2) / (s3 + s4 + s1 + s2));
}

// ---- metrics -----------------------------------------------------------

struct Truth {
    std::map<std::int64_t, int> relevant;  // id -> category
    int categories = 1;
};

inline double precision(const std::vector<std::int64_t>& list, const Truth& t, int k) {
    int hits = 0;
    for (int i = 0; i < k && i < static_cast<int>(list.size()); ++i)
        if (t.relevant.count(list[static_cast<std::size_t>(i)])) ++hits;
    return static_cast<double>(hits) / k;
}

inline double cluster_recall(const std::vector<std::int64_t>& list, const Truth& t, int k) {
    std::set<int> cats;
    for (int i = 0; i < k && i < static_cast<int>(list.size()); ++i) {
        auto it = t.relevant.find(list[static_cast<std::size_t>(i)]);
        if (it != t.relevant.end()) cats.insert(it->second);
    }
    return static_cast<double>(cats.size()) / t.categories;
}

// ---- post-processing ---------------------------------------------------

struct Token {
    std::int64_t id;
    double sim;
    int cls;  // -1: not assigned to any category
};

// Sort key: (round, category rank, position within category); leftovers
// follow by similarity.
inline std::vector<std::int64_t> post_process(std::vector<Token> toks, int X, int k) {
    auto better = [](const Token& a, const Token& b) { return a.sim != b.sim ? a.sim > b.sim : a.id < b.id; };
    std::sort(toks.begin(), toks.end(), better);
    std::map<int, int> cat_rank;
    std::map<int, int> seen_in_cat;
    struct Keyed {
        long round, rank, pos;
        std::int64_t id;
    };
    std::vector<Keyed> picked;
    std::vector<std::int64_t> rest;
    for (const auto& t : toks) {
        if (t.cls < 0) {
            rest.push_back(t.id);
            continue;
        }
        if (!cat_rank.count(t.cls)) cat_rank[t.cls] = static_cast<int>(cat_rank.size());
        const int p = seen_in_cat[t.cls]++;
        picked.push_back({p / X, cat_rank[t.cls], p, t.id});
    }
    std::sort(picked.begin(), picked.end(), [](const Keyed& a, const Keyed& b) {
        if (a.round != b.round) return a.round < b.round;
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.pos < b.pos;
    });
    std::vector<std::int64_t> out;
    for (const auto& p : picked)
        if (static_cast<int>(out.size()) < k) out.push_back(p.id);
    for (auto id : rest)
        if (static_cast<int>(out.size()) < k) out.push_back(id);
    return out;
}

// ---- MMR ---------------------------------------------------------------

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    return dotv(a, b) / std::sqrt(dotv(a, a) * dotv(b, b));
}

// Recomputes every score from scratch at every step.
inline std::vector<std::int64_t> mmr(const std::vector<std::int64_t>& ids, const Rows& feats,
                                     const std::vector<double>& sims, int k, double lambda) {
    std::vector<std::int64_t> out;
    std::vector<bool> used(ids.size(), false);
    for (int step = 0; step < k && step < static_cast<int>(ids.size()); ++step) {
        int best = -1;
        double best_score = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (used[i]) continue;
            double score = sims[i];
            if (step > 0) {
                double red = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < ids.size(); ++j)
                    if (used[j]) red = std::max(red, cosine(feats[i], feats[j]));
                score = lambda * sims[i] - (1 - lambda) * red;
            }
            const bool wins = best < 0 || score > best_score ||
                              (score == best_score && (sims[i] > sims[static_cast<std::size_t>(best)] ||
                                                       (sims[i] == sims[static_cast<std::size_t>(best)] &&
                                                        ids[i] < ids[static_cast<std::size_t>(best)])));
            if (wins) {
                best = static_cast<int>(i);
                best_score = score;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        out.push_back(ids[static_cast<std::size_t>(best)]);
    }
    return out;
}

// ---- DBSCAN ------------------------------------------------------------

// Clusters are connected components of core points (union-find), numbered
// by their smallest core index. A border point joins the lowest-numbered
// cluster among its core neighbors; everything else is noise (-1).
inline std::vector<int> dbscan(const Rows& pts, double eps, int min_pts) {
    const std::size_t n = pts.size();
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0;
        for (std::size_t c = 0; c < pts[i].size(); ++c) s += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
        return std::sqrt(s);
    };
    std::vector<std::vector<std::size_t>> nb(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (dist(i, j) * dist(i, j) <= eps * eps) nb[i].push_back(j);
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= static_cast<std::size_t>(min_pts);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t a) {
        return parent[a] == a ? a : parent[a] = find(parent[a]);
    };
    for (std::size_t i = 0; i < n; ++i)
        if (core[i])
            for (std::size_t j : nb[i])
                if (core[j]) parent[find(i)] = find(j);
    std::vector<int> label(n, -1);
    std::map<std::size_t, int> id_of_root;
    std::vector<std::size_t> border_root(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        std::size_t best_root = n, best_first = n;
        for (std::size_t j : nb[i]) {
            if (!core[j]) continue;
            const std::size_t r = find(j);
            std::size_t first = n;
            for (std::size_t t = 0; t < n; ++t)
                if (core[t] && find(t) == r) {
                    first = t;
                    break;
                }
            if (first < best_first) {
                best_first = first;
                best_root = r;
            }
        }
        border_root[i] = best_root;
    }
    std::map<std::size_t, std::size_t> first_core;
    for (std::size_t i = 0; i < n; ++i)
        if (core[i] && !first_core.count(find(i))) first_core[find(i)] = i;
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (auto [root, first] : first_core) order.push_back({first, root});
    std::sort(order.begin(), order.end());
    for (std::size_t c = 0; c < order.size(); ++c) id_of_root[order[c].second] = static_cast<int>(c);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) label[i] = id_of_root[find(i)];
        else if (border_root[i] < n) label[i] = id_of_root[border_root[i]];
    }
    return label;
}

}  // namespace oracle
