#include "divrank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "divrank/error.hpp"
#include "divrank/rng.hpp"

namespace divrank {

namespace {

Vec random_unit(std::size_t d, RngStream& rng) {
    Vec v(d);
    for (double& x : v) x = rng.normal();
    normalize_inplace(v);
    return v;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (mean_categories < 2.0) throw ConfigError("generator: mean categories per query must be >= 2");
    if (!(sigma > 0.0)) throw ConfigError("generator: sigma must be > 0");
    if (queries < 0 || test_queries < 0 || queries + test_queries < 1)
        throw ConfigError("generator: need at least one query");
    if (dim < 2) throw ConfigError("generator: dim must be >= 2");
    if (relevant_per_query < 2 && forced_sizes.empty())
        throw ConfigError("generator: relevant_per_query must be >= 2");
    if (irrelevant_per_query < 0) throw ConfigError("generator: irrelevant_per_query must be >= 0");
    if (zipf_s < 0.0) throw ConfigError("generator: zipf exponent must be >= 0");
    if (category_reuse <= 0.0) throw ConfigError("generator: category_reuse must be > 0");
    for (int s : forced_sizes)
        if (s < 1) throw ConfigError("generator: forced category sizes must be >= 1");
    if (!forced_sizes.empty() && forced_sizes.size() < 2)
        throw ConfigError("generator: forced sizes need at least two categories");
}

std::vector<int> zipf_sizes(int total, int count, double s) {
    require(count >= 1, "zipf_sizes: count must be >= 1");
    std::vector<double> w(static_cast<std::size_t>(count));
    for (int r = 0; r < count; ++r) w[static_cast<std::size_t>(r)] = std::pow(static_cast<double>(r + 1), -s);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<int> sizes(w.size());
    for (std::size_t r = 0; r < w.size(); ++r)
        sizes[r] = std::max(1, static_cast<int>(std::lround(total * w[r] / sum)));
    return sizes;
}

SyntheticCorpus generate_synthetic_detailed(const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto d = static_cast<std::size_t>(cfg.dim);
    const int n_queries = cfg.queries + cfg.test_queries;
    RngStream layout(seed, "synthetic.layout");

    std::vector<int> counts(static_cast<std::size_t>(n_queries));
    for (int& c : counts)
        c = cfg.forced_sizes.empty() ? std::max(2, layout.poisson(cfg.mean_categories))
                                     : static_cast<int>(cfg.forced_sizes.size());
    int global = cfg.global_categories;
    if (global <= 0) {
        const double slots = std::accumulate(counts.begin(), counts.end(), 0.0);
        global = std::max(*std::max_element(counts.begin(), counts.end()),
                          static_cast<int>(std::ceil(slots / cfg.category_reuse)));
    }
    for (int& c : counts) c = std::min(c, global);

    RngStream dirs(seed, "synthetic.categories");
    std::vector<Vec> directions;
    for (int c = 0; c < global; ++c) directions.push_back(random_unit(d, dirs));

    SyntheticCorpus out;
    EmbeddingCorpus& corpus = out.corpus;
    corpus.dim = d;
    corpus.split = "all";

    for (int c = 0; c < global; ++c) {
        Vec f = directions[static_cast<std::size_t>(c)];
        for (double& x : f) x += 0.25 * cfg.sigma * dirs.normal();
        canonicalize_feature(f);
        corpus.descriptors.push_back({c, std::move(f)});
    }

    ImageId next_image = 0;
    for (int qi = 0; qi < n_queries; ++qi) {
        RngStream rng(seed, "synthetic.query/" + std::to_string(qi));
        const auto n_cat = static_cast<std::size_t>(counts[static_cast<std::size_t>(qi)]);

        std::vector<int> pool(static_cast<std::size_t>(global));
        std::iota(pool.begin(), pool.end(), 0);
        rng.shuffle(pool);
        std::vector<int> cats(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_cat));

        const std::vector<int> sizes = cfg.forced_sizes.empty()
                                           ? zipf_sizes(cfg.relevant_per_query, static_cast<int>(n_cat), cfg.zipf_s)
                                           : cfg.forced_sizes;

        const Vec topic = random_unit(d, rng);
        QueryRecord q;
        q.query_id = qi;
        q.split = qi < cfg.queries ? "train" : "test";
        q.gt_categories = cats;
        q.feature.assign(d, 0.0);

        const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
        std::vector<ImageRecord> imgs;
        for (std::size_t r = 0; r < n_cat; ++r) {
            const auto& u = directions[static_cast<std::size_t>(cats[r])];
            Vec raw(d);
            for (std::size_t i = 0; i < d; ++i) raw[i] = topic[i] + cfg.category_spread * u[i];
            normalize_inplace(raw);
            Vec proto = raw;
            canonicalize_feature(proto);
            for (std::size_t i = 0; i < d; ++i) q.feature[i] += (sizes[r] / total) * proto[i];
            out.prototypes[{q.query_id, cats[r]}] = proto;
            for (int k = 0; k < sizes[r]; ++k) {
                ImageRecord img;
                img.image_id = next_image++;
                img.query_id = q.query_id;
                img.category = cats[r];
                img.relevant = true;
                img.feature = raw;
                for (double& x : img.feature) x += cfg.sigma * rng.normal();
                canonicalize_feature(img.feature);
                imgs.push_back(std::move(img));
            }
        }
        for (int k = 0; k < cfg.irrelevant_per_query; ++k) {
            ImageRecord img;
            img.image_id = next_image++;
            img.query_id = q.query_id;
            img.feature.resize(d);
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            for (std::size_t i = 0; i < d; ++i) img.feature[i] = cfg.irrelevant_affinity * topic[i] + scale * rng.normal();
            canonicalize_feature(img.feature);
            imgs.push_back(std::move(img));
        }
        canonicalize_feature(q.feature);
        for (const auto& img : imgs) q.candidate_ids.push_back(img.image_id);
        rng.shuffle(q.candidate_ids);
        corpus.queries.push_back(std::move(q));
        for (auto& img : imgs) corpus.images.push_back(std::move(img));
    }
    corpus.reindex();
    return out;
}

EmbeddingCorpus generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
    return generate_synthetic_detailed(cfg, seed).corpus;
}

}  // namespace divrank
