#include "divrank/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "divrank/error.hpp"

namespace divrank {

void EmbeddingCorpus::reindex() {
    image_index_.clear();
    query_index_.clear();
    for (std::size_t i = 0; i < images.size(); ++i) {
        require(image_index_.emplace(images[i].image_id, i).second,
                "corpus: duplicate image id " + std::to_string(images[i].image_id));
    }
    for (std::size_t i = 0; i < queries.size(); ++i) {
        require(query_index_.emplace(queries[i].query_id, i).second,
                "corpus: duplicate query id " + std::to_string(queries[i].query_id));
    }
}

const ImageRecord& EmbeddingCorpus::image(ImageId id) const {
    auto it = image_index_.find(id);
    require(it != image_index_.end(), "corpus: unknown image id " + std::to_string(id));
    return images[it->second];
}

const QueryRecord& EmbeddingCorpus::query(QueryId id) const {
    auto it = query_index_.find(id);
    require(it != query_index_.end(), "corpus: unknown query id " + std::to_string(id));
    return queries[it->second];
}

void EmbeddingCorpus::validate() const {
    auto check_feature = [this](const Vec& f, const std::string& what) {
        require(f.size() == dim, what + ": feature dim mismatch");
        for (double v : f) require(std::isfinite(v), what + ": non-finite feature");
        require(std::abs(norm2(f) - 1.0) <= 1e-9, what + ": feature is not unit norm");
    };
    require(image_index_.size() == images.size() && query_index_.size() == queries.size(),
            "corpus: index out of date (call reindex)");

    std::unordered_set<int> categories;
    for (const auto& d : descriptors) {
        require(categories.insert(d.category_id).second,
                "corpus: duplicate descriptor for category " + std::to_string(d.category_id));
        check_feature(d.feature, "descriptor " + std::to_string(d.category_id));
    }
    for (const auto& img : images) {
        check_feature(img.feature, "image " + std::to_string(img.image_id));
        require(img.relevant == (img.category != kIrrelevant),
                "image " + std::to_string(img.image_id) + ": relevant flag disagrees with category");
        require(has_query(img.query_id), "image " + std::to_string(img.image_id) + ": unknown query");
        if (img.relevant)
            require(categories.count(img.category) != 0,
                    "image " + std::to_string(img.image_id) + ": category has no descriptor");
    }
    for (const auto& q : queries) {
        const std::string what = "query " + std::to_string(q.query_id);
        check_feature(q.feature, what);
        require(!q.gt_categories.empty(), what + ": empty ground-truth categories");
        const std::set<int> gt(q.gt_categories.begin(), q.gt_categories.end());
        for (ImageId id : q.candidate_ids) {
            require(has_image(id), what + ": unknown candidate " + std::to_string(id));
            const auto& img = image(id);
            if (img.relevant) require(gt.count(img.category) != 0, what + ": relevant candidate outside gt categories");
        }
    }
}

EmbeddingCorpus EmbeddingCorpus::subset(const std::string& split_tag) const {
    EmbeddingCorpus out;
    out.dim = dim;
    out.split = split_tag;
    out.descriptors = descriptors;
    std::unordered_set<QueryId> keep;
    for (const auto& q : queries) {
        if (q.split == split_tag) {
            out.queries.push_back(q);
            keep.insert(q.query_id);
        }
    }
    for (const auto& img : images)
        if (keep.count(img.query_id)) out.images.push_back(img);
    out.reindex();
    return out;
}

Matrix EmbeddingCorpus::candidate_features(const QueryRecord& q) const {
    Matrix m(q.candidate_ids.size(), dim);
    for (std::size_t i = 0; i < q.candidate_ids.size(); ++i) {
        const auto& f = image(q.candidate_ids[i]).feature;
        std::copy(f.begin(), f.end(), m.row(i).begin());
    }
    return m;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "cosine_similarity: length mismatch");
    const double na = norm2(a), nb = norm2(b);
    require(na > 0.0 && nb > 0.0, "cosine_similarity: zero vector");
    return dot(a, b) / (na * nb);
}

void normalize_inplace(std::span<double> v) {
    const double n = norm2(v);
    require(n > 0.0, "normalize: zero vector");
    for (double& x : v) x /= n;
}

void canonicalize_feature(std::span<double> v) {
    normalize_inplace(v);
    std::vector<float> stored(v.size());
    for (int iter = 0; iter < 16; ++iter) {
        bool fixed = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const float f = static_cast<float>(v[i]);
            if (iter > 0 && f != stored[i]) fixed = false;
            stored[i] = f;
        }
        if (iter > 0 && fixed) return;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(stored[i]);
        normalize_inplace(v);
    }
    throw ContractViolation("canonicalize_feature: float32 round trip did not reach a fixed point");
}

}  // namespace divrank
