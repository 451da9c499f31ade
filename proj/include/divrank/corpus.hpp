#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divrank/matrix.hpp"

namespace divrank {

using ImageId = std::int64_t;
using QueryId = std::int64_t;

// Category value of images that are not relevant to their query.
constexpr int kIrrelevant = -1;

struct ImageRecord {
    ImageId image_id = 0;
    QueryId query_id = 0;
    Vec feature;
    int category = kIrrelevant;
    bool relevant = false;

    bool operator==(const ImageRecord&) const = default;
};

struct QueryRecord {
    QueryId query_id = 0;
    Vec feature;
    std::vector<int> gt_categories;
    std::vector<ImageId> candidate_ids;
    std::string split = "train";

    bool operator==(const QueryRecord&) const = default;
};

// Feature of a category's fine-grained textual description; seeds the
// prototype bank.
struct CategoryDescriptor {
    int category_id = 0;
    Vec feature;

    bool operator==(const CategoryDescriptor&) const = default;
};

class EmbeddingCorpus {
public:
    std::size_t dim = 0;
    std::vector<QueryRecord> queries;
    std::vector<ImageRecord> images;
    std::vector<CategoryDescriptor> descriptors;
    std::string split = "all";

    // Rebuilds id lookups; call after mutating the vectors.
    void reindex();
    // Throws ContractViolation describing the first broken invariant.
    void validate() const;

    const ImageRecord& image(ImageId id) const;
    const QueryRecord& query(QueryId id) const;
    bool has_image(ImageId id) const { return image_index_.count(id) != 0; }
    bool has_query(QueryId id) const { return query_index_.count(id) != 0; }

    // Queries (and their candidate images) tagged `split`; descriptors are
    // kept whole since category ids are global.
    EmbeddingCorpus subset(const std::string& split_tag) const;

    // Candidate features of one query, rows in candidate_ids order.
    Matrix candidate_features(const QueryRecord& q) const;

    bool operator==(const EmbeddingCorpus& o) const {
        return dim == o.dim && queries == o.queries && images == o.images && descriptors == o.descriptors &&
               split == o.split;
    }

private:
    std::unordered_map<ImageId, std::size_t> image_index_;
    std::unordered_map<QueryId, std::size_t> query_index_;
};

/// dot(a,b) / (‖a‖‖b‖). Throws ContractViolation for a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

void normalize_inplace(std::span<double> v);

/// Unit-normalizes `v` so that it survives a float32 store/load round trip:
/// after the call, normalize(double(float(v))) == v bit for bit.
void canonicalize_feature(std::span<double> v);

}  // namespace divrank
