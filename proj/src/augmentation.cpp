#include "divrank/augmentation.hpp"

#include <algorithm>
#include <limits>

#include "divrank/error.hpp"

namespace divrank {

void AugmentationConfig::validate() const {
    for (double p : {p_q, p_v, p_d, p_c})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation: probabilities must lie in [0, 1]");
}

namespace {

Vec mix(std::span<const double> keep, std::span<const double> other, double lambda) {
    require(keep.size() == other.size(), "mixup: dim mismatch");
    require(lambda >= 0.0 && lambda <= 1.0, "mixup: lambda must be in [0, 1]");
    const double hi = std::max(lambda, 1.0 - lambda);
    const double lo = std::min(lambda, 1.0 - lambda);
    Vec out(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) out[i] = hi * keep[i] + lo * other[i];
    return out;
}

struct Row {
    Vec feature;
    ImageId id = kPadId;
    double sim = -std::numeric_limits<double>::infinity();
    int label = 0;

    bool pad() const { return id == kPadId; }
};

}  // namespace

Vec perturb_query(std::span<const double> query, std::span<const double> relevant, double lambda) {
    return mix(query, relevant, lambda);
}

Vec perturb_image(std::span<const double> image, std::span<const double> query, double lambda) {
    return mix(image, query, lambda);
}

TokenSequence augment_sequence(const TokenSequence& seq, const LabelSpace& labels, const AugmentationConfig& cfg,
                               RngStream& rng, AugmentationStats* stats) {
    require(seq.labels.size() == seq.tokens.rows(), "augment_sequence: sequence has no training labels");
    if (!cfg.enabled) return seq;
    cfg.validate();
    AugmentationStats local;
    AugmentationStats& st = stats ? *stats : local;

    const std::size_t budget = seq.budget(), d = seq.tokens.cols();
    Vec query(seq.tokens.row(0).begin(), seq.tokens.row(0).end());
    std::vector<Row> rows;
    rows.reserve(budget);
    for (std::size_t i = 0; i < budget; ++i) {
        if (seq.is_pad(i)) continue;
        rows.push_back(Row{Vec(seq.tokens.row(i + 1).begin(), seq.tokens.row(i + 1).end()), seq.image_ids[i],
                           seq.similarities[i], seq.labels[i + 1]});
    }

    // (1) query perturbation
    ++st.query_trials;
    if (rng.bernoulli(cfg.p_q)) {
        ++st.query_hits;
        std::vector<std::size_t> relevant;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (labels.is_category(rows[i].label)) relevant.push_back(i);
        if (!relevant.empty()) {
            const std::size_t pick = relevant[rng.uniform_index(relevant.size())];
            query = perturb_query(query, rows[pick].feature, rng.uniform());
        }
    }

    // (2) deletion
    for (auto& r : rows) {
        ++st.delete_trials;
        if (rng.bernoulli(cfg.p_d)) {
            ++st.delete_hits;
            r = Row{Vec(d, 0.0), kPadId, -std::numeric_limits<double>::infinity(), labels.irrelevant()};
        }
    }

    // (3) copy
    std::vector<Row> copied;
    copied.reserve(rows.size() * 2);
    for (auto& r : rows) {
        if (r.pad()) continue;
        ++st.copy_trials;
        const bool dup = rng.bernoulli(cfg.p_c);
        copied.push_back(r);
        if (dup) {
            ++st.copy_hits;
            copied.push_back(r);
        }
    }

    // (4) image perturbation
    for (auto& r : copied) {
        if (!labels.is_category(r.label)) continue;
        ++st.perturb_trials;
        if (rng.bernoulli(cfg.p_v)) {
            ++st.perturb_hits;
            r.feature = perturb_image(r.feature, query, rng.uniform());
        }
    }

    TokenSequence out;
    out.tokens = Matrix(budget + 1, d);
    std::copy(query.begin(), query.end(), out.tokens.row(0).begin());
    out.image_ids.assign(budget, kPadId);
    out.similarities.assign(budget, -std::numeric_limits<double>::infinity());
    out.labels.assign(budget + 1, labels.irrelevant());
    out.labels[0] = seq.labels[0];
    const std::size_t keep = std::min(budget, copied.size());
    for (std::size_t i = 0; i < keep; ++i) {
        std::copy(copied[i].feature.begin(), copied[i].feature.end(), out.tokens.row(i + 1).begin());
        out.image_ids[i] = copied[i].id;
        out.similarities[i] = copied[i].sim;
        out.labels[i + 1] = copied[i].label;
    }
    return out;
}

}  // namespace divrank
