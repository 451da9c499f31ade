#include "divrank/scl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "divrank/error.hpp"
#include "divrank/params.hpp"
#include "divrank/rng.hpp"

namespace divrank {

void PrototypeBank::reindex() {
    rows_.clear();
    for (std::size_t i = 0; i < category_ids.size(); ++i)
        require(rows_.emplace(category_ids[i], i).second,
                "prototype bank: duplicate category " + std::to_string(category_ids[i]));
}

std::size_t PrototypeBank::row_of(int category) const {
    auto it = rows_.find(category);
    require(it != rows_.end(), "prototype bank: unknown category " + std::to_string(category));
    return it->second;
}

PrototypeBank init_bank(const std::vector<CategoryDescriptor>& descriptors) {
    require(!descriptors.empty(), "init_bank: no descriptors");
    const std::size_t d = descriptors.front().feature.size();
    PrototypeBank bank;
    bank.prototypes = Matrix(descriptors.size(), d);
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        require(descriptors[i].feature.size() == d, "init_bank: descriptor dim mismatch");
        std::copy(descriptors[i].feature.begin(), descriptors[i].feature.end(), bank.prototypes.row(i).begin());
        bank.category_ids.push_back(descriptors[i].category_id);
    }
    bank.reindex();
    return bank;
}

CategoryMap CategoryMap::from_corpus(const EmbeddingCorpus& corpus) {
    CategoryMap m;
    for (const auto& img : corpus.images)
        if (img.relevant) m.set(img.image_id, img.category);
    return m;
}

void CategoryMap::set(ImageId id, int category) {
    require(category != kIrrelevant, "CategoryMap: cannot map to IRRELEVANT");
    map_[id] = category;
}

int CategoryMap::at(ImageId id) const {
    auto it = map_.find(id);
    require(it != map_.end(), "CategoryMap: no category for image " + std::to_string(id));
    return it->second;
}

namespace {

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace

SclLoss scl_loss(const SclBatch& batch, const PrototypeBank& bank, const CategoryMap& categories, SclPairs pairs) {
    const std::size_t nr = batch.relevant.rows(), ni = batch.irrelevant.rows();
    const std::size_t d = batch.query.size();
    require(nr > 0, "scl_loss: empty relevant set");
    require(batch.tau > 0.0, "scl_loss: tau must be > 0");
    require(batch.relevant_ids.size() == nr, "scl_loss: relevant ids do not match features");
    require(batch.relevant.cols() == d && (ni == 0 || batch.irrelevant.cols() == d) && bank.prototypes.cols() == d,
            "scl_loss: feature dims disagree");
    const double inv_tau = 1.0 / batch.tau;

    std::vector<std::size_t> proto_row(nr);
    for (std::size_t i = 0; i < nr; ++i) proto_row[i] = bank.row_of(categories.at(batch.relevant_ids[i]));

    // Numerator logits: families (1) then (2).
    Vec num;
    num.reserve(2 * nr);
    for (std::size_t i = 0; i < nr; ++i) num.push_back(dot(batch.query, batch.relevant.row(i)) * inv_tau);
    if (pairs.prototype_relevant)
        for (std::size_t i = 0; i < nr; ++i)
            num.push_back(dot(bank.prototypes.row(proto_row[i]), batch.relevant.row(i)) * inv_tau);

    // Negative-only logits: family (3), then (4) as an ni×M block.
    Vec neg3(ni);
    for (std::size_t j = 0; j < ni; ++j) neg3[j] = dot(batch.query, batch.irrelevant.row(j)) * inv_tau;
    Matrix neg4;
    if (pairs.prototype_irrelevant && ni > 0) {
        neg4 = matmul_nt(batch.irrelevant, bank.prototypes);
        for (double& v : neg4.flat()) v *= inv_tau;
    }

    Vec all = num;
    all.insert(all.end(), neg3.begin(), neg3.end());
    all.insert(all.end(), neg4.flat().begin(), neg4.flat().end());
    const double lse_all = log_sum_exp(all);
    const double lse_num = log_sum_exp(num);

    SclLoss out;
    out.loss = lse_all - lse_num;
    if (!std::isfinite(out.loss)) throw DivergenceError("scl_loss: non-finite loss");

    out.grad_relevant = Matrix(nr, d);
    for (std::size_t i = 0; i < nr; ++i) {
        auto g = out.grad_relevant.row(i);
        const double c1 = (std::exp(num[i] - lse_all) - std::exp(num[i] - lse_num)) * inv_tau;
        for (std::size_t c = 0; c < d; ++c) g[c] += c1 * batch.query[c];
        if (pairs.prototype_relevant) {
            const double a2 = num[nr + i];
            const double c2 = (std::exp(a2 - lse_all) - std::exp(a2 - lse_num)) * inv_tau;
            auto b = bank.prototypes.row(proto_row[i]);
            for (std::size_t c = 0; c < d; ++c) g[c] += c2 * b[c];
        }
    }
    out.grad_irrelevant = Matrix(ni, d);
    for (std::size_t j = 0; j < ni; ++j) {
        auto g = out.grad_irrelevant.row(j);
        const double c3 = std::exp(neg3[j] - lse_all) * inv_tau;
        for (std::size_t c = 0; c < d; ++c) g[c] += c3 * batch.query[c];
        if (!neg4.empty()) {
            for (std::size_t m = 0; m < bank.size(); ++m) {
                const double c4 = std::exp(neg4(j, m) - lse_all) * inv_tau;
                auto b = bank.prototypes.row(m);
                for (std::size_t c = 0; c < d; ++c) g[c] += c4 * b[c];
            }
        }
    }
    return out;
}

void ema_update(PrototypeBank& bank, const Matrix& features, std::span<const int> categories, double alpha,
                bool swap_convention) {
    require(alpha >= 0.0 && alpha <= 1.0, "ema_update: alpha must be in [0, 1]");
    require(features.rows() == categories.size(), "ema_update: one category per feature row");
    require(features.rows() == 0 || features.cols() == bank.prototypes.cols(), "ema_update: dim mismatch");
    const double keep = swap_convention ? 1.0 - alpha : alpha;
    const double take = 1.0 - keep;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto b = bank.prototypes.row(bank.row_of(categories[i]));
        auto f = features.row(i);
        for (std::size_t c = 0; c < b.size(); ++c) b[c] = keep * b[c] + take * f[c];
    }
}

SclTrainReport train_reencoder(const EmbeddingCorpus& train, ReEncoderModel& model, PrototypeBank& bank,
                               const SclTrainConfig& cfg) {
    if (cfg.tau <= 0.0) throw ConfigError("scl: tau must be > 0");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("scl: alpha must be in [0, 1]");
    if (cfg.batch < 1) throw ConfigError("scl: batch must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("scl: epochs must be >= 0");

    const CategoryMap categories = CategoryMap::from_corpus(train);
    RngStream order_rng(cfg.seed, "scl.order");
    RngStream sample_rng(cfg.seed, "scl.irrelevant");
    Adam adam(model.params, AdamConfig{.lr = cfg.lr});
    SclTrainReport report;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < train.queries.size(); ++i) {
        const auto& q = train.queries[i];
        if (std::any_of(q.candidate_ids.begin(), q.candidate_ids.end(),
                        [&](ImageId id) { return train.image(id).relevant; }))
            order.push_back(i);
    }
    if (order.empty() || cfg.epochs == 0) return report;

    const std::size_t d = train.dim;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            if (cfg.max_steps > 0 && report.steps >= cfg.max_steps) return report;
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            model.params.zero_grad();

            std::vector<Matrix> ema_features;
            std::vector<std::vector<int>> ema_categories;
            double loss_sum = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const auto& q = train.queries[order[s]];
                std::vector<ImageId> rel, irr;
                for (ImageId id : q.candidate_ids) (train.image(id).relevant ? rel : irr).push_back(id);
                sample_rng.shuffle(irr);
                if (irr.size() > static_cast<std::size_t>(cfg.irrelevant_cap))
                    irr.resize(static_cast<std::size_t>(cfg.irrelevant_cap));

                Matrix raw(rel.size() + irr.size(), d);
                std::size_t r = 0;
                for (ImageId id : rel) std::copy_n(train.image(id).feature.begin(), d, raw.row(r++).begin());
                for (ImageId id : irr) std::copy_n(train.image(id).feature.begin(), d, raw.row(r++).begin());
                ReEncoderCache cache;
                const Matrix enc = reencode_batch(raw, model, &cache);

                SclBatch batch;
                batch.query = q.feature;
                batch.tau = cfg.tau;
                batch.relevant_ids = rel;
                batch.relevant = Matrix(rel.size(), d);
                batch.irrelevant = Matrix(irr.size(), d);
                for (std::size_t i = 0; i < rel.size(); ++i)
                    std::copy_n(enc.row(i).begin(), d, batch.relevant.row(i).begin());
                for (std::size_t j = 0; j < irr.size(); ++j)
                    std::copy_n(enc.row(rel.size() + j).begin(), d, batch.irrelevant.row(j).begin());

                const SclLoss loss = scl_loss(batch, bank, categories, cfg.pairs);
                loss_sum += loss.loss;

                Matrix d_out(enc.rows(), d);
                for (std::size_t i = 0; i < rel.size(); ++i)
                    for (std::size_t c = 0; c < d; ++c) d_out(i, c) = loss.grad_relevant(i, c) * inv_batch;
                for (std::size_t j = 0; j < irr.size(); ++j)
                    for (std::size_t c = 0; c < d; ++c) d_out(rel.size() + j, c) = loss.grad_irrelevant(j, c) * inv_batch;
                reencode_backward(d_out, model, cache);

                std::vector<int> cats;
                for (ImageId id : rel) cats.push_back(categories.at(id));
                ema_features.push_back(std::move(batch.relevant));
                ema_categories.push_back(std::move(cats));
            }
            adam.step(model.params);
            if (!model.params.all_finite())
                throw DivergenceError("scl: non-finite re-encoder parameters at step " + std::to_string(report.steps));
            for (std::size_t i = 0; i < ema_features.size(); ++i)
                ema_update(bank, ema_features[i], ema_categories[i], cfg.alpha, cfg.ema_swap_convention);
            report.loss_history.push_back(loss_sum * inv_batch);
            ++report.steps;
        }
    }
    return report;
}

}  // namespace divrank
