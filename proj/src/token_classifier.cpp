#include "divrank/token_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "divrank/augmentation.hpp"
#include "divrank/error.hpp"
#include "divrank/kernels.hpp"
#include "divrank/layers.hpp"

namespace divrank {

LabelSpace::LabelSpace(std::vector<int> category_ids) : category_ids_(std::move(category_ids)) {
    for (std::size_t i = 0; i < category_ids_.size(); ++i)
        require(class_of_.emplace(category_ids_[i], static_cast<int>(i)).second,
                "LabelSpace: duplicate category " + std::to_string(category_ids_[i]));
}

int LabelSpace::class_of(int category_id) const {
    auto it = class_of_.find(category_id);
    require(it != class_of_.end(), "LabelSpace: unknown category " + std::to_string(category_id));
    return it->second;
}

int LabelSpace::category_of(int cls) const {
    require(is_category(cls), "LabelSpace: class " + std::to_string(cls) + " is not a category");
    return category_ids_[static_cast<std::size_t>(cls)];
}

TokenSequence build_sequence(std::span<const double> query, std::span<const ImageId> ids, const Matrix& features,
                             std::size_t budget, const LabelSpace* label_space, const CategoryMap* truth) {
    require(!ids.empty(), "build_sequence: no candidates");
    require(ids.size() == features.rows(), "build_sequence: ids do not match features");
    require(features.cols() == query.size(), "build_sequence: dim mismatch");
    require(budget >= 1, "build_sequence: budget must be >= 1");
    require((label_space == nullptr) == (truth == nullptr), "build_sequence: labels need both label space and truth");
    const std::size_t d = query.size();

    Vec sims(ids.size());
    kernels::cosine_rows_serial(features.data(), ids.size(), d, query, sims.data());
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return ids[a] < ids[b];
    });
    const std::size_t take = std::min(budget, ids.size());

    TokenSequence seq;
    seq.tokens = Matrix(budget + 1, d);
    std::copy(query.begin(), query.end(), seq.tokens.row(0).begin());
    seq.image_ids.assign(budget, kPadId);
    seq.similarities.assign(budget, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t src = order[i];
        std::copy_n(features.row(src).begin(), d, seq.tokens.row(i + 1).begin());
        seq.image_ids[i] = ids[src];
        seq.similarities[i] = sims[src];
    }
    if (label_space) {
        seq.labels.assign(budget + 1, label_space->irrelevant());
        seq.labels[0] = label_space->query();
        for (std::size_t i = 0; i < take; ++i)
            if (truth->contains(seq.image_ids[i]))
                seq.labels[i + 1] = label_space->class_of(truth->at(seq.image_ids[i]));
    }
    return seq;
}

TokenClassifierModel TokenClassifierModel::create(const TransformerConfig& cfg, LabelSpace labels,
                                                  std::size_t budget, RngStream& rng) {
    cfg.validate();
    if (budget < 1) throw ConfigError("token classifier: sequence budget must be >= 1");
    if (labels.num_categories() < 1) throw ConfigError("token classifier: empty label space");
    TokenClassifierModel m;
    m.transformer = cfg;
    m.sequence_budget = budget;
    m.labels = std::move(labels);
    init_transformer_params(m.params, cfg, rng);
    const auto d = static_cast<std::size_t>(cfg.dim);
    const auto c = static_cast<std::size_t>(m.labels.num_classes());
    Matrix w(d, c);
    for (double& v : w.flat()) v = rng.normal() / std::sqrt(static_cast<double>(d));
    m.params.add("head.w", std::move(w));
    m.params.add("head.b", Matrix(1, c));
    return m;
}

Matrix classify_logits(const TokenSequence& seq, const TokenClassifierModel& m, ClassifierCache* cache) {
    require(seq.tokens.cols() == static_cast<std::size_t>(m.transformer.dim),
            "classify_tokens: token dim does not match model");
    ClassifierCache local;
    ClassifierCache& c = cache ? *cache : local;
    c.encoded = transformer_encoder_forward(seq.tokens, m.params, m.transformer.layers, m.transformer.heads,
                                            cache ? &c.encoder : nullptr);
    return linear_forward(c.encoded, m.params.value("head.w"), m.params.value("head.b").flat());
}

Matrix classify_tokens(const TokenSequence& seq, const TokenClassifierModel& m) {
    Matrix p = classify_logits(seq, m);
    softmax_rows_inplace(p);
    return p;
}

double ttc_loss(const Matrix& probs, std::span<const int> labels) {
    require(labels.size() == probs.rows(), "ttc_loss: one label per token");
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < probs.cols(), "ttc_loss: label out of range");
        loss -= std::log(probs(i, static_cast<std::size_t>(labels[i])));
    }
    if (!std::isfinite(loss)) throw DivergenceError("ttc_loss: non-finite loss");
    return loss;
}

TokenLoss ttc_loss_from_logits(const Matrix& logits, std::span<const int> labels) {
    require(labels.size() == logits.rows(), "ttc_loss: one label per token");
    TokenLoss out;
    out.grad_logits = Matrix(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const CrossEntropy ce = softmax_cross_entropy(logits.row(i), labels[i]);
        out.loss += ce.loss;
        std::copy(ce.grad.begin(), ce.grad.end(), out.grad_logits.row(i).begin());
    }
    if (!std::isfinite(out.loss)) throw DivergenceError("ttc_loss: non-finite loss");
    return out;
}

void classifier_backward(const Matrix& grad_logits, TokenClassifierModel& m, const ClassifierCache& cache) {
    Matrix d_enc = linear_backward(cache.encoded, m.params.value("head.w"), grad_logits, m.params.grad("head.w"),
                                   m.params.grad("head.b").flat());
    transformer_encoder_backward(d_enc, m.params, cache.encoder);
}

std::vector<TokenSequence> build_training_sequences(const EmbeddingCorpus& corpus, const ReEncoderModel& reencoder,
                                                    const LabelSpace& labels, std::size_t budget) {
    const CategoryMap truth = CategoryMap::from_corpus(corpus);
    std::vector<TokenSequence> seqs;
    for (const auto& q : corpus.queries) {
        if (q.candidate_ids.empty()) continue;
        const Matrix enc = reencode_batch(corpus.candidate_features(q), reencoder);
        seqs.push_back(build_sequence(q.feature, q.candidate_ids, enc, budget, &labels, &truth));
    }
    return seqs;
}

TtcTrainReport train_ttc(const EmbeddingCorpus& train, const ReEncoderModel& reencoder, TokenClassifierModel& model,
                         const AugmentationConfig& aug, const TtcTrainConfig& cfg) {
    if (cfg.batch < 1) throw ConfigError("ttc: batch must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("ttc: epochs must be >= 0");
    aug.validate();
    TtcTrainReport report;
    if (cfg.epochs == 0) return report;

    const std::vector<TokenSequence> base =
        build_training_sequences(train, reencoder, model.labels, model.sequence_budget);
    if (base.empty()) return report;

    RngStream order_rng(cfg.seed, "ttc.order");
    RngStream aug_rng(cfg.seed, "ttc.augment");
    Adam adam(model.params, AdamConfig{.lr = cfg.lr});
    std::vector<std::size_t> order(base.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            if (cfg.max_steps > 0 && report.steps >= cfg.max_steps) return report;
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            model.params.zero_grad();
            double loss_sum = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const TokenSequence seq = augment_sequence(base[order[s]], model.labels, aug, aug_rng);
                ClassifierCache cache;
                const Matrix logits = classify_logits(seq, model, &cache);
                TokenLoss loss = ttc_loss_from_logits(logits, seq.labels);
                loss_sum += loss.loss;
                for (double& g : loss.grad_logits.flat()) g *= inv_batch;
                classifier_backward(loss.grad_logits, model, cache);
            }
            adam.step(model.params);
            if (!model.params.all_finite())
                throw DivergenceError("ttc: non-finite classifier parameters at step " + std::to_string(report.steps));
            report.loss_history.push_back(loss_sum * inv_batch);
            ++report.steps;
        }
    }
    return report;
}

std::size_t argmax_row(const Matrix& m, std::size_t row) {
    auto r = m.row(row);
    return static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
}

double token_accuracy(const TokenClassifierModel& m, const std::vector<TokenSequence>& seqs) {
    std::size_t hit = 0, total = 0;
    for (const auto& seq : seqs) {
        const Matrix logits = classify_logits(seq, m);
        for (std::size_t i = 0; i < seq.budget(); ++i) {
            if (seq.is_pad(i)) continue;
            ++total;
            if (static_cast<int>(argmax_row(logits, i + 1)) == seq.labels[i + 1]) ++hit;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace divrank
