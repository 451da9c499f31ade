#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/matrix.hpp"
#include "divrank/params.hpp"
#include "divrank/reencoder.hpp"
#include "divrank/rng.hpp"
#include "divrank/scl.hpp"
#include "divrank/transformer.hpp"

namespace divrank {

struct AugmentationConfig;

/// Classes 0..M−1 are the global categories (in bank order), M is
/// IRRELEVANT and M+1 is QUERY.
class LabelSpace {
public:
    LabelSpace() = default;
    explicit LabelSpace(std::vector<int> category_ids);
    static LabelSpace from_bank(const PrototypeBank& bank) { return LabelSpace(bank.category_ids); }

    int num_categories() const noexcept { return static_cast<int>(category_ids_.size()); }
    int num_classes() const noexcept { return num_categories() + 2; }
    int irrelevant() const noexcept { return num_categories(); }
    int query() const noexcept { return num_categories() + 1; }
    bool is_category(int cls) const noexcept { return cls >= 0 && cls < num_categories(); }

    int class_of(int category_id) const;
    int category_of(int cls) const;
    const std::vector<int>& category_ids() const noexcept { return category_ids_; }

    bool operator==(const LabelSpace& o) const { return category_ids_ == o.category_ids_; }

private:
    std::vector<int> category_ids_;
    std::unordered_map<int, int> class_of_;
};

inline constexpr ImageId kPadId = -1;

/// Row 0 is the query; rows 1..N are images in non-increasing cosine
/// similarity to the query, zero-padded to N.
struct TokenSequence {
    Matrix tokens;
    std::vector<ImageId> image_ids;  // N entries, kPadId for padding
    Vec similarities;                // N entries, -inf for padding
    std::vector<int> labels;         // N+1 entries in training mode, else empty

    std::size_t budget() const noexcept { return image_ids.size(); }
    bool is_pad(std::size_t i) const { return image_ids[i] == kPadId; }
};

/// Keeps the N candidates most similar to the query (ties: lower id first).
/// With `label_space` and `truth` the sequence is labeled: QUERY for row 0,
/// the category class for images in `truth`, IRRELEVANT otherwise.
TokenSequence build_sequence(std::span<const double> query, std::span<const ImageId> ids, const Matrix& features,
                             std::size_t budget, const LabelSpace* label_space = nullptr,
                             const CategoryMap* truth = nullptr);

struct TokenClassifierModel {
    TransformerConfig transformer;
    std::size_t sequence_budget = 200;
    LabelSpace labels;
    ParamStore params;  // transformer layers + "head.w" (d×C), "head.b"

    static TokenClassifierModel create(const TransformerConfig& cfg, LabelSpace labels, std::size_t budget,
                                       RngStream& rng);
};

struct ClassifierCache {
    TransformerCache encoder;
    Matrix encoded;
};

Matrix classify_logits(const TokenSequence& seq, const TokenClassifierModel& m, ClassifierCache* cache = nullptr);
Matrix classify_tokens(const TokenSequence& seq, const TokenClassifierModel& m);

/// Σ_i −log p_i[y_i] over all N+1 tokens.
double ttc_loss(const Matrix& probs, std::span<const int> labels);

struct TokenLoss {
    double loss = 0.0;
    Matrix grad_logits;
};
TokenLoss ttc_loss_from_logits(const Matrix& logits, std::span<const int> labels);

/// Accumulates parameter gradients for d loss / d logits.
void classifier_backward(const Matrix& grad_logits, TokenClassifierModel& m, const ClassifierCache& cache);

struct TtcTrainConfig {
    double lr = 1e-4;
    int batch = 32;
    int epochs = 1;
    long max_steps = 0;
    std::uint64_t seed = 0;
};

struct TtcTrainReport {
    std::vector<double> loss_history;
    long steps = 0;
};

/// Labeled sequences for every query of `corpus` with at least one
/// candidate, image features passed through the re-encoder.
std::vector<TokenSequence> build_training_sequences(const EmbeddingCorpus& corpus, const ReEncoderModel& reencoder,
                                                    const LabelSpace& labels, std::size_t budget);

TtcTrainReport train_ttc(const EmbeddingCorpus& train, const ReEncoderModel& reencoder, TokenClassifierModel& model,
                         const AugmentationConfig& aug, const TtcTrainConfig& cfg);

/// Fraction of image tokens (padding excluded) whose argmax equals the label.
double token_accuracy(const TokenClassifierModel& m, const std::vector<TokenSequence>& seqs);

std::size_t argmax_row(const Matrix& m, std::size_t row);

}  // namespace divrank
