#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "divrank/corpus.hpp"
#include "divrank/matrix.hpp"
#include "divrank/reencoder.hpp"

namespace divrank {

/// One prototype row per global semantic category. Row order is fixed at
/// construction and never changes.
class PrototypeBank {
public:
    Matrix prototypes;
    std::vector<int> category_ids;

    void reindex();
    std::size_t size() const noexcept { return category_ids.size(); }
    bool has(int category) const { return rows_.count(category) != 0; }
    std::size_t row_of(int category) const;

    bool operator==(const PrototypeBank& o) const {
        return prototypes == o.prototypes && category_ids == o.category_ids;
    }

private:
    std::unordered_map<int, std::size_t> rows_;
};

PrototypeBank init_bank(const std::vector<CategoryDescriptor>& descriptors);

/// image id → global category, defined for relevant training images only.
class CategoryMap {
public:
    static CategoryMap from_corpus(const EmbeddingCorpus& corpus);

    void set(ImageId id, int category);
    int at(ImageId id) const;
    bool contains(ImageId id) const { return map_.count(id) != 0; }
    std::size_t size() const noexcept { return map_.size(); }

private:
    std::unordered_map<ImageId, int> map_;
};

// The four pair families of the loss: (1) query–relevant, (2) prototype–
// relevant, (3) query–irrelevant, (4) every prototype–irrelevant. Families
// (2) and (4) can be switched off for ablations.
struct SclPairs {
    bool prototype_relevant = true;
    bool prototype_irrelevant = true;
};

struct SclBatch {
    Vec query;
    Matrix relevant;                  // re-encoded relevant features, one per row
    std::vector<ImageId> relevant_ids;
    Matrix irrelevant;                // re-encoded irrelevant features (may have 0 rows)
    double tau = 0.2;
};

struct SclLoss {
    double loss = 0.0;
    Matrix grad_relevant;
    Matrix grad_irrelevant;
};

/// −log[(S1+S2) / (S3+S4+S1+S2)] over plain inner products scaled by 1/τ,
/// evaluated with log-sum-exp. Gradients flow to the batch features only;
/// the query and the bank are constants.
SclLoss scl_loss(const SclBatch& batch, const PrototypeBank& bank, const CategoryMap& categories,
                 SclPairs pairs = {});

/// B(c) ← α·B(c) + (1−α)·f for each (f, c), sequentially in row order.
/// `swap_convention` exchanges the weights (B ← (1−α)·B + α·f).
void ema_update(PrototypeBank& bank, const Matrix& features, std::span<const int> categories, double alpha,
                bool swap_convention = false);

struct SclTrainConfig {
    double tau = 0.2;
    double alpha = 0.01;
    double lr = 1e-5;
    int batch = 32;           // queries per optimizer step
    int epochs = 1;
    long max_steps = 0;       // 0: no cap
    int irrelevant_cap = 64;  // irrelevant candidates sampled per query
    SclPairs pairs;
    bool ema_swap_convention = false;
    double epsilon = 0.01;    // reserved; no effect
    std::uint64_t seed = 0;
};

struct SclTrainReport {
    std::vector<double> loss_history;  // mean loss per optimizer step
    long steps = 0;
};

/// Trains g by Adam on the contrastive loss, then moves the bank by EMA
/// using the features computed before the step. Mutates model and bank.
SclTrainReport train_reencoder(const EmbeddingCorpus& train, ReEncoderModel& model, PrototypeBank& bank,
                               const SclTrainConfig& cfg);

}  // namespace divrank
