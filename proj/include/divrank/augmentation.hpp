#pragma once

#include <span>

#include "divrank/matrix.hpp"
#include "divrank/rng.hpp"
#include "divrank/token_classifier.hpp"

namespace divrank {

struct AugmentationConfig {
    double p_q = 0.5;  // query perturbation, once per sequence
    double p_v = 0.2;  // image perturbation, per relevant token
    double p_d = 0.2;  // deletion, per image token
    double p_c = 0.2;  // copy, per surviving image token
    bool enabled = true;

    void validate() const;
};

/// max(λ,1−λ)·h_q + min(λ,1−λ)·ĥ: the query keeps the larger share.
Vec perturb_query(std::span<const double> query, std::span<const double> relevant, double lambda);
/// max(λ,1−λ)·ĥ + min(λ,1−λ)·h_q: the image keeps the larger share.
Vec perturb_image(std::span<const double> image, std::span<const double> query, double lambda);

// Coin-flip tallies, for checking empirical operation rates.
struct AugmentationStats {
    long query_trials = 0, query_hits = 0;
    long delete_trials = 0, delete_hits = 0;
    long copy_trials = 0, copy_hits = 0;
    long perturb_trials = 0, perturb_hits = 0;
};

/// Applies, in order: query perturbation, per-token deletion (token becomes
/// a zero pad labeled IRRELEVANT), per-token copy (inserted after its
/// source), per-relevant-token image perturbation against the current
/// query. The result is re-padded/truncated to the original budget with the
/// surviving rows kept in their original order. Labels move with tokens.
TokenSequence augment_sequence(const TokenSequence& seq, const LabelSpace& labels, const AugmentationConfig& cfg,
                               RngStream& rng, AugmentationStats* stats = nullptr);

}  // namespace divrank
