#pragma once

#include <span>

#include "divrank/matrix.hpp"
#include "divrank/params.hpp"
#include "divrank/rng.hpp"

namespace divrank {

/// Visual feature re-encoder: ĥ = h + β·g(h), with g a d→hidden→d MLP and a
/// GELU hidden layer. The output is not re-normalized.
struct ReEncoderModel {
    int dim = 0;
    int hidden = 0;
    double beta = 0.02;
    ParamStore params;  // "g.w1" d×hidden, "g.b1", "g.w2" hidden×d, "g.b2"

    static ReEncoderModel create(int dim, double beta, RngStream& rng, int hidden = 0);
};

struct ReEncoderCache {
    Matrix x;
    Matrix pre;   // x·W1 + b1
    Matrix act;   // GELU(pre)
};

/// Row-wise re-encoding of an n×d block.
Matrix reencode_batch(const Matrix& h, const ReEncoderModel& m, ReEncoderCache* cache = nullptr);
Vec reencode(std::span<const double> h, const ReEncoderModel& m);

/// The raw correction g(h) for an n×d block.
Matrix reencoder_correction(const Matrix& h, const ReEncoderModel& m);

/// Accumulates parameter gradients of the MLP given dL/dĥ.
void reencode_backward(const Matrix& d_out, ReEncoderModel& m, const ReEncoderCache& cache);

}  // namespace divrank
