#pragma once

#include <string>
#include <vector>

#include "divrank/layers.hpp"
#include "divrank/matrix.hpp"
#include "divrank/params.hpp"
#include "divrank/rng.hpp"

namespace divrank {

struct TransformerConfig {
    int dim = 64;
    int layers = 8;
    int heads = 4;
    int ffn_dim = 128;

    void validate() const;
};

// Parameter names for encoder layer `l`, e.g. layer_param(0, "attn.wq").
std::string layer_param(int l, const char* suffix);

/// Registers L pre-norm encoder layers in `params`. Projection weights are
/// N(0, 1/fan_in), biases zero, LayerNorm gain one.
void init_transformer_params(ParamStore& params, const TransformerConfig& cfg, RngStream& rng);

struct EncoderLayerCache {
    Matrix x;
    LayerNormCache ln1;
    Matrix a, q, k, v;
    std::vector<Matrix> attn;  // per head, n×n row-stochastic
    Matrix ctx;
    Matrix h1;
    LayerNormCache ln2;
    Matrix b, f1, g;
};

struct TransformerCache {
    int heads = 0;
    std::vector<EncoderLayerCache> layers;
};

/// L pre-norm encoder layers (LayerNorm → MHSA → residual; LayerNorm → FFN →
/// residual). No positional encoding, so the map is permutation-equivariant
/// over token rows.
Matrix transformer_encoder_forward(const Matrix& tokens, const ParamStore& params, int layers, int heads,
                                   TransformerCache* cache = nullptr);

/// Back-propagates dY through the cached forward pass, accumulating into the
/// gradients of `params`. Returns d tokens.
Matrix transformer_encoder_backward(const Matrix& dy, ParamStore& params, const TransformerCache& cache);

}  // namespace divrank
