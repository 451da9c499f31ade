#pragma once

#include <span>

#include "divrank/matrix.hpp"

namespace divrank {

/// y = x·W + b, b broadcast over rows.
Matrix linear_forward(const Matrix& x, const Matrix& w, std::span<const double> b);

/// Accumulates dW += xᵀ·dy and db += colsum(dy); returns dx = dy·Wᵀ.
Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw, std::span<double> db);

struct LayerNormCache {
    Matrix xhat;
    Vec inv_std;
};

constexpr double kLayerNormEps = 1e-5;

Matrix layer_norm_forward(const Matrix& x, std::span<const double> gamma, std::span<const double> beta,
                          LayerNormCache* cache);
Matrix layer_norm_backward(const Matrix& dy, std::span<const double> gamma, const LayerNormCache& cache,
                           std::span<double> dgamma, std::span<double> dbeta);

// Exact (erf) GELU.
double gelu(double x);
double gelu_grad(double x);
Matrix gelu_forward(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

void softmax_rows_inplace(Matrix& m);

struct CrossEntropy {
    double loss = 0.0;
    Vec grad;  // d loss / d logits
};

/// −log softmax(logits)[label], computed with max subtraction.
CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label);

}  // namespace divrank
