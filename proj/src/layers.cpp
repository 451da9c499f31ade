#include "divrank/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "divrank/error.hpp"

namespace divrank {

Matrix linear_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
    require(x.cols() == w.rows(), "linear_forward: x.cols != W.rows");
    require(b.size() == w.cols(), "linear_forward: bias length != W.cols");
    Matrix y = matmul(x, w);
    add_row_broadcast(y, b);
    return y;
}

Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw, std::span<double> db) {
    require(dy.cols() == w.cols() && dy.rows() == x.rows(), "linear_backward: shape mismatch");
    add_inplace(dw, matmul_tn(x, dy));
    for (std::size_t r = 0; r < dy.rows(); ++r) {
        auto row = dy.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
    }
    return matmul_nt(dy, w);
}

Matrix layer_norm_forward(const Matrix& x, std::span<const double> gamma, std::span<const double> beta,
                          LayerNormCache* cache) {
    const std::size_t n = x.rows(), d = x.cols();
    require(gamma.size() == d && beta.size() == d, "layer_norm: parameter length mismatch");
    Matrix y(n, d);
    if (cache) {
        cache->xhat = Matrix(n, d);
        cache->inv_std.assign(n, 0.0);
    }
    for (std::size_t r = 0; r < n; ++r) {
        auto xr = x.row(r);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t c = 0; c < d; ++c) {
            const double xh = (xr[c] - mean) * inv;
            y(r, c) = gamma[c] * xh + beta[c];
            if (cache) cache->xhat(r, c) = xh;
        }
        if (cache) cache->inv_std[r] = inv;
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, std::span<const double> gamma, const LayerNormCache& cache,
                           std::span<double> dgamma, std::span<double> dbeta) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Matrix dx(n, d);
    Vec dxhat(d);
    for (std::size_t r = 0; r < n; ++r) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double g = dy(r, c);
            const double xh = cache.xhat(r, c);
            dgamma[c] += g * xh;
            dbeta[c] += g;
            dxhat[c] = g * gamma[c];
            sum_dxhat += dxhat[c];
            sum_dxhat_xhat += dxhat[c] * xh;
        }
        const double scale = cache.inv_std[r] / static_cast<double>(d);
        for (std::size_t c = 0; c < d; ++c)
            dx(r, c) = scale * (static_cast<double>(d) * dxhat[c] - sum_dxhat - cache.xhat(r, c) * sum_dxhat_xhat);
    }
    return dx;
}

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    return cdf + x * pdf;
}

Matrix gelu_forward(const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) y.flat()[i] = gelu(x.flat()[i]);
    return y;
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
    Matrix dx(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) dx.flat()[i] = dy.flat()[i] * gelu_grad(x.flat()[i]);
    return dx;
}

void softmax_rows_inplace(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            s += v;
        }
        for (double& v : row) v /= s;
    }
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, int label) {
    require(logits.size() >= 2, "softmax_cross_entropy: need at least two classes");
    require(label >= 0 && static_cast<std::size_t>(label) < logits.size(),
            "softmax_cross_entropy: label out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) s += std::exp(v - mx);
    const double log_z = mx + std::log(s);
    CrossEntropy out;
    out.loss = log_z - logits[static_cast<std::size_t>(label)];
    out.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_z);
    out.grad[static_cast<std::size_t>(label)] -= 1.0;
    return out;
}

}  // namespace divrank
