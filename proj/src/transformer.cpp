#include "divrank/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "divrank/error.hpp"

namespace divrank {

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, RngStream& rng) {
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = stddev * rng.normal();
    return m;
}

std::span<const double> vec_of(const ParamStore& p, int l, const char* s) { return p.value(layer_param(l, s)).flat(); }
std::span<double> grad_of(ParamStore& p, int l, const char* s) { return p.grad(layer_param(l, s)).flat(); }

Matrix add(const Matrix& a, const Matrix& b) {
    Matrix c = a;
    add_inplace(c, b);
    return c;
}

}  // namespace

void TransformerConfig::validate() const {
    if (dim <= 0 || layers < 1 || heads < 1 || ffn_dim < 1)
        throw ConfigError("transformer: dim, layers, heads and ffn_dim must be positive");
    if (dim % heads != 0) throw ConfigError("transformer: dim must be divisible by heads");
}

std::string layer_param(int l, const char* suffix) { return "enc." + std::to_string(l) + "." + suffix; }

void init_transformer_params(ParamStore& params, const TransformerConfig& cfg, RngStream& rng) {
    cfg.validate();
    const auto d = static_cast<std::size_t>(cfg.dim);
    const auto f = static_cast<std::size_t>(cfg.ffn_dim);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    const double sf = 1.0 / std::sqrt(static_cast<double>(f));
    for (int l = 0; l < cfg.layers; ++l) {
        params.add(layer_param(l, "ln1.g"), Matrix(1, d, 1.0));
        params.add(layer_param(l, "ln1.b"), Matrix(1, d));
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
            params.add(layer_param(l, w), gaussian_matrix(d, d, sd, rng));
        params.add(layer_param(l, "attn.bq"), Matrix(1, d));
        params.add(layer_param(l, "attn.bk"), Matrix(1, d));
        params.add(layer_param(l, "attn.bv"), Matrix(1, d));
        params.add(layer_param(l, "attn.bo"), Matrix(1, d));
        params.add(layer_param(l, "ln2.g"), Matrix(1, d, 1.0));
        params.add(layer_param(l, "ln2.b"), Matrix(1, d));
        params.add(layer_param(l, "ffn.w1"), gaussian_matrix(d, f, sd, rng));
        params.add(layer_param(l, "ffn.b1"), Matrix(1, f));
        params.add(layer_param(l, "ffn.w2"), gaussian_matrix(f, d, sf, rng));
        params.add(layer_param(l, "ffn.b2"), Matrix(1, d));
    }
}

Matrix transformer_encoder_forward(const Matrix& tokens, const ParamStore& params, int layers, int heads,
                                   TransformerCache* cache) {
    if (layers < 1) throw ConfigError("transformer: layer count must be >= 1");
    if (heads < 1 || tokens.cols() % static_cast<std::size_t>(heads) != 0)
        throw ConfigError("transformer: dim must be divisible by heads");
    const std::size_t n = tokens.rows(), d = tokens.cols();
    const std::size_t hd = d / static_cast<std::size_t>(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    require(params.value(layer_param(0, "attn.wq")).rows() == d, "transformer: token dim does not match params");

    if (cache) {
        cache->heads = heads;
        cache->layers.assign(static_cast<std::size_t>(layers), {});
    }

    Matrix x = tokens;
    for (int l = 0; l < layers; ++l) {
        EncoderLayerCache local;
        EncoderLayerCache& c = cache ? cache->layers[static_cast<std::size_t>(l)] : local;
        c.x = x;
        c.a = layer_norm_forward(x, vec_of(params, l, "ln1.g"), vec_of(params, l, "ln1.b"), &c.ln1);
        c.q = linear_forward(c.a, params.value(layer_param(l, "attn.wq")), vec_of(params, l, "attn.bq"));
        c.k = linear_forward(c.a, params.value(layer_param(l, "attn.wk")), vec_of(params, l, "attn.bk"));
        c.v = linear_forward(c.a, params.value(layer_param(l, "attn.wv")), vec_of(params, l, "attn.bv"));
        c.ctx = Matrix(n, d);
        c.attn.assign(static_cast<std::size_t>(heads), Matrix(n, n));
        for (std::size_t h = 0; h < static_cast<std::size_t>(heads); ++h) {
            const std::size_t off = h * hd;
            Matrix& p = c.attn[h];
            for (std::size_t i = 0; i < n; ++i) {
                const double* qi = c.q.data() + i * d + off;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* kj = c.k.data() + j * d + off;
                    double s = 0.0;
                    for (std::size_t t = 0; t < hd; ++t) s += qi[t] * kj[t];
                    p(i, j) = s * scale;
                }
            }
            softmax_rows_inplace(p);
            for (std::size_t i = 0; i < n; ++i) {
                double* ci = c.ctx.data() + i * d + off;
                for (std::size_t j = 0; j < n; ++j) {
                    const double pij = p(i, j);
                    const double* vj = c.v.data() + j * d + off;
                    for (std::size_t t = 0; t < hd; ++t) ci[t] += pij * vj[t];
                }
            }
        }
        Matrix attn_out = linear_forward(c.ctx, params.value(layer_param(l, "attn.wo")), vec_of(params, l, "attn.bo"));
        c.h1 = add(x, attn_out);
        c.b = layer_norm_forward(c.h1, vec_of(params, l, "ln2.g"), vec_of(params, l, "ln2.b"), &c.ln2);
        c.f1 = linear_forward(c.b, params.value(layer_param(l, "ffn.w1")), vec_of(params, l, "ffn.b1"));
        c.g = gelu_forward(c.f1);
        Matrix f2 = linear_forward(c.g, params.value(layer_param(l, "ffn.w2")), vec_of(params, l, "ffn.b2"));
        x = add(c.h1, f2);
    }
    return x;
}

Matrix transformer_encoder_backward(const Matrix& dy, ParamStore& params, const TransformerCache& cache) {
    require(!cache.layers.empty(), "transformer_encoder_backward: empty cache");
    const auto heads = static_cast<std::size_t>(cache.heads);
    Matrix dx = dy;
    for (int l = static_cast<int>(cache.layers.size()) - 1; l >= 0; --l) {
        const EncoderLayerCache& c = cache.layers[static_cast<std::size_t>(l)];
        const std::size_t n = c.x.rows(), d = c.x.cols(), hd = d / heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

        // y = h1 + FFN(LN2(h1))
        Matrix dh1 = dx;
        Matrix dg = linear_backward(c.g, params.value(layer_param(l, "ffn.w2")), dx, params.grad(layer_param(l, "ffn.w2")),
                                    grad_of(params, l, "ffn.b2"));
        Matrix df1 = gelu_backward(c.f1, dg);
        Matrix db = linear_backward(c.b, params.value(layer_param(l, "ffn.w1")), df1, params.grad(layer_param(l, "ffn.w1")),
                                    grad_of(params, l, "ffn.b1"));
        add_inplace(dh1, layer_norm_backward(db, vec_of(params, l, "ln2.g"), c.ln2, grad_of(params, l, "ln2.g"),
                                             grad_of(params, l, "ln2.b")));

        // h1 = x + MHSA(LN1(x))
        Matrix dctx = linear_backward(c.ctx, params.value(layer_param(l, "attn.wo")), dh1,
                                      params.grad(layer_param(l, "attn.wo")), grad_of(params, l, "attn.bo"));
        Matrix dq(n, d), dk(n, d), dv(n, d);
        Matrix dp(n, n);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * hd;
            const Matrix& p = c.attn[h];
            for (std::size_t i = 0; i < n; ++i) {
                const double* dci = dctx.data() + i * d + off;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* vj = c.v.data() + j * d + off;
                    double* dvj = dv.data() + j * d + off;
                    double s = 0.0;
                    const double pij = p(i, j);
                    for (std::size_t t = 0; t < hd; ++t) {
                        s += dci[t] * vj[t];
                        dvj[t] += pij * dci[t];
                    }
                    dp(i, j) = s;
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                double rowdot = 0.0;
                for (std::size_t j = 0; j < n; ++j) rowdot += dp(i, j) * p(i, j);
                double* dqi = dq.data() + i * d + off;
                const double* qi = c.q.data() + i * d + off;
                for (std::size_t j = 0; j < n; ++j) {
                    const double ds = p(i, j) * (dp(i, j) - rowdot) * scale;
                    if (ds == 0.0) continue;
                    const double* kj = c.k.data() + j * d + off;
                    double* dkj = dk.data() + j * d + off;
                    for (std::size_t t = 0; t < hd; ++t) {
                        dqi[t] += ds * kj[t];
                        dkj[t] += ds * qi[t];
                    }
                }
            }
        }
        Matrix da = linear_backward(c.a, params.value(layer_param(l, "attn.wq")), dq, params.grad(layer_param(l, "attn.wq")),
                                    grad_of(params, l, "attn.bq"));
        add_inplace(da, linear_backward(c.a, params.value(layer_param(l, "attn.wk")), dk,
                                        params.grad(layer_param(l, "attn.wk")), grad_of(params, l, "attn.bk")));
        add_inplace(da, linear_backward(c.a, params.value(layer_param(l, "attn.wv")), dv,
                                        params.grad(layer_param(l, "attn.wv")), grad_of(params, l, "attn.bv")));
        dx = dh1;
        add_inplace(dx, layer_norm_backward(da, vec_of(params, l, "ln1.g"), c.ln1, grad_of(params, l, "ln1.g"),
                                            grad_of(params, l, "ln1.b")));
    }
    return dx;
}

}  // namespace divrank
