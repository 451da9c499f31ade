#include "divrank/reencoder.hpp"

#include <cmath>

#include "divrank/error.hpp"
#include "divrank/layers.hpp"

namespace divrank {

ReEncoderModel ReEncoderModel::create(int dim, double beta, RngStream& rng, int hidden) {
    if (dim < 1) throw ConfigError("reencoder: dim must be >= 1");
    if (beta < 0.0) throw ConfigError("reencoder: beta must be >= 0");
    ReEncoderModel m;
    m.dim = dim;
    m.hidden = hidden > 0 ? hidden : 2 * dim;
    m.beta = beta;
    const auto d = static_cast<std::size_t>(dim), hd = static_cast<std::size_t>(m.hidden);
    Matrix w1(d, hd), w2(hd, d);
    for (double& v : w1.flat()) v = rng.normal() / std::sqrt(static_cast<double>(d));
    for (double& v : w2.flat()) v = rng.normal() / std::sqrt(static_cast<double>(hd));
    m.params.add("g.w1", std::move(w1));
    m.params.add("g.b1", Matrix(1, hd));
    m.params.add("g.w2", std::move(w2));
    m.params.add("g.b2", Matrix(1, d));
    return m;
}

Matrix reencoder_correction(const Matrix& h, const ReEncoderModel& m) {
    require(h.cols() == static_cast<std::size_t>(m.dim), "reencode: feature dim does not match model");
    Matrix pre = linear_forward(h, m.params.value("g.w1"), m.params.value("g.b1").flat());
    return linear_forward(gelu_forward(pre), m.params.value("g.w2"), m.params.value("g.b2").flat());
}

Matrix reencode_batch(const Matrix& h, const ReEncoderModel& m, ReEncoderCache* cache) {
    require(h.cols() == static_cast<std::size_t>(m.dim), "reencode: feature dim does not match model");
    Matrix pre = linear_forward(h, m.params.value("g.w1"), m.params.value("g.b1").flat());
    Matrix act = gelu_forward(pre);
    Matrix g = linear_forward(act, m.params.value("g.w2"), m.params.value("g.b2").flat());
    Matrix out = h;
    add_scaled_inplace(out, g, m.beta);
    if (cache) {
        cache->x = h;
        cache->pre = std::move(pre);
        cache->act = std::move(act);
    }
    return out;
}

Vec reencode(std::span<const double> h, const ReEncoderModel& m) {
    Matrix out = reencode_batch(Matrix::row_vector(h), m);
    return {out.flat().begin(), out.flat().end()};
}

void reencode_backward(const Matrix& d_out, ReEncoderModel& m, const ReEncoderCache& cache) {
    Matrix dg = d_out;
    for (double& v : dg.flat()) v *= m.beta;
    Matrix dact = linear_backward(cache.act, m.params.value("g.w2"), dg, m.params.grad("g.w2"),
                                  m.params.grad("g.b2").flat());
    Matrix dpre = gelu_backward(cache.pre, dact);
    linear_backward(cache.x, m.params.value("g.w1"), dpre, m.params.grad("g.w1"), m.params.grad("g.b1").flat());
}

}  // namespace divrank
