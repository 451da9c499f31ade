#include "divrank/kernels.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace divrank::kernels {

namespace {

constexpr std::size_t kParallelWork = 1u << 16;

// Products are computed in fixed 64-row blocks of C, so a block's bits do
// not depend on how blocks are spread over threads.
constexpr std::size_t kRowBlock = 64;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::size_t row_blocks(std::size_t m) { return (m + kRowBlock - 1) / kRowBlock; }

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void nn_block(const double* a, const double* b, double* c, std::size_t blk, std::size_t m, std::size_t k,
              std::size_t n) {
    const std::size_t i0 = blk * kRowBlock, rows = std::min(kRowBlock, m - i0);
    Map(c + i0 * n, idx(rows), idx(n)).noalias() = ConstMap(a + i0 * k, idx(rows), idx(k)) * ConstMap(b, idx(k), idx(n));
}

// Row block of Aᵀ·B: columns [i0, i0+rows) of A.
void tn_block(const double* a, const double* b, double* c, std::size_t blk, std::size_t m, std::size_t k,
              std::size_t n) {
    const std::size_t i0 = blk * kRowBlock, rows = std::min(kRowBlock, k - i0);
    const RowMat at = ConstMap(a, idx(m), idx(k)).middleCols(idx(i0), idx(rows)).transpose();
    Map(c + i0 * n, idx(rows), idx(n)).noalias() = at * ConstMap(b, idx(m), idx(n));
}

void nt_block(const double* a, const double* b, double* c, std::size_t blk, std::size_t m, std::size_t k,
              std::size_t n) {
    const std::size_t i0 = blk * kRowBlock, rows = std::min(kRowBlock, m - i0);
    Map(c + i0 * n, idx(rows), idx(n)).noalias() =
        ConstMap(a + i0 * k, idx(rows), idx(k)) * ConstMap(b, idx(n), idx(k)).transpose();
}

inline double cosine_row(const double* r, std::size_t d, std::span<const double> q, double qn) {
    double dt = 0.0, rn = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        dt += r[c] * q[c];
        rn += r[c] * r[c];
    }
    return dt / (std::sqrt(rn) * qn);
}

bool go_parallel(std::size_t work) { return work >= kParallelWork && !omp_in_parallel() && omp_get_max_threads() > 1; }

}  // namespace

void gemm_nn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
}

void gemm_tn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < m; ++r) s += a[r * k + i] * b[r * n + j];
            c[i * n + j] = s;
        }
}

void gemm_nt_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = s;
        }
}

void gemm_nn_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t blk = 0; blk < row_blocks(m); ++blk) nn_block(a, b, c, blk, m, k, n);
}

void gemm_nn_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(row_blocks(m)); ++blk)
        nn_block(a, b, c, static_cast<std::size_t>(blk), m, k, n);
}

void gemm_tn_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t blk = 0; blk < row_blocks(k); ++blk) tn_block(a, b, c, blk, m, k, n);
}

void gemm_tn_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(row_blocks(k)); ++blk)
        tn_block(a, b, c, static_cast<std::size_t>(blk), m, k, n);
}

void gemm_nt_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t blk = 0; blk < row_blocks(m); ++blk) nt_block(a, b, c, blk, m, k, n);
}

void gemm_nt_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(row_blocks(m)); ++blk)
        nt_block(a, b, c, static_cast<std::size_t>(blk), m, k, n);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (go_parallel(m * k * n)) gemm_nn_parallel(a, b, c, m, k, n);
    else gemm_nn_serial(a, b, c, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (go_parallel(m * k * n)) gemm_tn_parallel(a, b, c, m, k, n);
    else gemm_tn_serial(a, b, c, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    if (go_parallel(m * k * n)) gemm_nt_parallel(a, b, c, m, k, n);
    else gemm_nt_serial(a, b, c, m, k, n);
}

void cosine_rows_serial(const double* rows, std::size_t n, std::size_t d, std::span<const double> q, double* out) {
    double qn = 0.0;
    for (double v : q) qn += v * v;
    qn = std::sqrt(qn);
    for (std::size_t i = 0; i < n; ++i) out[i] = cosine_row(rows + i * d, d, q, qn);
}

void cosine_rows_parallel(const double* rows, std::size_t n, std::size_t d, std::span<const double> q, double* out) {
    double qn = 0.0;
    for (double v : q) qn += v * v;
    qn = std::sqrt(qn);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) out[i] = cosine_row(rows + i * d, d, q, qn);
}

int configure_threads(int requested) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("DIVRANK_THREADS")) {
            try {
                n = std::stoi(env);
            } catch (...) {
                n = 0;
            }
        }
    }
    if (n > 0) omp_set_num_threads(n);
    return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace divrank::kernels
