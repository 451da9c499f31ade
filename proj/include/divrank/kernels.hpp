#pragma once

// Dense inner loops. Each product has a plain triple-loop reference, a
// blocked serial version and an OpenMP version over the same row blocks;
// serial and parallel results are bit-identical, the reference agrees to
// rounding.

#include <cstddef>
#include <span>

namespace divrank::kernels {

// C[m×n] = A[m×k] · B[k×n]
void gemm_nn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nn_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nn_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// C[k×n] = A[m×k]ᵀ · B[m×n]
void gemm_tn_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// C[m×n] = A[m×k] · B[n×k]ᵀ
void gemm_nt_reference(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt_serial(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt_parallel(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

// Dispatchers: parallel above a work threshold and outside an enclosing
// parallel region, serial otherwise.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

// out[i] = cos(rows[i], q) for an n×d row-major block.
void cosine_rows_serial(const double* rows, std::size_t n, std::size_t d, std::span<const double> q, double* out);
void cosine_rows_parallel(const double* rows, std::size_t n, std::size_t d, std::span<const double> q, double* out);

// Caps OpenMP worker count; reads DIVRANK_THREADS when `requested` is 0.
// Returns the effective count.
int configure_threads(int requested = 0);
int max_threads();

}  // namespace divrank::kernels
