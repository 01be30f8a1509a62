#pragma once

#include <cstddef>

namespace slotframes::kernels {

// Row-major GEMM kernels. Every output element is accumulated with fused
// multiply-adds over the inner dimension in ascending order, whichever
// register block it lands in, so permuting the rows of `a` permutes the rows
// of `c` bit-for-bit.

/// c[m,n] (+)= a[m,k] * b[k,n]
template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);

/// c[m,n] (+)= a[m,k] * b[n,k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);

/// c[m,n] (+)= a[k,m]^T * b[k,n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out);

}  // namespace slotframes::kernels
