#include "slotframes/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace slotframes::kernels {

namespace {

template <typename T>
struct Blocking;

// Register tile of kRows x (kVectors * kLanes); 512-bit lanes.
template <>
struct Blocking<float> {
  static constexpr std::size_t kRows = 6;
  static constexpr std::size_t kLanes = 16;
  static constexpr std::size_t kVectors = 2;
  static constexpr std::size_t kCols = kLanes * kVectors;
};

template <>
struct Blocking<double> {
  static constexpr std::size_t kRows = 6;
  static constexpr std::size_t kLanes = 8;
  static constexpr std::size_t kVectors = 2;
  static constexpr std::size_t kCols = kLanes * kVectors;
};

template <typename T, std::size_t Lanes>
struct SimdVec {
  typedef T type __attribute__((vector_size(Lanes * sizeof(T))));
};

// `Rows` rows of a against a packed k x kCols panel of b. The single-row
// instantiation handles remainders with identical per-element arithmetic.
template <typename T, std::size_t Rows>
inline void tile(std::size_t k, const T* a, std::size_t lda, const T* panel, T* c, std::size_t ldc, std::size_t cols,
                 bool accumulate) {
  constexpr std::size_t L = Blocking<T>::kLanes;
  constexpr std::size_t NV = Blocking<T>::kVectors;
  using V = typename SimdVec<T, L>::type;
  V acc[Rows][NV];
  for (std::size_t i = 0; i < Rows; ++i) {
    for (std::size_t v = 0; v < NV; ++v) {
      V x = {};
      if (accumulate) {
        for (std::size_t l = 0; l < L; ++l) {
          const std::size_t j = v * L + l;
          if (j < cols) x[l] = c[i * ldc + j];
        }
      }
      acc[i][v] = x;
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    V b[NV];
    for (std::size_t v = 0; v < NV; ++v) __builtin_memcpy(&b[v], panel + (p * NV + v) * L, sizeof(V));
    for (std::size_t i = 0; i < Rows; ++i) {
      const V av = V{} + a[i * lda + p];
      for (std::size_t v = 0; v < NV; ++v) acc[i][v] = av * b[v] + acc[i][v];
    }
  }
  for (std::size_t i = 0; i < Rows; ++i) {
    for (std::size_t v = 0; v < NV; ++v) {
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t j = v * L + l;
        if (j < cols) c[i * ldc + j] = acc[i][v][l];
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  constexpr std::size_t MR = Blocking<T>::kRows;
  constexpr std::size_t NR = Blocking<T>::kCols;
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + m * n, T(0));
    return;
  }
  std::vector<T> panel(k * NR);
  for (std::size_t j0 = 0; j0 < n; j0 += NR) {
    const std::size_t cols = std::min(NR, n - j0);
    for (std::size_t p = 0; p < k; ++p) {
      const T* src = b + p * n + j0;
      T* dst = panel.data() + p * NR;
      std::size_t j = 0;
      for (; j < cols; ++j) dst[j] = src[j];
      for (; j < NR; ++j) dst[j] = T(0);
    }
    std::size_t i0 = 0;
    for (; i0 + MR <= m; i0 += MR) {
      tile<T, MR>(k, a + i0 * k, k, panel.data(), c + i0 * n + j0, n, cols, accumulate);
    }
    for (; i0 < m; ++i0) {
      tile<T, 1>(k, a + i0 * k, k, panel.data(), c + i0 * n + j0, n, cols, accumulate);
    }
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
  constexpr std::size_t B = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += B) {
    for (std::size_t j0 = 0; j0 < cols; j0 += B) {
      const std::size_t ie = std::min(rows, i0 + B);
      const std::size_t je = std::min(cols, j0 + B);
      for (std::size_t i = i0; i < ie; ++i) {
        for (std::size_t j = j0; j < je; ++j) out[j * rows + i] = in[i * cols + j];
      }
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  std::vector<T> bt(k * n);
  transpose(n, k, b, bt.data());
  gemm(m, k, n, a, bt.data(), c, accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c, bool accumulate) {
  std::vector<T> at(m * k);
  transpose(k, m, a, at.data());
  gemm(m, k, n, at.data(), b, c, accumulate);
}

#define SLOTFRAMES_INSTANTIATE(T)                                                                        \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);          \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);       \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);       \
  template void transpose<T>(std::size_t, std::size_t, const T*, T*);

SLOTFRAMES_INSTANTIATE(float)
SLOTFRAMES_INSTANTIATE(double)

#undef SLOTFRAMES_INSTANTIATE

}  // namespace slotframes::kernels
