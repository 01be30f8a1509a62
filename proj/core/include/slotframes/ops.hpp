#pragma once

#include <cstddef>
#include <vector>

#include "slotframes/tensor.hpp"

namespace slotframes {

enum class Padding { kZero, kCircular };

// Elementwise binary ops broadcast with numpy rules (right-aligned shapes,
// size-1 dimensions stretch). Gradients are summed back to each input shape.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& x, T s);
template <typename T> Tensor<T> neg(const Tensor<T>& x);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> sin(const Tensor<T>& x);
template <typename T> Tensor<T> cos(const Tensor<T>& x);

/// max(x, lo); the gradient passes only where x > lo.
template <typename T> Tensor<T> clamp_min(const Tensor<T>& x, T lo);

/// Identity forward, zero gradient backward.
template <typename T> Tensor<T> stop_gradient(const Tensor<T>& x);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis, bool keepdim = false);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
template <typename T> Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
/// Swaps the last two axes of a rank-2 or rank-3 tensor.
template <typename T> Tensor<T> transpose(const Tensor<T>& x);

/// out[k] = keep_a[k] ? a[k] : b[k] along the leading axis.
template <typename T>
Tensor<T> select_rows(const std::vector<bool>& keep_a, const Tensor<T>& a, const Tensor<T>& b);

/// [m,k] x [k,n] -> [m,n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// [B,m,k] x [B,k,n] -> [B,m,n]
template <typename T> Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b);

/// x[..., in] * w[in, out] (+ bias[out]).
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w);
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

/// Normalizes over the last axis then applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-6));

/// Max-subtracted softmax. The normalizer is summed in ascending order of the
/// exponentials, which makes the result invariant to permutations along `axis`.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// 'SAME' convolution of x[H,W,Cin] with k[kh,kw,Cin,Cout]; output
/// [ceil(H/stride), ceil(W/stride), Cout]. Kernel sizes must be odd and the
/// stride 1 or 2.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& k, std::size_t stride, Padding padding);

/// Transpose of a 'SAME' strided convolution: x[H,W,Cin] -> [H*stride, W*stride, Cout].
template <typename T>
Tensor<T> conv_transpose2d_same(const Tensor<T>& x, const Tensor<T>& k, std::size_t stride);

}  // namespace slotframes
