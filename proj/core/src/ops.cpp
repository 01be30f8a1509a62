#include "slotframes/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slotframes/kernels.hpp"

namespace slotframes {

namespace {

template <typename T>
Node<T>& parent(Node<T>& self, std::size_t i) {
  return *self.parents[i];
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Maps a linear index of the broadcast output to the linear index of one input.
class BroadcastIndex {
 public:
  BroadcastIndex(const Shape& in, const Shape& out) : in_size_(numel(in)) {
    if (in == out) {
      mode_ = Mode::kSame;
      return;
    }
    // in equal to a trailing block of out, with leading ones/missing axes.
    std::size_t lead = out.size() - in.size();
    bool suffix = true;
    bool started = false;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!started && in[i] == 1 && out[lead + i] != 1) continue;
      started = true;
      if (in[i] != out[lead + i]) suffix = false;
    }
    if (suffix) {
      mode_ = Mode::kModulo;
      return;
    }
    mode_ = Mode::kTable;
    const std::size_t n = numel(out);
    table_.resize(n);
    std::vector<std::size_t> in_strides(out.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
      in_strides[lead + i] = in[i] == 1 ? 0 : stride;
      stride *= in[i];
    }
    std::vector<std::size_t> idx(out.size(), 0);
    std::size_t off = 0;
    for (std::size_t lin = 0; lin < n; ++lin) {
      table_[lin] = off;
      for (std::size_t ax = out.size(); ax-- > 0;) {
        ++idx[ax];
        off += in_strides[ax];
        if (idx[ax] < out[ax]) break;
        off -= in_strides[ax] * idx[ax];
        idx[ax] = 0;
      }
    }
  }

  bool same() const { return mode_ == Mode::kSame; }
  bool modulo() const { return mode_ == Mode::kModulo; }
  std::size_t in_size() const { return in_size_; }

  std::size_t operator()(std::size_t i) const {
    switch (mode_) {
      case Mode::kSame:
        return i;
      case Mode::kModulo:
        return i % in_size_;
      default:
        return table_[i];
    }
  }

 private:
  enum class Mode { kSame, kModulo, kTable };
  Mode mode_ = Mode::kSame;
  std::size_t in_size_;
  std::vector<std::size_t> table_;
};

// Visits every output index i with the matching input indices (ja, jb).
// Same-shape and suffix broadcasts get contiguous inner loops.
template <typename Fn>
void for_each_pair(const BroadcastIndex& ia, const BroadcastIndex& ib, std::size_t n, Fn&& fn) {
  if (ia.same() && ib.same()) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
  } else if (ia.same() && ib.modulo()) {
    const std::size_t m = ib.in_size();
    for (std::size_t o = 0; o < n; o += m) {
      for (std::size_t j = 0; j < m; ++j) fn(o + j, o + j, j);
    }
  } else if (ia.modulo() && ib.same()) {
    const std::size_t m = ia.in_size();
    for (std::size_t o = 0; o < n; o += m) {
      for (std::size_t j = 0; j < m; ++j) fn(o + j, j, o + j);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i, ia(i), ib(i));
  }
}

// f(x, y) -> out; da/db(x, y, out, g) -> gradient contribution.
template <typename T, typename F, typename DA, typename DB>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, F f, DA da, DB db) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  auto ia = std::make_shared<BroadcastIndex>(a.shape(), out_shape);
  auto ib = std::make_shared<BroadcastIndex>(b.shape(), out_shape);
  Array<T> out(out_shape);
  const T* av = a.value().ptr();
  const T* bv = b.value().ptr();
  T* ov = out.ptr();
  for_each_pair(*ia, *ib, out.size(), [&](std::size_t i, std::size_t ja, std::size_t jb) { ov[i] = f(av[ja], bv[jb]); });
  return make_result<T>(std::move(out), {a, b}, [ia, ib, da, db](Node<T>& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    const T* g = self.grad.ptr();
    const T* y = self.value.ptr();
    const T* x0 = pa.value.ptr();
    const T* x1 = pb.value.ptr();
    const std::size_t n = self.grad.size();
    if (pa.requires_grad) {
      T* ga = pa.ensure_grad().ptr();
      for_each_pair(*ia, *ib, n, [&](std::size_t i, std::size_t ja, std::size_t jb) {
        ga[ja] += da(x0[ja], x1[jb], y[i], g[i]);
      });
    }
    if (pb.requires_grad) {
      T* gb = pb.ensure_grad().ptr();
      for_each_pair(*ia, *ib, n, [&](std::size_t i, std::size_t ja, std::size_t jb) {
        gb[jb] += db(x0[ja], x1[jb], y[i], g[i]);
      });
    }
  });
}

// f(x) -> y; df(x, y, g) -> dx.
template <typename T, typename F, typename DF>
Tensor<T> unary_op(const Tensor<T>& x, F f, DF df) {
  Array<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(std::move(out), {x}, [df](Node<T>& self) {
    auto& px = parent(self, 0);
    auto& gx = px.ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += df(px.value[i], self.value[i], self.grad[i]);
  });
}

void check_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
}

// outer x axis x inner decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename T>
void add_into(Array<T>& dst, const Array<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x + y; }, [](T, T, T, T g) { return g; }, [](T, T, T, T g) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x - y; }, [](T, T, T, T g) { return g; }, [](T, T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x * y; }, [](T, T y, T, T g) { return g * y; },
      [](T x, T, T, T g) { return g * x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x / y; }, [](T, T y, T, T g) { return g / y; },
      [](T, T y, T out, T g) { return -g * out / y; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return unary_op(
      x, [s](T v) { return v + s; }, [](T, T, T g) { return g; });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T s) {
  return unary_op(
      x, [s](T v) { return v * s; }, [s](T, T, T g) { return g * s; });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return mul_scalar(x, T(-1));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T, T g) { return v > T(0) ? g : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y, T g) { return g * y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::tanh(v); }, [](T, T y, T g) { return g * (T(1) - y * y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::exp(v); }, [](T, T y, T g) { return g * y; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::sqrt(v); }, [](T, T y, T g) { return g / (T(2) * y); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v * v; }, [](T v, T, T g) { return T(2) * v * g; });
}

template <typename T>
Tensor<T> sin(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::sin(v); }, [](T v, T, T g) { return g * std::cos(v); });
}

template <typename T>
Tensor<T> cos(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::cos(v); }, [](T v, T, T g) { return -g * std::sin(v); });
}

template <typename T>
Tensor<T> clamp_min(const Tensor<T>& x, T lo) {
  return unary_op(
      x, [lo](T v) { return v > lo ? v : lo; }, [lo](T v, T, T g) { return v > lo ? g : T(0); });
}

template <typename T>
Tensor<T> stop_gradient(const Tensor<T>& x) {
  return Tensor<T>::constant(x.value());
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = T(0);
  for (auto v : x.value().data()) s += v;
  return make_result<T>(Array<T>::scalar(s), {x}, [](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    const T g = self.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis, bool keepdim) {
  check_axis(x.shape(), axis, "sum_axis");
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim || out_shape.size() == 1) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  Array<T> out(out_shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t l = 0; l < s.length; ++l) {
      const T* src = xv.ptr() + (o * s.length + l) * s.inner;
      T* dst = out.ptr() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return make_result<T>(std::move(out), {x}, [s](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t l = 0; l < s.length; ++l) {
        T* dst = gx.ptr() + (o * s.length + l) * s.inner;
        const T* src = self.grad.ptr() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  Array<T> out = x.value();
  out.reshape(std::move(shape));
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    add_into(gx, self.grad);
  });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  if (broadcast_shape(x.shape(), shape) != shape) {
    throw DimensionError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  auto idx = std::make_shared<BroadcastIndex>(x.shape(), shape);
  Array<T> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[(*idx)(i)];
  return make_result<T>(std::move(out), {x}, [idx](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[(*idx)(i)] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = xs.front().shape();
  check_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    out_shape[axis] += s[axis];
  }
  const AxisSplit so = split_at(out_shape, axis);
  Array<T> out(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& x : xs) {
    offsets.push_back(at);
    const std::size_t len = x.shape()[axis];
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(x.value().ptr() + o * len * so.inner, len * so.inner,
                  out.ptr() + (o * so.length + at) * so.inner);
    }
    at += len;
  }
  return make_result<T>(std::move(out), xs, [so, offsets](Node<T>& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      auto& px = parent(self, p);
      if (!px.requires_grad) continue;
      auto& gx = px.ensure_grad();
      const std::size_t len = gx.size() / (so.outer * so.inner);
      for (std::size_t o = 0; o < so.outer; ++o) {
        const T* src = self.grad.ptr() + (o * so.length + offsets[p]) * so.inner;
        T* dst = gx.ptr() + o * len * so.inner;
        for (std::size_t i = 0; i < len * so.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  check_axis(x.shape(), axis, "slice");
  if (length == 0 || start + length > x.shape()[axis]) {
    throw DimensionError("slice [" + std::to_string(start) + "," + std::to_string(start + length) + ") of axis " +
                         std::to_string(axis) + " in " + shape_str(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  Array<T> out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.value().ptr() + (o * s.length + start) * s.inner, length * s.inner,
                out.ptr() + o * length * s.inner);
  }
  return make_result<T>(std::move(out), {x}, [s, start, length](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      const T* src = self.grad.ptr() + o * length * s.inner;
      T* dst = gx.ptr() + (o * s.length + start) * s.inner;
      for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 3) throw DimensionError("transpose needs rank 2 or 3, got " + shape_str(s));
  const std::size_t batch = s.size() == 3 ? s[0] : 1;
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s[s.size() - 1];
  Shape out_shape = s;
  std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
  Array<T> out(out_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    kernels::transpose(rows, cols, x.value().ptr() + b * rows * cols, out.ptr() + b * rows * cols);
  }
  return make_result<T>(std::move(out), {x}, [batch, rows, cols](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    std::vector<T> tmp(rows * cols);
    for (std::size_t b = 0; b < batch; ++b) {
      kernels::transpose(cols, rows, self.grad.ptr() + b * rows * cols, tmp.data());
      T* dst = gx.ptr() + b * rows * cols;
      for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] += tmp[i];
    }
  });
}

template <typename T>
Tensor<T> select_rows(const std::vector<bool>& keep_a, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("select_rows: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.shape().empty() || keep_a.size() != a.shape()[0]) {
    throw DimensionError("select_rows: mask of " + std::to_string(keep_a.size()) + " rows for " +
                         shape_str(a.shape()));
  }
  const std::size_t row = a.size() / keep_a.size();
  Array<T> out(a.shape());
  for (std::size_t k = 0; k < keep_a.size(); ++k) {
    const T* src = (keep_a[k] ? a : b).value().ptr() + k * row;
    std::copy_n(src, row, out.ptr() + k * row);
  }
  return make_result<T>(std::move(out), {a, b}, [keep_a, row](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& px = parent(self, p);
      if (!px.requires_grad) continue;
      auto& gx = px.ensure_grad();
      for (std::size_t k = 0; k < keep_a.size(); ++k) {
        if (keep_a[k] != (p == 0)) continue;
        for (std::size_t i = 0; i < row; ++i) gx[k * row + i] += self.grad[k * row + i];
      }
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Array<T> out(Shape{m, n});
  kernels::gemm(m, k, n, a.value().ptr(), b.value().ptr(), out.ptr(), false);
  return make_result<T>(std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) kernels::gemm_nt(m, n, k, self.grad.ptr(), pb.value.ptr(), pa.ensure_grad().ptr(), true);
    if (pb.requires_grad) kernels::gemm_tn(k, m, n, pa.value.ptr(), self.grad.ptr(), pb.ensure_grad().ptr(), true);
  });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1]) {
    throw DimensionError("bmm: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
  Array<T> out(Shape{batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::gemm(m, k, n, a.value().ptr() + i * m * k, b.value().ptr() + i * k * n, out.ptr() + i * m * n, false);
  }
  return make_result<T>(std::move(out), {a, b}, [batch, m, k, n](Node<T>& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      const T* g = self.grad.ptr() + i * m * n;
      if (pa.requires_grad) {
        kernels::gemm_nt(m, n, k, g, pb.value.ptr() + i * k * n, pa.ensure_grad().ptr() + i * m * k, true);
      }
      if (pb.requires_grad) {
        kernels::gemm_tn(k, m, n, pa.value.ptr() + i * m * k, g, pb.ensure_grad().ptr() + i * k * n, true);
      }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.empty() || sw.size() != 2 || sx.back() != sw[0]) {
    throw DimensionError("linear: " + shape_str(sx) + " x " + shape_str(sw));
  }
  const std::size_t rows = x.size() / sx.back();
  Shape out_shape = sx;
  out_shape.back() = sw[1];
  auto y = matmul(reshape(x, Shape{rows, sx.back()}), w);
  return reshape(y, out_shape);
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  return add(linear(x, w), bias);
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const Shape& sx = x.shape();
  if (sx.empty()) throw DimensionError("layer_norm on scalar");
  const std::size_t d = sx.back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: input " + shape_str(sx) + " with gain " + shape_str(gain.shape()) +
                         " and bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.size() / d;
  Array<T> out(sx);
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  const T* xv = x.value().ptr();
  const T* gv = gain.value().ptr();
  const T* bv = bias.value().ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv + r * d;
    T mu = T(0);
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t i = 0; i < d; ++i) {
      const T h = (row[i] - mu) * inv;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gv[i] + bv[i];
    }
  }
  return make_result<T>(std::move(out), {x, gain, bias}, [xhat, inv_std, rows, d](Node<T>& self) {
    auto& px = parent(self, 0);
    auto& pg = parent(self, 1);
    auto& pb = parent(self, 2);
    const T* g = self.grad.ptr();
    if (pg.requires_grad || pb.requires_grad) {
      auto& gg = pg.ensure_grad();
      auto& gb = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
          gg[i] += g[r * d + i] * (*xhat)[r * d + i];
          gb[i] += g[r * d + i];
        }
      }
    }
    if (px.requires_grad) {
      auto& gx = px.ensure_grad();
      const T* gain_v = pg.value.ptr();
      std::vector<T> gh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T sum_gh = T(0), sum_ghx = T(0);
        for (std::size_t i = 0; i < d; ++i) {
          gh[i] = g[r * d + i] * gain_v[i];
          sum_gh += gh[i];
          sum_ghx += gh[i] * (*xhat)[r * d + i];
        }
        const T scale = (*inv_std)[r] / static_cast<T>(d);
        for (std::size_t i = 0; i < d; ++i) {
          gx[r * d + i] += scale * (static_cast<T>(d) * gh[i] - sum_gh - (*xhat)[r * d + i] * sum_ghx);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  check_axis(x.shape(), axis, "softmax");
  const AxisSplit s = split_at(x.shape(), axis);
  Array<T> out(x.shape());
  const T* xv = x.value().ptr();
  std::vector<T> e(s.length), sorted(s.length);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      T mx = xv[base];
      for (std::size_t l = 1; l < s.length; ++l) mx = std::max(mx, xv[base + l * s.inner]);
      for (std::size_t l = 0; l < s.length; ++l) e[l] = std::exp(xv[base + l * s.inner] - mx);
      sorted = e;
      std::sort(sorted.begin(), sorted.end());
      T z = T(0);
      for (auto v : sorted) z += v;
      for (std::size_t l = 0; l < s.length; ++l) out[base + l * s.inner] = e[l] / z;
    }
  }
  return make_result<T>(std::move(out), {x}, [s](Node<T>& self) {
    auto& gx = parent(self, 0).ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.length * s.inner + in;
        T dot = T(0);
        for (std::size_t l = 0; l < s.length; ++l) dot += g[base + l * s.inner] * y[base + l * s.inner];
        for (std::size_t l = 0; l < s.length; ++l) {
          const std::size_t i = base + l * s.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

namespace {

struct ConvGeometry {
  std::size_t h, w, cin, kh, kw, cout, stride, ho, wo, pad_top, pad_left;
  bool circular;
};

ConvGeometry conv_geometry(const Shape& xs, const Shape& ks, std::size_t stride, Padding padding) {
  if (xs.size() != 3 || ks.size() != 4 || xs[2] != ks[2]) {
    throw DimensionError("conv2d_same: input " + shape_str(xs) + " with kernel " + shape_str(ks));
  }
  if (ks[0] % 2 == 0 || ks[1] % 2 == 0) {
    throw ConfigError("conv2d_same: kernel size must be odd, got " + std::to_string(ks[0]) + "x" +
                      std::to_string(ks[1]));
  }
  if (stride != 1 && stride != 2) throw ConfigError("conv2d_same: stride must be 1 or 2");
  ConvGeometry g{};
  g.h = xs[0];
  g.w = xs[1];
  g.cin = xs[2];
  g.kh = ks[0];
  g.kw = ks[1];
  g.cout = ks[3];
  g.stride = stride;
  g.ho = (g.h + stride - 1) / stride;
  g.wo = (g.w + stride - 1) / stride;
  const std::size_t need_h = (g.ho - 1) * stride + g.kh;
  const std::size_t need_w = (g.wo - 1) * stride + g.kw;
  g.pad_top = (need_h > g.h ? need_h - g.h : 0) / 2;
  g.pad_left = (need_w > g.w ? need_w - g.w : 0) / 2;
  g.circular = padding == Padding::kCircular;
  return g;
}

// Source index of an output tap, or -1 if it falls in zero padding.
inline std::ptrdiff_t conv_source(std::size_t out, std::size_t tap, std::size_t stride, std::size_t pad,
                                  std::size_t extent, bool circular) {
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(out * stride + tap) - static_cast<std::ptrdiff_t>(pad);
  const auto n = static_cast<std::ptrdiff_t>(extent);
  if (circular) return ((i % n) + n) % n;
  return (i < 0 || i >= n) ? -1 : i;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& k, std::size_t stride, Padding padding) {
  const ConvGeometry g = conv_geometry(x.shape(), k.shape(), stride, padding);
  const std::size_t patch = g.kh * g.kw * g.cin;
  const std::size_t npix = g.ho * g.wo;
  // Source offset per (output pixel, tap); -1 marks padding.
  auto src = std::make_shared<std::vector<std::ptrdiff_t>>(npix * g.kh * g.kw);
  for (std::size_t oy = 0; oy < g.ho; ++oy) {
    for (std::size_t ox = 0; ox < g.wo; ++ox) {
      for (std::size_t dy = 0; dy < g.kh; ++dy) {
        const auto iy = conv_source(oy, dy, g.stride, g.pad_top, g.h, g.circular);
        for (std::size_t dx = 0; dx < g.kw; ++dx) {
          const auto ix = conv_source(ox, dx, g.stride, g.pad_left, g.w, g.circular);
          (*src)[((oy * g.wo + ox) * g.kh + dy) * g.kw + dx] =
              (iy < 0 || ix < 0) ? -1 : (iy * static_cast<std::ptrdiff_t>(g.w) + ix) * static_cast<std::ptrdiff_t>(g.cin);
        }
      }
    }
  }
  auto cols = std::make_shared<std::vector<T>>(npix * patch, T(0));
  const T* xv = x.value().ptr();
  for (std::size_t p = 0; p < npix; ++p) {
    for (std::size_t t = 0; t < g.kh * g.kw; ++t) {
      const auto off = (*src)[p * g.kh * g.kw + t];
      if (off < 0) continue;
      std::copy_n(xv + off, g.cin, cols->data() + p * patch + t * g.cin);
    }
  }
  Array<T> out(Shape{g.ho, g.wo, g.cout});
  kernels::gemm(npix, patch, g.cout, cols->data(), k.value().ptr(), out.ptr(), false);
  return make_result<T>(std::move(out), {x, k}, [g, src, cols, patch, npix](Node<T>& self) {
    auto& px = parent(self, 0);
    auto& pk = parent(self, 1);
    if (pk.requires_grad) {
      kernels::gemm_tn(patch, npix, g.cout, cols->data(), self.grad.ptr(), pk.ensure_grad().ptr(), true);
    }
    if (px.requires_grad) {
      std::vector<T> gcols(npix * patch);
      kernels::gemm_nt(npix, g.cout, patch, self.grad.ptr(), pk.value.ptr(), gcols.data(), false);
      auto& gx = px.ensure_grad();
      for (std::size_t p = 0; p < npix; ++p) {
        for (std::size_t t = 0; t < g.kh * g.kw; ++t) {
          const auto off = (*src)[p * g.kh * g.kw + t];
          if (off < 0) continue;
          const T* from = gcols.data() + p * patch + t * g.cin;
          T* to = gx.ptr() + off;
          for (std::size_t c = 0; c < g.cin; ++c) to[c] += from[c];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> conv_transpose2d_same(const Tensor<T>& x, const Tensor<T>& k, std::size_t stride) {
  const Shape& xs = x.shape();
  const Shape& ks = k.shape();
  if (xs.size() != 3 || ks.size() != 4 || xs[2] != ks[2]) {
    throw DimensionError("conv_transpose2d_same: input " + shape_str(xs) + " with kernel " + shape_str(ks));
  }
  if (ks[0] % 2 == 0 || ks[1] % 2 == 0) throw ConfigError("conv_transpose2d_same: kernel size must be odd");
  if (stride != 1 && stride != 2) throw ConfigError("conv_transpose2d_same: stride must be 1 or 2");
  const std::size_t h = xs[0], w = xs[1], cin = xs[2], kh = ks[0], kw = ks[1], cout = ks[3];
  const std::size_t ho = h * stride, wo = w * stride;
  const std::size_t pad_top = (kh > stride ? kh - stride : 0) / 2;
  const std::size_t pad_left = (kw > stride ? kw - stride : 0) / 2;
  const std::size_t taps = kh * kw * cout;

  // kmat[ci, (dy, dx, co)] = k[dy, dx, ci, co]
  std::vector<T> kmat(cin * taps);
  const T* kv = k.value().ptr();
  for (std::size_t dy = 0; dy < kh; ++dy)
    for (std::size_t dx = 0; dx < kw; ++dx)
      for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t co = 0; co < cout; ++co)
          kmat[ci * taps + (dy * kw + dx) * cout + co] = kv[((dy * kw + dx) * cin + ci) * cout + co];

  // Destination offset per (input pixel, tap); -1 when cropped away.
  auto dst = std::make_shared<std::vector<std::ptrdiff_t>>(h * w * kh * kw);
  for (std::size_t iy = 0; iy < h; ++iy)
    for (std::size_t ix = 0; ix < w; ++ix)
      for (std::size_t dy = 0; dy < kh; ++dy)
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const auto oy = static_cast<std::ptrdiff_t>(iy * stride + dy) - static_cast<std::ptrdiff_t>(pad_top);
          const auto ox = static_cast<std::ptrdiff_t>(ix * stride + dx) - static_cast<std::ptrdiff_t>(pad_left);
          const bool inside = oy >= 0 && ox >= 0 && oy < static_cast<std::ptrdiff_t>(ho) &&
                              ox < static_cast<std::ptrdiff_t>(wo);
          (*dst)[((iy * w + ix) * kh + dy) * kw + dx] =
              inside ? (oy * static_cast<std::ptrdiff_t>(wo) + ox) * static_cast<std::ptrdiff_t>(cout) : -1;
        }

  std::vector<T> cols(h * w * taps);
  kernels::gemm(h * w, cin, taps, x.value().ptr(), kmat.data(), cols.data(), false);
  Array<T> out(Shape{ho, wo, cout});
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t t = 0; t < kh * kw; ++t) {
      const auto off = (*dst)[p * kh * kw + t];
      if (off < 0) continue;
      const T* from = cols.data() + p * taps + t * cout;
      T* to = out.ptr() + off;
      for (std::size_t c = 0; c < cout; ++c) to[c] += from[c];
    }
  }
  auto kmat_shared = std::make_shared<std::vector<T>>(std::move(kmat));
  return make_result<T>(std::move(out), {x, k}, [=](Node<T>& self) {
    auto& px = parent(self, 0);
    auto& pk = parent(self, 1);
    std::vector<T> gcols(h * w * taps, T(0));
    for (std::size_t p = 0; p < h * w; ++p) {
      for (std::size_t t = 0; t < kh * kw; ++t) {
        const auto off = (*dst)[p * kh * kw + t];
        if (off < 0) continue;
        std::copy_n(self.grad.ptr() + off, cout, gcols.data() + p * taps + t * cout);
      }
    }
    if (px.requires_grad) {
      kernels::gemm_nt(h * w, taps, cin, gcols.data(), kmat_shared->data(), px.ensure_grad().ptr(), true);
    }
    if (pk.requires_grad) {
      std::vector<T> gk(cin * taps);
      kernels::gemm_tn(cin, h * w, taps, px.value.ptr(), gcols.data(), gk.data(), false);
      auto& gkernel = pk.ensure_grad();
      for (std::size_t dy = 0; dy < kh; ++dy)
        for (std::size_t dx = 0; dx < kw; ++dx)
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t co = 0; co < cout; ++co)
              gkernel[((dy * kw + dx) * cin + ci) * cout + co] += gk[ci * taps + (dy * kw + dx) * cout + co];
    }
  });
}

#define SLOTFRAMES_OPS(T)                                                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                                  \
  template Tensor<T> neg(const Tensor<T>&);                                                            \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
  template Tensor<T> tanh(const Tensor<T>&);                                                           \
  template Tensor<T> exp(const Tensor<T>&);                                                            \
  template Tensor<T> sqrt(const Tensor<T>&);                                                           \
  template Tensor<T> square(const Tensor<T>&);                                                         \
  template Tensor<T> sin(const Tensor<T>&);                                                            \
  template Tensor<T> cos(const Tensor<T>&);                                                            \
  template Tensor<T> clamp_min(const Tensor<T>&, T);                                                   \
  template Tensor<T> stop_gradient(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                            \
  template Tensor<T> mean(const Tensor<T>&);                                                           \
  template Tensor<T> sum_axis(const Tensor<T>&, std::size_t, bool);                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                     \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                               \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                   \
  template Tensor<T> transpose(const Tensor<T>&);                                                      \
  template Tensor<T> select_rows(const std::vector<bool>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);              \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> conv2d_same(const Tensor<T>&, const Tensor<T>&, std::size_t, Padding);            \
  template Tensor<T> conv_transpose2d_same(const Tensor<T>&, const Tensor<T>&, std::size_t);

SLOTFRAMES_OPS(float)
SLOTFRAMES_OPS(double)

#undef SLOTFRAMES_OPS

}  // namespace slotframes
