#include "slotframes/posegrid.hpp"

namespace slotframes {

template <typename T>
AbsGrid<T> make_abs_grid(std::size_t height, std::size_t width) {
  if (height < 2 || width < 2) {
    throw ConfigError("abs grid needs at least 2x2 tokens, got " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  AbsGrid<T> g;
  g.height = height;
  g.width = width;
  g.coords = Array<T>(Shape{height * width, 2});
  for (std::size_t i = 0; i < height; ++i) {
    const T y = T(-1) + T(2) * static_cast<T>(i) / static_cast<T>(height - 1);
    for (std::size_t j = 0; j < width; ++j) {
      const T x = T(-1) + T(2) * static_cast<T>(j) / static_cast<T>(width - 1);
      g.coords[(i * width + j) * 2 + 0] = x;
      g.coords[(i * width + j) * 2 + 1] = y;
    }
  }
  return g;
}

template <typename T>
Tensor<T> make_rel_grid(const Tensor<T>& abs, const SlotFrames<T>& frames, T delta, bool use_rotation,
                        bool use_scale) {
  const std::size_t k = frames.num_slots();
  // [N,2] - [K,1,2] -> [K,N,2]
  auto rel = sub(abs, reshape(frames.position, Shape{k, 1, 2}));
  if (use_rotation) {
    // Row vectors times S_r apply S_r^T = S_r^-1 to each offset.
    rel = bmm(rel, frames.rotation);
  }
  if (use_scale) {
    rel = div(rel, reshape(mul_scalar(frames.scale, delta), Shape{k, 1, 2}));
  }
  return rel;
}

template <typename T>
Tensor<T> encode_grid(const Tensor<T>& grid, const Dense<T>& proj) {
  return proj(grid);
}

template AbsGrid<float> make_abs_grid<float>(std::size_t, std::size_t);
template AbsGrid<double> make_abs_grid<double>(std::size_t, std::size_t);
template Tensor<float> make_rel_grid<float>(const Tensor<float>&, const SlotFrames<float>&, float, bool, bool);
template Tensor<double> make_rel_grid<double>(const Tensor<double>&, const SlotFrames<double>&, double, bool, bool);
template Tensor<float> encode_grid<float>(const Tensor<float>&, const Dense<float>&);
template Tensor<double> encode_grid<double>(const Tensor<double>&, const Dense<double>&);

}  // namespace slotframes
