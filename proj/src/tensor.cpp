#include "witness_guard/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace wg {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {
  for (std::size_t d : shape_) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw InvalidArgument("tensor dimensions must be positive");
  }
  if (shape_volume(shape_) != data_.size()) {
    throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<float> values) {
  return Tensor({values.size()}, std::vector<float>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw std::out_of_range("tensor axis out of range");
  return shape_[axis];
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw std::out_of_range("index rank does not match tensor rank");
  }
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw std::out_of_range("tensor index out of range");
    off = off * shape_[i] + index[i];
  }
  return off;
}

float Tensor::at(std::span<const std::size_t> index) const {
  return data_[offset(index)];
}

float& Tensor::at(std::span<const std::size_t> index) {
  return data_[offset(index)];
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::channel(std::size_t ch) const {
  if (rank() != 3 || ch >= shape_[0]) {
    throw InvalidArgument("channel() needs a rank-3 tensor and a valid channel");
  }
  const std::size_t plane = shape_[1] * shape_[2];
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(ch * plane);
  return Tensor({shape_[1], shape_[2]},
                std::vector<float>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

void Tensor::set_channel(std::size_t ch, const Tensor& plane) {
  if (rank() != 3 || ch >= shape_[0] || plane.rank() != 2 ||
      plane.dim(0) != shape_[1] || plane.dim(1) != shape_[2]) {
    throw InvalidArgument("set_channel() plane shape mismatch");
  }
  std::copy(plane.data_.begin(), plane.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(ch * plane.size()));
}

namespace {

void require_plane(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw InvalidArgument(std::string(op) + ": expected a rank-2 tensor, got " +
                          shape_to_string(t.shape()));
  }
}

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  if (static_cast<std::size_t>(i) >= n) return n - 1;
  return static_cast<std::size_t>(i);
}

// Per-output-coordinate tap positions and weights along one axis.
struct Taps {
  std::vector<std::array<std::size_t, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

Taps cubic_taps(std::size_t in, std::size_t out) {
  Taps taps;
  taps.index.resize(out);
  taps.weight.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto pos = static_cast<std::ptrdiff_t>(base) + k - 1;
      taps.index[i][k] = clamp_index(pos, in);
      taps.weight[i][k] = catmull_rom(t - static_cast<double>(k - 1));
    }
  }
  return taps;
}

}  // namespace

Tensor bicubic_resize(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  require_plane(input, "bicubic_resize");
  const std::size_t in_h = input.dim(0);
  const std::size_t in_w = input.dim(1);
  if (out_h == 0 || out_w == 0) {
    throw InvalidArgument("bicubic_resize: output size must be positive");
  }
  const Taps rows = cubic_taps(in_h, out_h);
  const Taps cols = cubic_taps(in_w, out_w);
  Tensor out({out_h, out_w});
  for (std::size_t i = 0; i < out_h; ++i) {
    for (std::size_t j = 0; j < out_w; ++j) {
      double acc = 0.0;
      for (int m = 0; m < 4; ++m) {
        double row = 0.0;
        for (int n = 0; n < 4; ++n) {
          row += cols.weight[j][n] * input(rows.index[i][m], cols.index[j][n]);
        }
        acc += rows.weight[i][m] * row;
      }
      out(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  require_plane(input, "bilinear_resize");
  if (out_h == 0 || out_w == 0) {
    throw InvalidArgument("bilinear_resize: output size must be positive");
  }
  const std::size_t in_h = input.dim(0);
  const std::size_t in_w = input.dim(1);
  auto axis = [](std::size_t in, std::size_t out, std::size_t i) {
    const double src = (static_cast<double>(i) + 0.5) * static_cast<double>(in) /
                           static_cast<double>(out) - 0.5;
    const double base = std::floor(src);
    const auto lo = static_cast<std::ptrdiff_t>(base);
    return std::tuple{clamp_index(lo, in), clamp_index(lo + 1, in), src - base};
  };
  Tensor out({out_h, out_w});
  for (std::size_t i = 0; i < out_h; ++i) {
    const auto [r0, r1, ty] = axis(in_h, out_h, i);
    for (std::size_t j = 0; j < out_w; ++j) {
      const auto [c0, c1, tx] = axis(in_w, out_w, j);
      const double top = (1.0 - tx) * input(r0, c0) + tx * input(r0, c1);
      const double bottom = (1.0 - tx) * input(r1, c0) + tx * input(r1, c1);
      out(i, j) = static_cast<float>((1.0 - ty) * top + ty * bottom);
    }
  }
  return out;
}

Tensor crop_margin(const Tensor& input, std::size_t margin) {
  require_plane(input, "crop_margin");
  const std::size_t h = input.dim(0);
  const std::size_t w = input.dim(1);
  if (2 * margin >= std::min(h, w)) {
    throw InvalidArgument("crop_margin: margin " + std::to_string(margin) +
                          " too large for " + shape_to_string(input.shape()));
  }
  Tensor out({h - 2 * margin, w - 2 * margin});
  for (std::size_t i = 0; i < out.dim(0); ++i) {
    for (std::size_t j = 0; j < out.dim(1); ++j) {
      out(i, j) = input(i + margin, j + margin);
    }
  }
  return out;
}

}  // namespace wg
