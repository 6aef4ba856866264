#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wg {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

// Dense row-major float tensor. For shape (d0, d1, ..., dk) the element at
// (i0, i1, ..., ik) lives at flat offset ((i0 * d1 + i1) * d2 + i2) ... + ik.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor vector(std::initializer_list<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Unchecked multi-index access for rank-2 and rank-3 tensors.
  float& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  float operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  float& operator()(std::size_t ch, std::size_t r, std::size_t c) {
    return data_[(ch * shape_[1] + r) * shape_[2] + c];
  }
  float operator()(std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[(ch * shape_[1] + r) * shape_[2] + c];
  }

  // Bounds-checked access; throws std::out_of_range.
  float at(std::span<const std::size_t> index) const;
  float& at(std::span<const std::size_t> index);

  Tensor reshaped(Shape shape) const;

  // Rank-3 helpers: extract / overwrite one channel as a rank-2 plane.
  Tensor channel(std::size_t ch) const;
  void set_channel(std::size_t ch, const Tensor& plane);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(std::span<const std::size_t> index) const;

  Shape shape_;
  std::vector<float> data_;
};

// Catmull-Rom bicubic resampling (a = -0.5) of a rank-2 tensor. Sample
// coordinates align pixel centers: src = (dst + 0.5) * in / out - 0.5, and
// taps outside the source are clamped to the border. Output values are not
// clamped, so ringing past the input range is possible.
Tensor bicubic_resize(const Tensor& input, std::size_t out_h,
                      std::size_t out_w);

// Bilinear resampling with the same center-aligned, border-clamped sampling.
// Equal sizes reproduce the input exactly.
Tensor bilinear_resize(const Tensor& input, std::size_t out_h,
                       std::size_t out_w);

// Drops `margin` rows/columns from every side of a rank-2 tensor.
Tensor crop_margin(const Tensor& input, std::size_t margin);

}  // namespace wg
