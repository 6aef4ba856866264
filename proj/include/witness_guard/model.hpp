#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "witness_guard/tensor.hpp"

namespace wg {

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LayerKind : std::uint8_t {
  kConv2D = 1,
  kReLU = 2,
  kMaxPool = 3,
  kFullyConnected = 4,
  kSoftmax = 5,
};

std::string to_string(LayerKind kind);

// Cross-correlation with zero padding. weights: (out, in, kh, kw).
struct Conv2D {
  Tensor weights;
  Tensor bias;  // (out)
  std::uint32_t stride = 1;
  std::uint32_t padding = 0;

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel_h() const { return weights.dim(2); }
  std::size_t kernel_w() const { return weights.dim(3); }
};

struct ReLU {};

struct MaxPool {
  std::uint32_t window = 2;
  std::uint32_t stride = 2;
};

// weights: (out, in); the input is flattened row-major before the product.
struct FullyConnected {
  Tensor weights;
  Tensor bias;  // (out)

  std::size_t out_features() const { return weights.dim(0); }
  std::size_t in_features() const { return weights.dim(1); }
};

struct Softmax {};

using LayerSpec = std::variant<Conv2D, ReLU, MaxPool, FullyConnected, Softmax>;

LayerKind kind_of(const LayerSpec& layer);

// Sequential network F = softmax . f^n . ... . f^1. Shapes are validated at
// construction and the model is immutable afterwards.
class Model {
 public:
  // Throws LoadError naming the first incompatible layer.
  Model(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  const LayerSpec& layer(std::size_t l) const { return layers_.at(l); }
  LayerKind kind(std::size_t l) const { return kind_of(layers_.at(l)); }

  // Output shape of layer l.
  const Shape& output_shape(std::size_t l) const { return shapes_.at(l); }

  // Index of the layer producing the logits (the last non-softmax layer).
  std::size_t logits_layer() const { return logits_layer_; }
  std::size_t class_count() const { return class_count_; }
  std::size_t parameter_count() const;

  // Number of units ("neurons") at layer l: channels for rank-3 outputs,
  // scalars for rank-1 outputs.
  std::size_t unit_count(std::size_t l) const;

  // Layers whose units take part in witness inference and steering:
  // post-nonlinearity feature layers (ReLU and MaxPool outputs). Softmax and
  // pre-activation Conv2D/FullyConnected outputs are excluded.
  std::vector<std::size_t> recordable_layers() const;
  bool is_recordable(std::size_t l) const;

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::size_t logits_layer_ = 0;
  std::size_t class_count_ = 0;
};

// Binary "WGRD" model format, little-endian:
//   char[4] "WGRD", u32 version (=1), u32 layer count,
//   u32 input channels, u32 input height, u32 input width,
//   then per layer a u8 kind tag followed by
//     Conv2D:         u32 out, in, kh, kw, stride, padding; f32 weights; f32 bias
//     ReLU / Softmax: nothing
//     MaxPool:        u32 window, stride
//     FullyConnected: u32 out, in; f32 weights; f32 bias
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace wg
