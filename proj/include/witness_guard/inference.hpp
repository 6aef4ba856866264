#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "witness_guard/model.hpp"
#include "witness_guard/tensor.hpp"

namespace wg {

struct LayerActivation {
  Tensor raw;
  // One scalar per unit: spatial mean of each channel for rank-3 outputs,
  // the value itself for rank-1 outputs.
  std::vector<float> summary;
};

// Indexed by layer position in Model::layers().
struct ActivationRecord {
  std::vector<LayerActivation> layers;

  friend bool operator==(const ActivationRecord& a, const ActivationRecord& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (!(a.layers[i].raw == b.layers[i].raw) ||
          a.layers[i].summary != b.layers[i].summary) {
        return false;
      }
    }
    return true;
  }
};

struct ForwardResult {
  Tensor logits;         // output of Model::logits_layer()
  Tensor probabilities;  // softmax(logits)
  std::size_t label = 0;
  ActivationRecord record;
};

// Called after each layer's own computation; may rewrite the layer output in
// place before it feeds the next layer and before it is recorded.
using LayerHook = std::function<void(std::size_t layer, Tensor& output)>;

std::vector<float> unit_summary(const Tensor& activation);

Tensor apply_layer(const LayerSpec& layer, const Tensor& input);
Tensor softmax(const Tensor& logits);
std::size_t argmax(std::span<const float> values);

// Throws InvalidArgument when the image shape differs from the model input.
ForwardResult forward(const Model& model, const Tensor& image,
                      const LayerHook& hook = {});

// Label-only pass; skips building the activation record.
std::size_t predict(const Model& model, const Tensor& image);
Tensor predict_logits(const Model& model, const Tensor& image);

struct Loss {
  enum class Kind { kCrossEntropy, kLogit };
  Kind kind = Kind::kCrossEntropy;
  std::size_t target_class = 0;

  static Loss cross_entropy(std::size_t c) { return {Kind::kCrossEntropy, c}; }
  static Loss logit(std::size_t c) { return {Kind::kLogit, c}; }
};

double evaluate_loss(const Model& model, const Tensor& image, const Loss& loss);

// Central differences (L(x + h e_i) - L(x - h e_i)) / 2h for every element.
Tensor finite_diff_gradient(const Model& model, const Tensor& image,
                            const Loss& loss, float step = 1e-3f);

}  // namespace wg
