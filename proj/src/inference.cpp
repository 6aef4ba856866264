#include "witness_guard/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wg {

std::vector<float> unit_summary(const Tensor& activation) {
  if (activation.rank() == 3) {
    const std::size_t channels = activation.dim(0);
    const std::size_t plane = activation.dim(1) * activation.dim(2);
    std::vector<float> out(channels);
    const auto data = activation.data();
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += data[c * plane + i];
      out[c] = static_cast<float>(acc / static_cast<double>(plane));
    }
    return out;
  }
  return activation.values();
}

namespace {

Tensor conv2d(const Conv2D& conv, const Tensor& in) {
  const std::size_t in_c = in.dim(0), in_h = in.dim(1), in_w = in.dim(2);
  const std::size_t kh = conv.kernel_h(), kw = conv.kernel_w();
  const std::size_t pad = conv.padding, stride = conv.stride;
  const std::size_t out_c = conv.out_channels();
  const std::size_t out_h = (in_h + 2 * pad - kh) / stride + 1;
  const std::size_t out_w = (in_w + 2 * pad - kw) / stride + 1;
  Tensor out({out_c, out_h, out_w});
  const auto w = conv.weights.data();
  for (std::size_t o = 0; o < out_c; ++o) {
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = conv.bias[o];
        for (std::size_t c = 0; c < in_c; ++c) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const auto iy = static_cast<std::ptrdiff_t>(y * stride + ky) -
                            static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const auto ix = static_cast<std::ptrdiff_t>(x * stride + kx) -
                              static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
              acc += static_cast<double>(w[((o * in_c + c) * kh + ky) * kw + kx]) *
                     in(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out(o, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor max_pool(const MaxPool& pool, const Tensor& in) {
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t out_h = (h - pool.window) / pool.stride + 1;
  const std::size_t out_w = (w - pool.window) / pool.stride + 1;
  Tensor out({c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        float best = -std::numeric_limits<float>::infinity();
        for (std::size_t dy = 0; dy < pool.window; ++dy) {
          for (std::size_t dx = 0; dx < pool.window; ++dx) {
            best = std::max(best, in(ch, y * pool.stride + dy, x * pool.stride + dx));
          }
        }
        out(ch, y, x) = best;
      }
    }
  }
  return out;
}

Tensor fully_connected(const FullyConnected& fc, const Tensor& in) {
  const std::size_t n_out = fc.out_features(), n_in = fc.in_features();
  const auto x = in.data();
  const auto w = fc.weights.data();
  Tensor out({n_out});
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = fc.bias[o];
    const float* row = w.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) acc += static_cast<double>(row[i]) * x[i];
    out[o] = static_cast<float>(acc);
  }
  return out;
}

Tensor relu(Tensor t) {
  for (float& v : t.data()) v = std::max(v, 0.0f);
  return t;
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  const auto x = logits.data();
  const float peak = *std::max_element(x.begin(), x.end());
  std::vector<double> e(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp(static_cast<double>(x[i]) - peak);
    total += e[i];
  }
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(e[i] / total);
  return out;
}

std::size_t argmax(std::span<const float> values) {
  return static_cast<std::size_t>(
      std::distance(values.begin(), std::max_element(values.begin(), values.end())));
}

Tensor apply_layer(const LayerSpec& layer, const Tensor& input) {
  switch (kind_of(layer)) {
    case LayerKind::kConv2D: return conv2d(std::get<Conv2D>(layer), input);
    case LayerKind::kReLU: return relu(input);
    case LayerKind::kMaxPool: return max_pool(std::get<MaxPool>(layer), input);
    case LayerKind::kFullyConnected:
      return fully_connected(std::get<FullyConnected>(layer), input);
    case LayerKind::kSoftmax: return softmax(input);
  }
  throw InvalidArgument("unknown layer kind");
}

namespace {

void check_input(const Model& model, const Tensor& image) {
  if (image.shape() != model.input_shape()) {
    throw InvalidArgument("image shape " + shape_to_string(image.shape()) +
                          " does not match model input " +
                          shape_to_string(model.input_shape()));
  }
}

}  // namespace

ForwardResult forward(const Model& model, const Tensor& image, const LayerHook& hook) {
  check_input(model, image);
  ForwardResult result;
  result.record.layers.reserve(model.layer_count());
  Tensor current = image;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    current = apply_layer(model.layer(l), current);
    if (hook) hook(l, current);
    if (l == model.logits_layer()) result.logits = current;
    result.record.layers.push_back({current, unit_summary(current)});
  }
  result.probabilities = softmax(result.logits);
  result.label = argmax(result.logits.data());
  return result;
}

Tensor predict_logits(const Model& model, const Tensor& image) {
  check_input(model, image);
  Tensor current = image;
  for (std::size_t l = 0; l <= model.logits_layer(); ++l) {
    current = apply_layer(model.layer(l), current);
  }
  return current;
}

std::size_t predict(const Model& model, const Tensor& image) {
  return argmax(predict_logits(model, image).data());
}

double evaluate_loss(const Model& model, const Tensor& image, const Loss& loss) {
  const Tensor logits = predict_logits(model, image);
  if (loss.target_class >= logits.size()) {
    throw InvalidArgument("loss target class out of range");
  }
  const auto z = logits.data();
  if (loss.kind == Loss::Kind::kLogit) return z[loss.target_class];
  // -log softmax(z)_c computed as logsumexp(z) - z_c.
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (float v : z) total += std::exp(static_cast<double>(v) - peak);
  return peak + std::log(total) - z[loss.target_class];
}

Tensor finite_diff_gradient(const Model& model, const Tensor& image,
                            const Loss& loss, float step) {
  if (!(step > 0.0f)) throw InvalidArgument("finite difference step must be positive");
  check_input(model, image);
  Tensor grad(image.shape());
  Tensor probe = image;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float x = image[i];
    const float plus = x + step;
    const float minus = x - step;
    probe[i] = plus;
    const double up = evaluate_loss(model, probe, loss);
    probe[i] = minus;
    const double down = evaluate_loss(model, probe, loss);
    probe[i] = x;
    // Denominator is the realised float spacing plus - minus.
    grad[i] = static_cast<float>((up - down) /
                                 (static_cast<double>(plus) - static_cast<double>(minus)));
  }
  return grad;
}

}  // namespace wg
