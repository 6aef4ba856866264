#include "witness_guard/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace wg {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2D: return "conv2d";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFullyConnected: return "fc";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

LayerKind kind_of(const LayerSpec& layer) {
  struct Visitor {
    LayerKind operator()(const Conv2D&) const { return LayerKind::kConv2D; }
    LayerKind operator()(const ReLU&) const { return LayerKind::kReLU; }
    LayerKind operator()(const MaxPool&) const { return LayerKind::kMaxPool; }
    LayerKind operator()(const FullyConnected&) const {
      return LayerKind::kFullyConnected;
    }
    LayerKind operator()(const Softmax&) const { return LayerKind::kSoftmax; }
  };
  return std::visit(Visitor{}, layer);
}

namespace {

[[noreturn]] void layer_error(std::size_t l, const std::string& what) {
  throw LoadError("layer " + std::to_string(l) + ": " + what);
}

Shape infer_output(std::size_t l, const LayerSpec& layer, const Shape& in) {
  switch (kind_of(layer)) {
    case LayerKind::kConv2D: {
      const auto& conv = std::get<Conv2D>(layer);
      if (conv.weights.rank() != 4) layer_error(l, "conv weights must be rank 4");
      if (conv.bias.shape() != Shape{conv.out_channels()}) {
        layer_error(l, "conv bias length does not match output channels");
      }
      if (conv.stride < 1) layer_error(l, "stride must be >= 1");
      if (in.size() != 3) layer_error(l, "conv input must be channels x height x width");
      if (in[0] != conv.in_channels()) {
        layer_error(l, "conv expects " + std::to_string(conv.in_channels()) +
                           " input channels, got " + std::to_string(in[0]));
      }
      const std::size_t ph = in[1] + 2 * conv.padding;
      const std::size_t pw = in[2] + 2 * conv.padding;
      if (ph < conv.kernel_h() || pw < conv.kernel_w()) {
        layer_error(l, "conv kernel larger than padded input");
      }
      return {conv.out_channels(), (ph - conv.kernel_h()) / conv.stride + 1,
              (pw - conv.kernel_w()) / conv.stride + 1};
    }
    case LayerKind::kReLU:
      return in;
    case LayerKind::kMaxPool: {
      const auto& pool = std::get<MaxPool>(layer);
      if (pool.window < 1 || pool.stride < 1) {
        layer_error(l, "pool window and stride must be >= 1");
      }
      if (in.size() != 3) layer_error(l, "pool input must be channels x height x width");
      if (in[1] < pool.window || in[2] < pool.window) {
        layer_error(l, "pool window larger than input");
      }
      return {in[0], (in[1] - pool.window) / pool.stride + 1,
              (in[2] - pool.window) / pool.stride + 1};
    }
    case LayerKind::kFullyConnected: {
      const auto& fc = std::get<FullyConnected>(layer);
      if (fc.weights.rank() != 2) layer_error(l, "fc weights must be rank 2");
      if (fc.bias.shape() != Shape{fc.out_features()}) {
        layer_error(l, "fc bias length does not match output width");
      }
      if (shape_volume(in) != fc.in_features()) {
        layer_error(l, "fc expects " + std::to_string(fc.in_features()) +
                           " inputs, got " + std::to_string(shape_volume(in)));
      }
      return {fc.out_features()};
    }
    case LayerKind::kSoftmax:
      if (in.size() != 1) layer_error(l, "softmax input must be a vector");
      return in;
  }
  layer_error(l, "unknown layer kind");
}

}  // namespace

Model::Model(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (input_shape_.size() != 3 || shape_volume(input_shape_) == 0) {
    throw LoadError("input shape must be channels x height x width");
  }
  if (layers_.empty()) throw LoadError("model has no layers");
  Shape current = input_shape_;
  bool seen_softmax = false;
  std::size_t last_compute = layers_.size();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (seen_softmax) layer_error(l, "layers after softmax are not supported");
    if (kind_of(layers_[l]) == LayerKind::kSoftmax) {
      seen_softmax = true;
    } else {
      last_compute = l;
    }
    current = infer_output(l, layers_[l], current);
    shapes_.push_back(current);
  }
  if (last_compute == layers_.size()) throw LoadError("model has only softmax layers");
  logits_layer_ = last_compute;
  if (shapes_[logits_layer_].size() != 1) {
    layer_error(logits_layer_, "final layer must produce a class-score vector");
  }
  class_count_ = shapes_[logits_layer_][0];
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    if (const auto* conv = std::get_if<Conv2D>(&layer)) {
      n += conv->weights.size() + conv->bias.size();
    } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
      n += fc->weights.size() + fc->bias.size();
    }
  }
  return n;
}

std::size_t Model::unit_count(std::size_t l) const {
  const Shape& s = shapes_.at(l);
  return s.size() == 3 ? s[0] : shape_volume(s);
}

bool Model::is_recordable(std::size_t l) const {
  const LayerKind k = kind(l);
  return k == LayerKind::kReLU || k == LayerKind::kMaxPool;
}

std::vector<std::size_t> Model::recordable_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (is_recordable(l)) out.push_back(l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'W', 'G', 'R', 'D'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32s(std::span<const float> values) {
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  bool has(std::size_t n) const { return in_.size() - pos_ >= n; }
  std::uint8_t u8(const std::string& ctx) {
    if (!has(1)) throw LoadError(ctx + ": unexpected end of file");
    return in_[pos_++];
  }
  std::uint32_t u32(const std::string& ctx) {
    if (!has(4)) throw LoadError(ctx + ": unexpected end of file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  // Reads `count` floats or throws "<ctx>: truncated <what>".
  std::vector<float> f32s(std::size_t count, const std::string& ctx,
                          const std::string& what) {
    if (count > (in_.size() - pos_) / 4) throw LoadError(ctx + ": truncated " + what);
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in_[pos_ + b]) << (8 * b);
      out[i] = std::bit_cast<float>(v);
      pos_ += 4;
    }
    return out;
  }
  bool at_end() const { return pos_ == in_.size(); }
  void skip_magic() {
    if (!has(4) || std::memcmp(in_.data(), kMagic, 4) != 0) {
      throw LoadError("bad magic: not a WGRD model file");
    }
    pos_ += 4;
  }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

Tensor read_tensor(Reader& r, Shape shape, const std::string& ctx,
                   const std::string& what) {
  for (std::size_t d : shape) {
    if (d == 0) throw LoadError(ctx + ": zero-sized " + what);
  }
  auto data = r.f32s(shape_volume(shape), ctx, what);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.layer_count()));
  for (std::size_t d : model.input_shape()) w.u32(static_cast<std::uint32_t>(d));
  for (const auto& layer : model.layers()) {
    w.u8(static_cast<std::uint8_t>(kind_of(layer)));
    if (const auto* conv = std::get_if<Conv2D>(&layer)) {
      for (std::size_t d : conv->weights.shape()) w.u32(static_cast<std::uint32_t>(d));
      w.u32(conv->stride);
      w.u32(conv->padding);
      w.f32s(conv->weights.data());
      w.f32s(conv->bias.data());
    } else if (const auto* pool = std::get_if<MaxPool>(&layer)) {
      w.u32(pool->window);
      w.u32(pool->stride);
    } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
      w.u32(static_cast<std::uint32_t>(fc->out_features()));
      w.u32(static_cast<std::uint32_t>(fc->in_features()));
      w.f32s(fc->weights.data());
      w.f32s(fc->bias.data());
    }
  }
  return w.take();
}

Model deserialize_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.skip_magic();
  const std::uint32_t version = r.u32("header");
  if (version != kModelFormatVersion) {
    throw LoadError("unsupported model version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("header");
  Shape input{r.u32("header"), r.u32("header"), r.u32("header")};
  std::vector<LayerSpec> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::string ctx = "layer " + std::to_string(l);
    const std::uint8_t tag = r.u8(ctx);
    switch (static_cast<LayerKind>(tag)) {
      case LayerKind::kConv2D: {
        Shape ws{r.u32(ctx), r.u32(ctx), r.u32(ctx), r.u32(ctx)};
        Conv2D conv;
        conv.stride = r.u32(ctx);
        conv.padding = r.u32(ctx);
        const std::size_t out = ws[0];
        conv.weights = read_tensor(r, std::move(ws), ctx, "weights");
        conv.bias = read_tensor(r, {out}, ctx, "weights");
        layers.emplace_back(std::move(conv));
        break;
      }
      case LayerKind::kReLU:
        layers.emplace_back(ReLU{});
        break;
      case LayerKind::kMaxPool: {
        MaxPool pool;
        pool.window = r.u32(ctx);
        pool.stride = r.u32(ctx);
        layers.emplace_back(pool);
        break;
      }
      case LayerKind::kFullyConnected: {
        FullyConnected fc;
        const std::uint32_t out = r.u32(ctx);
        const std::uint32_t in = r.u32(ctx);
        fc.weights = read_tensor(r, {out, in}, ctx, "weights");
        fc.bias = read_tensor(r, {out}, ctx, "weights");
        layers.emplace_back(std::move(fc));
        break;
      }
      case LayerKind::kSoftmax:
        layers.emplace_back(Softmax{});
        break;
      default:
        throw LoadError(ctx + ": unknown layer kind tag " + std::to_string(tag));
    }
  }
  if (!r.at_end()) throw LoadError("trailing bytes after final layer");
  return Model(std::move(input), std::move(layers));
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace wg
