#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "test_util.hpp"
#include "witness_guard/inference.hpp"
#include "witness_guard/model.hpp"

namespace wg {
namespace {

// Little-endian byte writer used to build expected files by hand.
struct Bytes {
  std::vector<std::uint8_t> b;
  void u8(std::uint8_t v) { b.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    u32(v);
  }
  void magic() { for (char c : std::string("WGRD")) b.push_back(static_cast<std::uint8_t>(c)); }
};

Conv2D conv(std::size_t out, std::size_t in, std::size_t k, std::uint32_t pad) {
  return {Tensor({out, in, k, k}, 0.01f), Tensor({out}, 0.0f), 1, pad};
}

TEST(ModelFormat, MatchesHandWrittenBytes) {
  const Model m({1, 2, 2},
                {Conv2D{Tensor({1, 1, 1, 1}, std::vector<float>{2.0f}), Tensor::vector({0.5f}), 1, 0},
                 ReLU{}, MaxPool{2, 2}, FullyConnected{Tensor({2, 1}, std::vector<float>{1.0f, -1.0f}),
                                                       Tensor::vector({0.0f, 0.25f})},
                 Softmax{}});
  Bytes e;
  e.magic();
  e.u32(1);
  e.u32(5);
  e.u32(1); e.u32(2); e.u32(2);
  e.u8(1); e.u32(1); e.u32(1); e.u32(1); e.u32(1); e.u32(1); e.u32(0); e.f32(2.0f); e.f32(0.5f);
  e.u8(2);
  e.u8(3); e.u32(2); e.u32(2);
  e.u8(4); e.u32(2); e.u32(1); e.f32(1.0f); e.f32(-1.0f); e.f32(0.0f); e.f32(0.25f);
  e.u8(5);
  EXPECT_EQ(serialize_model(m), e.b);
}

TEST(ModelFormat, RoundTripIsBitExact) {
  const Model m = testing::small_model(3);
  const auto bytes = serialize_model(m);
  const Model back = deserialize_model(bytes);
  EXPECT_EQ(serialize_model(back), bytes);
  EXPECT_EQ(back.parameter_count(), m.parameter_count());
  std::mt19937_64 rng(4);
  const Tensor x = testing::random_tensor({2, 8, 8}, rng);
  EXPECT_EQ(predict_logits(m, x), predict_logits(back, x));

  const auto dir = testing::scratch_dir("model_rt");
  save_model(m, dir / "m.wgrd");
  EXPECT_EQ(serialize_model(load_model(dir / "m.wgrd")), bytes);
}

TEST(ModelFormat, TruncatedWeightsNameTheLayer) {
  auto bytes = serialize_model(testing::small_model(3));
  bytes.resize(bytes.size() - 10);  // cuts into the last fc layer
  try {
    deserialize_model(bytes);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_STREQ(e.what(), "layer 5: truncated weights");
  }
}

TEST(ModelFormat, RejectsBadHeader) {
  auto bytes = serialize_model(testing::small_model(3));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_model(bad_magic), LoadError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(deserialize_model(bad_version), LoadError);
  auto bad_tag = bytes;
  bad_tag[24] = 9;  // first layer tag
  EXPECT_THROW(deserialize_model(bad_tag), LoadError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_model(trailing), LoadError);
  EXPECT_THROW(load_model("/nonexistent/model.wgrd"), LoadError);
}

TEST(Model, ShapeChainBreakNamesLayer) {
  try {
    Model({1, 4, 4}, {conv(2, 1, 3, 1), ReLU{}, FullyConnected{Tensor({3, 31}), Tensor({3})}});
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(Model({1, 4, 4}, {conv(2, 3, 3, 1)}), LoadError);
  EXPECT_THROW(Model({1, 4, 4}, {Softmax{}, ReLU{}}), LoadError);
  EXPECT_THROW(Model({1, 4, 4}, {}), LoadError);
}

TEST(Model, VggShapedTopologyHasTwentyRecordableLayers) {
  // VGG-16 layout at reduced width and a 32x32 input.
  std::vector<LayerSpec> layers;
  std::size_t in = 3;
  const std::vector<std::pair<std::size_t, std::size_t>> blocks = {{2, 2}, {2, 4}, {3, 4}, {3, 8}, {3, 8}};
  for (auto [convs, width] : blocks) {
    for (std::size_t i = 0; i < convs; ++i) {
      layers.push_back(conv(width, in, 3, 1));
      layers.push_back(ReLU{});
      in = width;
    }
    layers.push_back(MaxPool{2, 2});
  }
  layers.push_back(FullyConnected{Tensor({16, 8}, 0.01f), Tensor({16})});
  layers.push_back(ReLU{});
  layers.push_back(FullyConnected{Tensor({16, 16}, 0.01f), Tensor({16})});
  layers.push_back(ReLU{});
  layers.push_back(FullyConnected{Tensor({10, 16}, 0.01f), Tensor({10})});
  layers.push_back(Softmax{});
  const Model m({3, 32, 32}, layers);
  const auto rec = m.recordable_layers();
  EXPECT_EQ(rec.size(), 20u);
  std::size_t pools = 0;
  for (std::size_t l : rec) pools += m.kind(l) == LayerKind::kMaxPool;
  EXPECT_EQ(pools, 5u);
  EXPECT_EQ(m.class_count(), 10u);
  EXPECT_EQ(m.logits_layer(), m.layer_count() - 2);
}

TEST(Model, UnitCounts) {
  const Model m = testing::small_model(1);
  EXPECT_EQ(m.unit_count(1), 3u);  // channels
  EXPECT_EQ(m.unit_count(2), 3u);
  EXPECT_EQ(m.unit_count(4), 5u);  // scalars
  EXPECT_EQ(m.recordable_layers(), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(m.output_shape(2), Shape({3, 4, 4}));
}

}  // namespace
}  // namespace wg
