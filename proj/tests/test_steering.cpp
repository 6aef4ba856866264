#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "witness_guard/steering.hpp"

namespace wg {
namespace {

LayerWitnessStats stats(double mu, double sigma, double min) { return {0, mu, sigma, min}; }

TEST(Weaken, CalculatorValues) {
  EXPECT_NEAR(weaken(2.0, stats(1.0, 0.5, 0.0), 100.0), 1.960397, 1e-6);
  const auto s = stats(1.0, 0.5, 0.0);
  EXPECT_NEAR(weaken(1.0 + 100.0 * 0.5, s, 100.0), (1.0 + 50.0) / std::exp(1.0), 1e-9);
  EXPECT_EQ(weakening_factor(1.0, s, 100.0), 1.0);
  EXPECT_EQ(weakening_factor(5.0, s, std::numeric_limits<double>::infinity()), 1.0);
}

TEST(Strengthen, CalculatorValues) {
  EXPECT_NEAR(strengthen(60.0, stats(0.0, 1.0, 0.0), 60.0, 1.15), 106.927, 1e-3);
  EXPECT_EQ(strengthening_factor(0.3, stats(1.0, 0.2, 0.3), 60.0, 1.15), 1.15);
  EXPECT_DOUBLE_EQ(strengthen(0.3, stats(1.0, 0.2, 0.3), 60.0, 1.15), 1.15 * 0.3);
}

TEST(Strengthen, MultiplierBoundedAndMonotone) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const auto s = stats(0.0, 0.1 + u(rng), u(rng) * 0.1);
    const double v1 = s.min + u(rng), v2 = v1 + u(rng);
    const double f1 = strengthening_factor(v1, s, 60.0, 1.15), f2 = strengthening_factor(v2, s, 60.0, 1.15);
    EXPECT_GE(f1, 1.15);
    EXPECT_LT(f1, 2.15);
    EXPECT_LE(f1, f2);
    const double w = weakening_factor(s.mu + 1.0 + u(rng), s, 100.0);
    EXPECT_GT(w, 0.0);
    EXPECT_LT(w, 1.0);
  }
}

TEST(WitnessStats, PopulationSigmaWithFloor) {
  const std::vector<float> summary = {1.0f, 9.0f, 3.0f, 5.0f};
  const auto s = witness_stats(2, summary, {0, 2, 3}, 1e-6);
  EXPECT_DOUBLE_EQ(s.mu, 3.0);
  EXPECT_NEAR(s.sigma, std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(witness_stats(2, summary, {1}, 1e-6).sigma, 1e-6);
  EXPECT_THROW(witness_stats(2, summary, {}, 1e-6), InvalidArgument);
}

TEST(SteeringConfig, Validation) {
  SteeringConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = 0.9;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.alpha = std::numeric_limits<double>::infinity();
  EXPECT_NO_THROW(c.validate());
}

TEST(ConserveTransform, ShapesAndIdentities) {
  std::mt19937_64 rng(52);
  const Tensor map = testing::random_tensor({28, 28}, rng);
  const Tensor out = conserve_transform(map, 2);
  EXPECT_EQ(out.shape(), Shape({28, 28}));
  EXPECT_EQ(out, bicubic_resize(crop_margin(map, 2), 28, 28));
  EXPECT_EQ(conserve_transform(map, 0), map);
  const Tensor flat({9, 7}, 0.42f);
  const Tensor flat_out = conserve_transform(flat, 3);
  for (float v : flat_out.data()) EXPECT_NEAR(v, 0.42f, 1e-6);
  EXPECT_THROW(conserve_transform(flat, 4), InvalidArgument);
}

// Reference steered pass built from apply_layer and the scalar transforms,
// one layer at a time.
Tensor reference_steered_logits(const Model& m, const WitnessSet& w, const SteeringConfig& cfg,
                                const Tensor& x) {
  Tensor cur = x;
  for (std::size_t l = 0; l <= m.logits_layer(); ++l) {
    cur = apply_layer(m.layer(l), cur);
    const UnitSet units = w.units_at(l);
    if (units.empty()) continue;
    const std::size_t n = m.unit_count(l);
    auto is_w = [&](std::size_t u) { return std::binary_search(units.begin(), units.end(), u); };
    if (m.kind(l) == LayerKind::kMaxPool && cfg.weaken && cfg.pool_margin > 0) {
      for (std::size_t c = 0; c < n; ++c) {
        if (!is_w(c)) cur.set_channel(c, conserve_transform(cur.channel(c), cfg.pool_margin));
      }
    }
    const auto summary = unit_summary(cur);
    double mu = 0, min = 1e300, var = 0;
    for (auto u : units) mu += summary[u] / static_cast<double>(units.size());
    for (auto u : units) {
      var += (summary[u] - mu) * (summary[u] - mu) / static_cast<double>(units.size());
      min = std::min(min, static_cast<double>(summary[u]));
    }
    const double sigma = std::max(std::sqrt(var), cfg.sigma_floor);
    for (std::size_t u = 0; u < n; ++u) {
      const double v = summary[u];
      double f = 1.0;
      if (is_w(u)) f = cfg.epsilon + 1.0 - std::exp(-(v - min) / (cfg.beta * sigma));
      else if (v > mu) f = std::exp(-(v - mu) / (cfg.alpha * sigma));
      const std::size_t plane = cur.rank() == 3 ? cur.dim(1) * cur.dim(2) : 1;
      for (std::size_t i = 0; i < plane; ++i) cur[u * plane + i] *= static_cast<float>(f);
    }
  }
  return cur;
}

TEST(SteeredForward, MatchesLayerByLayerReference) {
  const Model m = testing::small_model(9);
  const WitnessSet w{"nose", {{2, 0}, {2, 2}, {4, 1}, {4, 3}}, {}, 0};
  SteeringConfig cfg;
  cfg.pool_margin = 1;
  std::mt19937_64 rng(53);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = testing::random_tensor({2, 8, 8}, rng);
    const auto r = steered_forward(m, w, cfg, x);
    const Tensor ref = reference_steered_logits(m, w, cfg, x);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(r.logits[k], ref[k], 1e-5);
  }
}

TEST(SteeredForward, NeutralConfigsAreBitIdentical) {
  const Model m = testing::small_model(10);
  std::mt19937_64 rng(54);
  SteeringConfig zero_margin;
  zero_margin.pool_margin = 0;
  SteeringConfig off;
  off.weaken = off.strengthen = false;
  const WitnessSet w{"nose", {{1, 1}, {2, 0}, {4, 2}}, {}, 0};
  for (int i = 0; i < 50; ++i) {
    const Tensor x = testing::random_tensor({2, 8, 8}, rng);
    const auto plain = forward(m, x);
    const auto empty = steered_forward(m, WitnessSet{}, zero_margin, x);
    EXPECT_EQ(empty.record, plain.record);
    EXPECT_EQ(empty.logits, plain.logits);
    const auto disabled = steered_forward(m, w, off, x);
    EXPECT_EQ(disabled.record, plain.record);
  }
}

TEST(SteeredForward, ScalingKeepsSpatialArgmax) {
  const Model m = testing::small_model(11);
  const WitnessSet w{"nose", {{1, 0}, {1, 1}}, {}, 0};
  std::mt19937_64 rng(55);
  const Tensor x = testing::random_tensor({2, 8, 8}, rng);
  const auto plain = forward(m, x), steered = steered_forward(m, w, {}, x);
  for (std::size_t c = 0; c < 3; ++c) {
    const Tensor a = plain.record.layers[1].raw.channel(c), b = steered.record.layers[1].raw.channel(c);
    // A factor that underflowed to zero has no argmax to keep.
    if (*std::max_element(b.data().begin(), b.data().end()) > 0.0f) {
      EXPECT_EQ(argmax(a.data()), argmax(b.data()));
    }
  }
}

TEST(SteeredForward, NeverErrorsOnTinyPoolMaps) {
  // 2x2 pooled maps with margin 2 cannot be cropped; steering must still run.
  std::mt19937_64 rng(56);
  const Model m({1, 4, 4}, {Conv2D{testing::random_tensor({2, 1, 3, 3}, rng), Tensor({2}), 1, 1},
                            ReLU{}, MaxPool{2, 2},
                            FullyConnected{testing::random_tensor({2, 8}, rng), Tensor({2})}});
  const WitnessSet w{"nose", {{2, 0}}, {}, 0};
  const Tensor x = testing::random_tensor({1, 4, 4}, rng);
  EXPECT_NO_THROW(steered_forward(m, w, {}, x));
  SteeringConfig one;
  one.pool_margin = 1;  // leaves a 0x0 crop
  EXPECT_NO_THROW(steered_forward(m, w, one, x));
}

TEST(SteeredForward, RejectsForeignWitnesses) {
  const Model m = testing::small_model(12);
  std::mt19937_64 rng(57);
  const Tensor x = testing::random_tensor({2, 8, 8}, rng);
  EXPECT_THROW(steered_forward(m, WitnessSet{"x", {{4, 40}}, {}, 0}, {}, x), InvalidArgument);
}

}  // namespace
}  // namespace wg
