#include "witness_guard/steering.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace wg {

void SteeringConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("steering alpha must be positive");
  if (!(beta > 0.0)) throw InvalidArgument("steering beta must be positive");
  if (!(epsilon >= 1.0)) throw InvalidArgument("steering epsilon must be >= 1");
  if (!(sigma_floor > 0.0)) throw InvalidArgument("steering sigma_floor must be positive");
}

LayerWitnessStats witness_stats(std::size_t layer, std::span<const float> summaries,
                                const UnitSet& witness_units, double sigma_floor) {
  if (witness_units.empty()) throw InvalidArgument("witness_stats: layer has no witnesses");
  LayerWitnessStats s;
  s.layer = layer;
  double sum = 0.0;
  s.min = summaries[witness_units.front()];
  for (std::size_t u : witness_units) {
    sum += summaries[u];
    s.min = std::min(s.min, static_cast<double>(summaries[u]));
  }
  const double n = static_cast<double>(witness_units.size());
  s.mu = sum / n;
  double var = 0.0;
  for (std::size_t u : witness_units) {
    const double d = summaries[u] - s.mu;
    var += d * d;
  }
  s.sigma = std::max(std::sqrt(var / n), sigma_floor);
  return s;
}

double weakening_factor(double v, const LayerWitnessStats& stats, double alpha) {
  return std::exp(-(v - stats.mu) / (alpha * stats.sigma));
}

double weaken(double v, const LayerWitnessStats& stats, double alpha) {
  return weakening_factor(v, stats, alpha) * v;
}

double strengthening_factor(double v, const LayerWitnessStats& stats, double beta,
                            double epsilon) {
  return epsilon + (1.0 - std::exp(-(v - stats.min) / (beta * stats.sigma)));
}

double strengthen(double v, const LayerWitnessStats& stats, double beta, double epsilon) {
  return epsilon * v + (1.0 - std::exp(-(v - stats.min) / (beta * stats.sigma))) * v;
}

Tensor conserve_transform(const Tensor& map, std::size_t margin) {
  if (margin == 0) {
    if (map.rank() != 2) throw InvalidArgument("conserve_transform: expected a rank-2 map");
    return map;
  }
  const Tensor cropped = crop_margin(map, margin);
  return bicubic_resize(cropped, map.dim(0), map.dim(1));
}

namespace {

void scale_unit(Tensor& output, std::size_t unit, double factor) {
  const auto f = static_cast<float>(factor);
  if (output.rank() == 3) {
    const std::size_t plane = output.dim(1) * output.dim(2);
    auto data = output.data().subspan(unit * plane, plane);
    for (float& v : data) v *= f;
  } else {
    output[unit] *= f;
  }
}

}  // namespace

ForwardResult steered_forward(const Model& model, const WitnessSet& witnesses,
                              const SteeringConfig& cfg, const Tensor& image) {
  cfg.validate();
  validate_witnesses(model, witnesses);
  std::map<std::size_t, UnitSet> by_layer;
  for (const auto& n : witnesses.neurons) by_layer[n.layer].push_back(n.unit);

  auto hook = [&](std::size_t layer, Tensor& output) {
    const auto it = by_layer.find(layer);
    if (it == by_layer.end()) return;
    const UnitSet& units = it->second;
    const std::size_t m = model.unit_count(layer);
    std::vector<bool> is_witness(m, false);
    for (std::size_t u : units) is_witness[u] = true;

    const bool pool_map = model.kind(layer) == LayerKind::kMaxPool && output.rank() == 3;
    const bool margin_fits = pool_map && 2 * cfg.pool_margin < std::min(output.dim(1), output.dim(2));
    if (cfg.weaken && cfg.pool_margin > 0 && margin_fits) {
      for (std::size_t c = 0; c < m; ++c) {
        if (!is_witness[c]) output.set_channel(c, conserve_transform(output.channel(c), cfg.pool_margin));
      }
    }

    const std::vector<float> summary = unit_summary(output);
    const LayerWitnessStats stats = witness_stats(layer, summary, units, cfg.sigma_floor);
    for (std::size_t j = 0; j < m; ++j) {
      const double v = summary[j];
      if (is_witness[j]) {
        if (cfg.strengthen) scale_unit(output, j, strengthening_factor(v, stats, cfg.beta, cfg.epsilon));
      } else if (cfg.weaken && v > stats.mu) {
        scale_unit(output, j, weakening_factor(v, stats, cfg.alpha));
      }
    }
  };
  return forward(model, image, hook);
}

}  // namespace wg
