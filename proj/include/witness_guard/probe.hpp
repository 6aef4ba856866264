#pragma once

#include <cstdint>
#include <vector>

#include "witness_guard/synthetic.hpp"
#include "witness_guard/witness.hpp"

namespace wg {

// Binary logistic regression on standardized features, fitted by full-batch
// gradient descent.
struct LogisticProbe {
  std::vector<double> mean, scale, weights;
  double bias = 0.0;

  double probability(std::span<const float> features) const;
  bool predict(std::span<const float> features) const { return probability(features) > 0.5; }
};

struct ProbeConfig {
  std::size_t epochs = 500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
};

LogisticProbe train_probe(const std::vector<std::vector<float>>& features,
                          const std::vector<bool>& labels, const ProbeConfig& cfg = {});
double probe_accuracy(const LogisticProbe& probe, const std::vector<std::vector<float>>& features,
                      const std::vector<bool>& labels);

// Unit summaries of `units` (in the given order) for one image.
std::vector<float> unit_features(const Model& model, const Tensor& image,
                                 const std::vector<NeuronId>& units);

struct ProbeComparison {
  std::string attribute;
  std::size_t unit_count = 0;
  double witness_accuracy = 0.0;
  double random_accuracy = 0.0;
  std::vector<NeuronId> random_units;
};

// Presence/absence task for one attribute on synthetic faces: positives are
// intact faces, negatives have the region zeroed. Half of the `count` faces
// train both probes, the other half is held out. The random baseline draws
// as many units as `witnesses` holds from the non-witness recordable units.
ProbeComparison compare_probes(const PlantedSpec& spec, const PlantedModel& planted,
                               const WitnessSet& witnesses, std::size_t count,
                               std::uint64_t seed, const ProbeConfig& cfg = {});

}  // namespace wg
