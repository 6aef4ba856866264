#include "witness_guard/probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "witness_guard/inference.hpp"

namespace wg {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double LogisticProbe::probability(std::span<const float> features) const {
  if (features.size() != weights.size()) throw InvalidArgument("probe feature size mismatch");
  double z = bias;
  for (std::size_t k = 0; k < features.size(); ++k) {
    z += weights[k] * (features[k] - mean[k]) / scale[k];
  }
  return sigmoid(z);
}

LogisticProbe train_probe(const std::vector<std::vector<float>>& features,
                          const std::vector<bool>& labels, const ProbeConfig& cfg) {
  if (features.empty() || features.size() != labels.size()) {
    throw InvalidArgument("train_probe needs one label per non-empty feature row");
  }
  const std::size_t n = features.size(), d = features.front().size();
  LogisticProbe p;
  p.mean.assign(d, 0.0);
  p.scale.assign(d, 0.0);
  p.weights.assign(d, 0.0);
  for (const auto& row : features) {
    if (row.size() != d) throw InvalidArgument("train_probe: ragged feature rows");
    for (std::size_t k = 0; k < d; ++k) p.mean[k] += row[k];
  }
  for (double& m : p.mean) m /= static_cast<double>(n);
  for (const auto& row : features) {
    for (std::size_t k = 0; k < d; ++k) p.scale[k] += (row[k] - p.mean[k]) * (row[k] - p.mean[k]);
  }
  for (double& s : p.scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 1.0;
  }

  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) x[i][k] = (features[i][k] - p.mean[k]) / p.scale[k];
  }
  std::vector<double> grad(d);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = p.bias;
      for (std::size_t k = 0; k < d; ++k) z += p.weights[k] * x[i][k];
      const double err = sigmoid(z) - (labels[i] ? 1.0 : 0.0);
      for (std::size_t k = 0; k < d; ++k) grad[k] += err * x[i][k];
      grad_bias += err;
    }
    for (std::size_t k = 0; k < d; ++k) {
      p.weights[k] -= cfg.learning_rate * (grad[k] / static_cast<double>(n) + cfg.l2 * p.weights[k]);
    }
    p.bias -= cfg.learning_rate * grad_bias / static_cast<double>(n);
  }
  return p;
}

double probe_accuracy(const LogisticProbe& probe, const std::vector<std::vector<float>>& features,
                      const std::vector<bool>& labels) {
  if (features.empty() || features.size() != labels.size()) {
    throw InvalidArgument("probe_accuracy needs one label per non-empty feature row");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    correct += probe.predict(features[i]) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(features.size());
}

std::vector<float> unit_features(const Model& model, const Tensor& image,
                                 const std::vector<NeuronId>& units) {
  const auto record = forward(model, image).record;
  std::vector<float> out;
  out.reserve(units.size());
  for (const auto& n : units) out.push_back(record.layers.at(n.layer).summary.at(n.unit));
  return out;
}

ProbeComparison compare_probes(const PlantedSpec& spec, const PlantedModel& planted,
                               const WitnessSet& witnesses, std::size_t count,
                               std::uint64_t seed, const ProbeConfig& cfg) {
  if (count < 4) throw InvalidArgument("compare_probes needs at least 4 faces");
  if (witnesses.neurons.empty()) throw InvalidArgument("compare_probes: empty witness set");
  const Model& model = planted.model;
  std::vector<NeuronId> pool;
  for (std::size_t l : model.recordable_layers()) {
    for (std::size_t u = 0; u < model.unit_count(l); ++u) {
      if (!witnesses.contains({l, u})) pool.push_back({l, u});
    }
  }
  if (pool.size() < witnesses.neurons.size()) {
    throw InvalidArgument("compare_probes: not enough non-witness units for a baseline");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  ProbeComparison out;
  out.attribute = witnesses.attribute;
  out.unit_count = witnesses.neurons.size();
  out.random_units.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(out.unit_count));
  std::sort(out.random_units.begin(), out.random_units.end());

  const auto faces = make_synthetic_faces(spec, planted, count, seed, "probe");
  std::vector<std::vector<float>> wit_train, wit_test, rnd_train, rnd_test;
  std::vector<bool> y_train, y_test;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const bool train = i < count / 2;
    const Tensor absent = remove_attribute(faces[i].image, faces[i].annotation, witnesses.attribute);
    for (const auto& [image, present] : {std::pair{&faces[i].image, true}, {&absent, false}}) {
      (train ? wit_train : wit_test).push_back(unit_features(model, *image, witnesses.neurons));
      (train ? rnd_train : rnd_test).push_back(unit_features(model, *image, out.random_units));
      (train ? y_train : y_test).push_back(present);
    }
  }
  out.witness_accuracy = probe_accuracy(train_probe(wit_train, y_train, cfg), wit_test, y_test);
  out.random_accuracy = probe_accuracy(train_probe(rnd_train, y_train, cfg), rnd_test, y_test);
  return out;
}

}  // namespace wg
