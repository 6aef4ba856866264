#include "witness_guard/witness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "witness_guard/mutation.hpp"

namespace wg {

bool WitnessSet::contains(const NeuronId& n) const {
  return std::binary_search(neurons.begin(), neurons.end(), n);
}

UnitSet WitnessSet::units_at(std::size_t layer) const {
  UnitSet out;
  for (const auto& n : neurons) {
    if (n.layer == layer) out.push_back(n.unit);
  }
  return out;
}

std::vector<std::size_t> WitnessSet::layers() const {
  std::vector<std::size_t> out;
  for (const auto& n : neurons) {
    if (out.empty() || out.back() != n.layer) out.push_back(n.layer);
  }
  return out;
}

double median(std::span<const float> values) {
  if (values.empty()) throw InvalidArgument("median of an empty vector");
  std::vector<float> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<DeltaVector> record_deltas(const Model& model, const ActivationRecord& base,
                                       const ActivationRecord& mutated) {
  std::vector<DeltaVector> out;
  for (std::size_t l : model.recordable_layers()) {
    const auto& a = base.layers.at(l).summary;
    const auto& b = mutated.layers.at(l).summary;
    DeltaVector d{l, std::vector<float>(a.size())};
    for (std::size_t j = 0; j < a.size(); ++j) d.deltas[j] = std::abs(a[j] - b[j]);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DeltaVector> activation_deltas(const Model& model, const Tensor& base,
                                           const Tensor& mutated) {
  return record_deltas(model, forward(model, base).record, forward(model, mutated).record);
}

UnitSet substitution_candidates(const DeltaVector& delta) {
  UnitSet out;
  if (delta.deltas.empty()) return out;
  const double m = median(delta.deltas);
  for (std::size_t j = 0; j < delta.deltas.size(); ++j) {
    if (static_cast<double>(delta.deltas[j]) > m) out.push_back(j);
  }
  return out;
}

UnitSet preservation_candidates(const DeltaVector& delta) {
  UnitSet out;
  if (delta.deltas.empty()) return out;
  const double m = median(delta.deltas);
  for (std::size_t j = 0; j < delta.deltas.size(); ++j) {
    if (static_cast<double>(delta.deltas[j]) <= m) out.push_back(j);
  }
  return out;
}

UnitSet vote(std::span<const UnitSet> per_base_sets, double threshold) {
  if (per_base_sets.empty()) throw InvalidArgument("vote needs at least one set");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("vote threshold must be in (0, 1]");
  }
  std::map<std::size_t, std::size_t> counts;
  for (const auto& s : per_base_sets) {
    for (std::size_t u : std::set<std::size_t>(s.begin(), s.end())) ++counts[u];
  }
  const double needed = threshold * static_cast<double>(per_base_sets.size());
  UnitSet out;
  for (const auto& [unit, count] : counts) {
    if (static_cast<double>(count) > needed) out.push_back(unit);
  }
  return out;
}

namespace {

// Mean of per-donor delta vectors, layer by layer.
std::vector<DeltaVector> mean_deltas(const std::vector<std::vector<DeltaVector>>& per_donor) {
  std::vector<DeltaVector> out = per_donor.front();
  for (std::size_t li = 0; li < out.size(); ++li) {
    std::vector<double> acc(out[li].deltas.size(), 0.0);
    for (const auto& donor : per_donor) {
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += donor[li].deltas[j];
    }
    for (std::size_t j = 0; j < acc.size(); ++j) {
      out[li].deltas[j] = static_cast<float>(acc[j] / static_cast<double>(per_donor.size()));
    }
  }
  return out;
}

UnitSet intersect(const UnitSet& a, const UnitSet& b) {
  UnitSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

ExtractionResult extract_witnesses(const Model& model, std::span<const AnnotatedImage> bases,
                                   std::span<const AnnotatedImage> donors,
                                   const std::string& attr, const ExtractionConfig& cfg) {
  if (bases.empty()) throw InvalidArgument("extract_witnesses: no base images");
  if (donors.empty()) throw InvalidArgument("extract_witnesses: no donor images");
  if (cfg.donors_per_base == 0) throw InvalidArgument("donors_per_base must be >= 1");

  const std::vector<std::size_t> layers = model.recordable_layers();
  // [layer position][base] -> candidate set
  std::vector<std::vector<UnitSet>> as_sets(layers.size()), ap_sets(layers.size());

  for (const auto& base : bases) {
    base.annotation.box(attr);
    const ActivationRecord base_record = forward(model, base.image).record;
    std::vector<std::vector<DeltaVector>> as_deltas, ap_deltas;
    for (const auto& donor : donors) {
      if (as_deltas.size() == cfg.donors_per_base) break;
      if (!base.annotation.image_id.empty() &&
          donor.annotation.image_id == base.annotation.image_id) {
        continue;
      }
      const Tensor substituted =
          substitute_attribute(base.image, base.annotation, donor.image, donor.annotation, attr);
      const Tensor preserved =
          preserve_attribute(base.image, base.annotation, donor.image, donor.annotation, attr);
      as_deltas.push_back(record_deltas(model, base_record, forward(model, substituted).record));
      ap_deltas.push_back(record_deltas(model, base_record, forward(model, preserved).record));
    }
    if (as_deltas.empty()) {
      throw InvalidArgument("extract_witnesses: base '" + base.annotation.image_id +
                            "' has no donor other than itself");
    }
    const auto as_mean = mean_deltas(as_deltas);
    const auto ap_mean = mean_deltas(ap_deltas);
    for (std::size_t li = 0; li < layers.size(); ++li) {
      as_sets[li].push_back(substitution_candidates(as_mean[li]));
      ap_sets[li].push_back(preservation_candidates(ap_mean[li]));
    }
  }

  ExtractionResult result;
  result.witnesses.attribute = result.substitution.attribute =
      result.preservation.attribute = attr;
  result.witnesses.base_count = result.substitution.base_count =
      result.preservation.base_count = bases.size();

  for (std::size_t li = 0; li < layers.size(); ++li) {
    const std::size_t l = layers[li];
    std::map<std::size_t, VoteCount> counts;
    for (const auto& s : as_sets[li]) for (std::size_t u : s) ++counts[u].substitution;
    for (const auto& s : ap_sets[li]) for (std::size_t u : s) ++counts[u].preservation;

    LayerExtraction layer{l, vote(as_sets[li], cfg.vote_threshold),
                          vote(ap_sets[li], cfg.vote_threshold), {}};
    layer.witnesses = intersect(layer.substitution, layer.preservation);

    auto add = [&](WitnessSet& set, const UnitSet& units) {
      for (std::size_t u : units) {
        const NeuronId id{l, u};
        set.neurons.push_back(id);
        set.votes[id] = counts[u];
      }
    };
    add(result.witnesses, layer.witnesses);
    add(result.substitution, layer.substitution);
    add(result.preservation, layer.preservation);
    result.layers.push_back(std::move(layer));
  }
  return result;
}

void validate_witnesses(const Model& model, const WitnessSet& set) {
  for (const auto& n : set.neurons) {
    if (n.layer >= model.layer_count()) {
      throw InvalidArgument("witness layer " + std::to_string(n.layer) + " does not exist");
    }
    if (model.kind(n.layer) == LayerKind::kSoftmax) {
      throw InvalidArgument("witness neurons cannot live in the softmax layer");
    }
    if (n.unit >= model.unit_count(n.layer)) {
      throw InvalidArgument("witness unit " + std::to_string(n.unit) + " out of range at layer " +
                            std::to_string(n.layer));
    }
  }
}

WitnessSet combine_witnesses(std::span<const WitnessSet> sets) {
  WitnessSet out;
  std::set<NeuronId> all;
  for (const auto& s : sets) {
    if (!out.attribute.empty() && !s.attribute.empty()) out.attribute += "+";
    out.attribute += s.attribute;
    all.insert(s.neurons.begin(), s.neurons.end());
    for (const auto& [id, v] : s.votes) {
      auto& dst = out.votes[id];
      dst.substitution += v.substitution;
      dst.preservation += v.preservation;
    }
    out.base_count += s.base_count;
  }
  out.neurons.assign(all.begin(), all.end());
  return out;
}

nlohmann::json witnesses_to_json(const WitnessSet& set, const nlohmann::json& config) {
  nlohmann::json neurons = nlohmann::json::array();
  nlohmann::json votes = nlohmann::json::array();
  for (const auto& n : set.neurons) {
    neurons.push_back({n.layer, n.unit});
    if (auto it = set.votes.find(n); it != set.votes.end()) {
      votes.push_back({n.layer, n.unit, it->second.substitution, it->second.preservation});
    }
  }
  nlohmann::json j = {{"attribute", set.attribute}, {"neurons", neurons}, {"config", config}};
  if (!votes.empty()) {
    j["votes"] = votes;
    j["bases"] = set.base_count;
  }
  return j;
}

WitnessSet witnesses_from_json(const nlohmann::json& j) {
  WitnessSet set;
  try {
    set.attribute = j.at("attribute").get<std::string>();
    std::set<NeuronId> unique;
    for (const auto& n : j.at("neurons")) {
      if (!n.is_array() || n.size() != 2) throw InvalidArgument("neuron must be [layer, unit]");
      unique.insert({n[0].get<std::size_t>(), n[1].get<std::size_t>()});
    }
    set.neurons.assign(unique.begin(), unique.end());
    if (j.contains("votes")) {
      for (const auto& v : j["votes"]) {
        set.votes[{v.at(0).get<std::size_t>(), v.at(1).get<std::size_t>()}] =
            VoteCount{v.at(2).get<std::size_t>(), v.at(3).get<std::size_t>()};
      }
    }
    set.base_count = j.value("bases", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed witness file: ") + e.what());
  }
  return set;
}

void save_witnesses(const WitnessSet& set, const std::filesystem::path& path,
                    const nlohmann::json& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << witnesses_to_json(set, config).dump(2) << '\n';
}

WitnessSet load_witnesses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open witness file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  const nlohmann::json* list = nullptr;
  if (j.is_array()) list = &j;
  else if (j.is_object() && j.contains("witnesses")) list = &j["witnesses"];
  if (!list) return witnesses_from_json(j);
  std::vector<WitnessSet> sets;
  for (const auto& entry : *list) sets.push_back(witnesses_from_json(entry));
  return combine_witnesses(sets);
}

}  // namespace wg
