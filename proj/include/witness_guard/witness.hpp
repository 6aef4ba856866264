#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "witness_guard/annotation.hpp"
#include "witness_guard/inference.hpp"
#include "witness_guard/model.hpp"

namespace wg {

struct NeuronId {
  std::size_t layer = 0;
  std::size_t unit = 0;
  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

// Sorted, duplicate-free unit indices within one layer.
using UnitSet = std::vector<std::size_t>;

struct DeltaVector {
  std::size_t layer = 0;
  std::vector<float> deltas;  // |f_j(base) - f_j(mutated)|, one per unit
};

struct VoteCount {
  std::size_t substitution = 0;  // bases whose substitution candidates held the unit
  std::size_t preservation = 0;  // bases whose preservation candidates held the unit
  friend bool operator==(const VoteCount&, const VoteCount&) = default;
};

struct WitnessSet {
  std::string attribute;
  std::vector<NeuronId> neurons;       // sorted by (layer, unit)
  std::map<NeuronId, VoteCount> votes;  // provenance for each neuron
  std::size_t base_count = 0;

  bool contains(const NeuronId& n) const;
  UnitSet units_at(std::size_t layer) const;
  std::vector<std::size_t> layers() const;
  friend bool operator==(const WitnessSet&, const WitnessSet&) = default;
};

// Median with the mean of the two middle values for even lengths.
double median(std::span<const float> values);

std::vector<DeltaVector> record_deltas(const Model& model, const ActivationRecord& base,
                                       const ActivationRecord& mutated);
std::vector<DeltaVector> activation_deltas(const Model& model, const Tensor& base,
                                           const Tensor& mutated);

// Units whose delta is strictly above the layer median.
UnitSet substitution_candidates(const DeltaVector& delta);
// Units whose delta is at or below the layer median.
UnitSet preservation_candidates(const DeltaVector& delta);

// Units present in more than threshold * sets.size() of the sets.
UnitSet vote(std::span<const UnitSet> per_base_sets, double threshold = 0.5);

struct AnnotatedImage {
  Tensor image;
  AttributeAnnotation annotation;
};

struct ExtractionConfig {
  double vote_threshold = 0.5;
  std::size_t donors_per_base = 5;
};

struct LayerExtraction {
  std::size_t layer = 0;
  UnitSet substitution;  // voted substitution candidates
  UnitSet preservation;  // voted preservation candidates
  UnitSet witnesses;     // substitution intersect preservation
};

struct ExtractionResult {
  WitnessSet witnesses;     // both directions
  WitnessSet substitution;  // substitution direction only
  WitnessSet preservation;  // preservation direction only
  std::vector<LayerExtraction> layers;
};

// Bi-directional witness inference for one attribute. For every base, the
// attribute is substituted from each donor and preserved into each donor;
// per-layer deltas are averaged over donors, thresholded at the layer median,
// voted across bases per direction, intersected per layer and united over
// layers. An empty witness set is a valid result.
ExtractionResult extract_witnesses(const Model& model, std::span<const AnnotatedImage> bases,
                                   std::span<const AnnotatedImage> donors,
                                   const std::string& attr,
                                   const ExtractionConfig& cfg = {});

// Throws InvalidArgument if a neuron does not exist in the model or sits in
// the softmax layer.
void validate_witnesses(const Model& model, const WitnessSet& set);

WitnessSet combine_witnesses(std::span<const WitnessSet> sets);

// {"attribute": "nose", "neurons": [[layer, unit], ...], "config": {...}}
nlohmann::json witnesses_to_json(const WitnessSet& set,
                                 const nlohmann::json& config = nlohmann::json::object());
WitnessSet witnesses_from_json(const nlohmann::json& j);
void save_witnesses(const WitnessSet& set, const std::filesystem::path& path,
                    const nlohmann::json& config = nlohmann::json::object());
// Accepts a single witness object, an array of them, or
// {"witnesses": [...]}; multiple entries are combined.
WitnessSet load_witnesses(const std::filesystem::path& path);

}  // namespace wg
