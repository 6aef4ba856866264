#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "witness_guard/annotation.hpp"
#include "witness_guard/model.hpp"
#include "witness_guard/witness.hpp"

namespace wg {

// Layout of a planted-witness toy network and its synthetic face images.
//
// Network: conv3x3(1 ch, pad 1) -> relu -> maxpool 2/2 -> fc -> relu -> fc
// -> softmax. The hidden fc layer holds `units_per_attribute` planted units
// per region, wired only to pooled cells whose receptive field lies inside
// that region, followed by `distractor_units` units that read every cell.
// Class logits combine a planted read-out (balanced +/-1 class codes) with a
// distractor read-out (equal-norm centroid templates). Distractors carry a
// large tonic bias that places their activations far above the planted ones.
struct PlantedSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::map<std::string, Box> regions = {
      {"left_eye", {1, 1, 6, 6}},
      {"right_eye", {9, 1, 6, 6}},
      {"nose", {1, 9, 6, 6}},
      {"mouth", {9, 9, 6, 6}},
  };
  std::size_t units_per_attribute = 2;
  std::size_t distractor_units = 4;
  std::size_t class_count = 4;
  std::uint64_t seed = 7;

  // Image generator.
  float level_low = 0.2f;
  float level_high = 0.8f;
  float background = 0.5f;
  float noise = 0.04f;

  // Network read-out.
  float planted_gain = 4.0f;
  float distractor_gain = 16.0f;    // scale of distractor input weights
  float distractor_readout = 0.3f;  // scale of distractor logit weights
  float distractor_tonic = 30.0f;   // distractor activation on the mean face

  // Throws InvalidArgument for overlapping/out-of-bounds regions, unknown
  // attribute names or class_count < 2.
  void validate() const;
};

struct PlantedModel {
  Model model;
  std::size_t planted_layer = 0;  // post-ReLU hidden fc layer
  std::map<std::string, WitnessSet> ground_truth;
  // class -> attribute -> per-band level (one band per planted unit)
  std::vector<std::map<std::string, std::vector<float>>> prototypes;
};

PlantedModel make_planted_model(const PlantedSpec& spec);

struct SyntheticFace {
  Tensor image;
  AttributeAnnotation annotation;
  std::size_t label = 0;
};

// The noiseless face of one class.
Tensor prototype_face(const PlantedSpec& spec, const PlantedModel& planted, std::size_t label);

// Faces cycle through the classes (label = index mod class_count); pixel
// noise comes from `seed`. Identical spec and seed give identical images.
std::vector<SyntheticFace> make_synthetic_faces(const PlantedSpec& spec,
                                                const PlantedModel& planted,
                                                std::size_t count, std::uint64_t seed,
                                                const std::string& id_prefix = "face");

// Zeroes the attribute's rectangle (the attribute is "absent").
Tensor remove_attribute(const Tensor& image, const AttributeAnnotation& ann,
                        const std::string& attr);

}  // namespace wg
