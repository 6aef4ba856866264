#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "witness_guard/inference.hpp"
#include "witness_guard/model.hpp"
#include "witness_guard/witness.hpp"

namespace wg {

struct SteeringConfig {
  double alpha = 100.0;    // weakening magnitude
  double beta = 60.0;      // strengthening slope
  double epsilon = 1.15;   // base strengthening factor
  std::size_t pool_margin = 2;
  double sigma_floor = 1e-6;
  // Mechanism switches used by the ablation modes. Turning `weaken` off also
  // disables the conserving transform, which counts as weakening.
  bool weaken = true;
  bool strengthen = true;

  // Throws InvalidArgument unless alpha, beta > 0, epsilon >= 1 and
  // sigma_floor > 0. alpha may be +inf (weakening factor 1).
  void validate() const;
};

// Statistics over the witness-unit summaries of one layer for one input.
struct LayerWitnessStats {
  std::size_t layer = 0;
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation, floored
  double min = 0.0;
};

LayerWitnessStats witness_stats(std::size_t layer, std::span<const float> summaries,
                                const UnitSet& witness_units, double sigma_floor);

// exp(-(v - mu) / (alpha * sigma)); the pipeline only applies it when v > mu.
double weakening_factor(double v, const LayerWitnessStats& stats, double alpha);
double weaken(double v, const LayerWitnessStats& stats, double alpha);

// epsilon + 1 - exp(-(v - min) / (beta * sigma)).
double strengthening_factor(double v, const LayerWitnessStats& stats, double beta,
                            double epsilon);
double strengthen(double v, const LayerWitnessStats& stats, double beta, double epsilon);

// Crops `margin` from every side and resizes back to the original size with
// bicubic interpolation.
Tensor conserve_transform(const Tensor& map, std::size_t margin);

// Forward pass of the attribute-steered model. At each layer holding witness
// units: non-witness channels of pooling layers are margin-cropped and
// resized, witness statistics are taken from the unit summaries, witness
// units are strengthened and non-witness units above the witness mean are
// weakened. A unit's factor scales its whole channel map. Layers without
// witnesses pass through untouched.
ForwardResult steered_forward(const Model& model, const WitnessSet& witnesses,
                              const SteeringConfig& cfg, const Tensor& image);

}  // namespace wg
