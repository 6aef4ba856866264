#pragma once

#include <filesystem>

#include "witness_guard/steering.hpp"
#include "witness_guard/synthetic.hpp"

namespace wg {

// Reads SteeringConfig fields from a TOML file. Keys may sit at the top level
// or under a [steering] table; missing keys keep their defaults.
//
//   alpha = 100.0
//   beta = 60.0
//   epsilon = 1.15
//   pool_margin = 2
//   sigma_floor = 1e-6
//   weaken = true
//   strengthen = true
SteeringConfig load_steering_config(const std::filesystem::path& path,
                                    SteeringConfig base = {});

// Reads a PlantedSpec from TOML:
//
//   height = 16
//   width = 16
//   units_per_attribute = 2
//   distractor_units = 4
//   class_count = 4
//   seed = 7
//   noise = 0.04
//   [regions]
//   nose = [1, 9, 6, 6]   # x, y, w, h
//
// A [regions] table replaces the default regions entirely.
PlantedSpec load_planted_spec(const std::filesystem::path& path, PlantedSpec base = {});

}  // namespace wg
