#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "witness_guard/model.hpp"
#include "witness_guard/tensor.hpp"

namespace wg {

enum class AttackKind { kFgsm, kBim, kGreedyL0 };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::kFgsm;
  float epsilon = 0.05f;     // L-inf budget (fgsm, bim)
  std::size_t steps = 10;    // bim
  float step_size = 0.01f;   // bim
  std::size_t max_pixels = 32;  // greedy_l0: changed elements allowed
  float pixel_step = 1.0f;      // greedy_l0: tried values are x -/+ pixel_step, clamped
  std::size_t candidates = 64;  // greedy_l0: elements scored per iteration; 0 = all
  std::optional<std::size_t> target;  // targeted attack when set
  // Class whose loss an untargeted attack ascends; defaults to the model's
  // prediction on the clean image.
  std::optional<std::size_t> source_label;
  float gradient_step = 1e-3f;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AttackResult {
  Tensor adversarial;
  std::size_t original_label = 0;     // model prediction on the clean image
  std::size_t adversarial_label = 0;  // model prediction on the output
  bool success = false;  // targeted: reached target; untargeted: label changed
  std::size_t changed_pixels = 0;
  double linf = 0.0;
};

// x' = clamp(x + eps * sign(grad)). Untargeted ascends the cross-entropy of
// the source class, targeted descends that of the target. Elements with a
// zero gradient are left unchanged.
Tensor fgsm(const Model& model, const Tensor& image, const AttackConfig& cfg);

// Iterated fgsm with `step_size`, projected back into the eps-ball around the
// input and into [0, 1] after every step.
Tensor bim(const Model& model, const Tensor& image, const AttackConfig& cfg);

// Gradient-free L0 search: each iteration scores a seeded subsample of the
// unchanged elements at x -/+ pixel_step and commits the best loss
// improvement, stopping when the attack succeeds or max_pixels elements
// have been changed.
Tensor greedy_l0(const Model& model, const Tensor& image, const AttackConfig& cfg);

// Dispatches on cfg.kind and labels the outcome.
AttackResult run_attack(const Model& model, const Tensor& image, const AttackConfig& cfg);

// Summary statistics of a perturbation.
std::size_t count_changed(const Tensor& a, const Tensor& b);
double linf_distance(const Tensor& a, const Tensor& b);

// Clips `candidate` into the eps-ball around `origin` (exactly, in float)
// and into [0, 1].
void project_linf(Tensor& candidate, const Tensor& origin, float epsilon);

}  // namespace wg
