#include "witness_guard/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "witness_guard/inference.hpp"

namespace wg {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kBim: return "bim";
    case AttackKind::kGreedyL0: return "greedy_l0";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "bim") return AttackKind::kBim;
  if (name == "greedy_l0") return AttackKind::kGreedyL0;
  throw InvalidArgument("unknown attack kind '" + name + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0f)) throw InvalidArgument("attack epsilon must be >= 0");
  if (kind == AttackKind::kBim) {
    if (steps < 1) throw InvalidArgument("bim needs steps >= 1");
    if (!(step_size > 0.0f)) throw InvalidArgument("bim needs a positive step size");
  }
  if (kind == AttackKind::kGreedyL0 && !(pixel_step > 0.0f)) {
    throw InvalidArgument("greedy_l0 needs a positive pixel step");
  }
  if (!(gradient_step > 0.0f)) throw InvalidArgument("gradient step must be positive");
}

std::size_t count_changed(const Tensor& a, const Tensor& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

double linf_distance(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

void project_linf(Tensor& candidate, const Tensor& origin, float epsilon) {
  const double eps = epsilon;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    const float x = origin[i];
    float lo = x - epsilon;
    float hi = x + epsilon;
    // Float rounding may put the nominal bounds just outside the ball.
    while (static_cast<double>(x) - lo > eps) lo = std::nextafter(lo, x);
    while (static_cast<double>(hi) - x > eps) hi = std::nextafter(hi, x);
    lo = std::max(lo, 0.0f);
    hi = std::min(hi, 1.0f);
    candidate[i] = std::clamp(candidate[i], std::min(lo, hi), hi);
  }
}

namespace {

struct Objective {
  Loss loss;
  double direction;  // +1 ascend (untargeted), -1 descend (targeted)
};

Objective objective_for(const Model& model, const Tensor& image, const AttackConfig& cfg) {
  if (cfg.target) {
    if (*cfg.target >= model.class_count()) throw InvalidArgument("attack target out of range");
    return {Loss::cross_entropy(*cfg.target), -1.0};
  }
  const std::size_t source = cfg.source_label ? *cfg.source_label : predict(model, image);
  if (source >= model.class_count()) throw InvalidArgument("attack source label out of range");
  return {Loss::cross_entropy(source), 1.0};
}

float sign(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

// One signed-gradient step of size `step` followed by projection.
Tensor signed_step(const Model& model, const Tensor& current, const Tensor& origin,
                   const Objective& obj, float step, float epsilon, float h) {
  const Tensor grad = finite_diff_gradient(model, current, obj.loss, h);
  Tensor next = current;
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = current[i] + static_cast<float>(obj.direction) * step * sign(grad[i]);
  }
  project_linf(next, origin, epsilon);
  return next;
}

bool reached(const AttackConfig& cfg, std::size_t original, std::size_t now) {
  return cfg.target ? now == *cfg.target : now != original;
}

}  // namespace

Tensor fgsm(const Model& model, const Tensor& image, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0f) return image;
  const Objective obj = objective_for(model, image, cfg);
  return signed_step(model, image, image, obj, cfg.epsilon, cfg.epsilon, cfg.gradient_step);
}

Tensor bim(const Model& model, const Tensor& image, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon == 0.0f) return image;
  const Objective obj = objective_for(model, image, cfg);
  Tensor current = image;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    current = signed_step(model, current, image, obj, cfg.step_size, cfg.epsilon,
                          cfg.gradient_step);
  }
  return current;
}

Tensor greedy_l0(const Model& model, const Tensor& image, const AttackConfig& cfg) {
  cfg.validate();
  Tensor current = image;
  if (cfg.max_pixels == 0) return current;
  const Objective obj = objective_for(model, image, cfg);
  const std::size_t original = predict(model, image);
  std::mt19937_64 rng(cfg.seed);

  std::vector<std::size_t> untouched(image.size());
  std::iota(untouched.begin(), untouched.end(), std::size_t{0});
  auto score = [&](const Tensor& t) {
    return obj.direction * evaluate_loss(model, t, obj.loss);
  };
  double current_score = score(current);
  std::size_t changed = 0;
  std::size_t stalls = 0;
  constexpr std::size_t kMaxStalls = 4;

  while (changed < cfg.max_pixels && !untouched.empty()) {
    std::shuffle(untouched.begin(), untouched.end(), rng);
    const std::size_t n = cfg.candidates == 0 ? untouched.size()
                                              : std::min(cfg.candidates, untouched.size());
    double best_gain = 0.0;
    std::size_t best_pos = untouched.size();
    float best_value = 0.0f;
    Tensor probe = current;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = untouched[k];
      const float x = current[i];
      for (float v : {std::clamp(x - cfg.pixel_step, 0.0f, 1.0f),
                      std::clamp(x + cfg.pixel_step, 0.0f, 1.0f)}) {
        if (v == x) continue;
        probe[i] = v;
        const double gain = score(probe) - current_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_pos = k;
          best_value = v;
        }
      }
      probe[i] = x;
    }
    if (best_pos == untouched.size()) {
      if (++stalls >= kMaxStalls) break;
      continue;
    }
    stalls = 0;
    current[untouched[best_pos]] = best_value;
    untouched.erase(untouched.begin() + static_cast<std::ptrdiff_t>(best_pos));
    ++changed;
    current_score = score(current);
    if (reached(cfg, original, predict(model, current))) break;
  }
  return current;
}

AttackResult run_attack(const Model& model, const Tensor& image, const AttackConfig& cfg) {
  AttackResult r;
  r.original_label = predict(model, image);
  switch (cfg.kind) {
    case AttackKind::kFgsm: r.adversarial = fgsm(model, image, cfg); break;
    case AttackKind::kBim: r.adversarial = bim(model, image, cfg); break;
    case AttackKind::kGreedyL0: r.adversarial = greedy_l0(model, image, cfg); break;
  }
  r.adversarial_label = predict(model, r.adversarial);
  r.success = reached(cfg, r.original_label, r.adversarial_label);
  r.changed_pixels = count_changed(image, r.adversarial);
  r.linf = linf_distance(image, r.adversarial);
  return r;
}

}  // namespace wg
