// Acceptance gates: one PASS/FAIL line per criterion, non-zero exit if any
// gate fails or exceeds its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "witness_guard/attack.hpp"
#include "witness_guard/detector.hpp"
#include "witness_guard/inference.hpp"
#include "witness_guard/probe.hpp"
#include "witness_guard/steering.hpp"
#include "witness_guard/synthetic.hpp"
#include "witness_guard/witness.hpp"

namespace {

using namespace wg;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Gate {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor uniform(Shape shape, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = u(rng);
  return t;
}

// Fixtures shared by the planted-model gates.
struct PlantedWorld {
  PlantedSpec spec;
  PlantedModel planted = make_planted_model(spec);
  std::map<std::string, ExtractionResult> extracted;
  WitnessSet combined;

  PlantedWorld() {
    std::vector<AnnotatedImage> bases, donors;
    for (auto& f : make_synthetic_faces(spec, planted, 10, 1001, "base")) bases.push_back({f.image, f.annotation});
    for (auto& f : make_synthetic_faces(spec, planted, 5, 1002, "donor")) donors.push_back({f.image, f.annotation});
    std::vector<WitnessSet> sets;
    for (const auto& [attr, truth] : planted.ground_truth) {
      extracted[attr] = extract_witnesses(planted.model, bases, donors, attr);
      sets.push_back(extracted[attr].witnesses);
    }
    combined = combine_witnesses(sets);
  }
};

PlantedWorld& world() {
  static PlantedWorld w;
  return w;
}

Outcome scalar_transforms() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> value(0.0, 100.0), sig(0.01, 10.0);
  const double alpha = 100.0, beta = 60.0, eps = 1.15;
  double worst = 0.0;
  bool boundary = true;
  for (int i = 0; i < 1000; ++i) {
    const double mu = value(rng) * 0.5, sigma = sig(rng), v = value(rng);
    const double min = std::min(v, value(rng) * 0.5);
    const LayerWitnessStats s{0, mu, sigma, min};
    const long double w_ref = static_cast<long double>(v) *
                              std::exp(-(static_cast<long double>(v) - mu) / (static_cast<long double>(alpha) * sigma));
    const long double s_ref = static_cast<long double>(v) *
                              (eps + 1.0L - std::exp(-(static_cast<long double>(v) - min) / (static_cast<long double>(beta) * sigma)));
    auto rel = [](double got, long double ref) {
      return ref == 0.0L ? std::abs(static_cast<long double>(got)) : std::abs((got - ref) / ref);
    };
    worst = std::max({worst, static_cast<double>(rel(weaken(v, s, alpha), w_ref)),
                      static_cast<double>(rel(strengthen(v, s, beta, eps), s_ref))});
    boundary &= weakening_factor(mu, s, alpha) == 1.0;
    boundary &= strengthening_factor(min, s, beta, eps) == eps;
  }
  return {worst <= 1e-6 && boundary, fmt("max rel err %.2e, boundary identities %s", worst, boundary ? "exact" : "broken")};
}

Outcome median_threshold() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> len(1, 512);
  std::uniform_int_distribution<int> level(0, 31);
  std::size_t mismatches = 0, partition_errors = 0, with_ties = 0;
  for (int i = 0; i < 10000; ++i) {
    DeltaVector dv{0, std::vector<float>(len(rng))};
    for (float& v : dv.deltas) v = static_cast<float>(level(rng)) / 8.0f;
    std::vector<double> sorted(dv.deltas.begin(), dv.deltas.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    with_ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    UnitSet above, below;
    for (std::size_t j = 0; j < n; ++j) (dv.deltas[j] > med ? above : below).push_back(j);
    const UnitSet as = substitution_candidates(dv), ap = preservation_candidates(dv);
    mismatches += as != above || ap != below;
    UnitSet both;
    std::set_intersection(as.begin(), as.end(), ap.begin(), ap.end(), std::back_inserter(both));
    partition_errors += !both.empty() || as.size() + ap.size() != n;
  }
  return {mismatches == 0 && partition_errors == 0,
          fmt("10000 vectors (%zu with ties): %zu mismatches, %zu partition errors", with_ties, mismatches,
              partition_errors)};
}

Outcome planted_recovery() {
  auto& w = world();
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [attr, truth] : w.planted.ground_truth) {
    const UnitSet found = w.extracted.at(attr).witnesses.units_at(w.planted.planted_layer);
    const UnitSet want = truth.units_at(w.planted.planted_layer);
    UnitSet hit;
    std::set_intersection(found.begin(), found.end(), want.begin(), want.end(), std::back_inserter(hit));
    const double precision = found.empty() ? 0.0 : static_cast<double>(hit.size()) / static_cast<double>(found.size());
    const double recall = static_cast<double>(hit.size()) / static_cast<double>(want.size());
    ok &= precision == 1.0 && recall == 1.0;
    detail << attr << " P=" << precision << " R=" << recall << " (" << w.extracted.at(attr).witnesses.neurons.size()
           << " total) ";
  }
  return {ok, detail.str()};
}

Outcome neutral_equivalence() {
  auto& w = world();
  std::mt19937_64 rng(4);
  SteeringConfig cfg;
  cfg.pool_margin = 0;
  std::size_t identical = 0;
  for (int i = 0; i < 100; ++i) {
    const Tensor x = uniform(w.planted.model.input_shape(), rng);
    const auto plain = forward(w.planted.model, x);
    const auto steered = steered_forward(w.planted.model, WitnessSet{}, cfg, x);
    identical += plain.record == steered.record && plain.logits == steered.logits && plain.label == steered.label;
  }
  return {identical == 100, fmt("%zu/100 bit-identical", identical)};
}

constexpr float kEpsilon = 0.2f;
constexpr std::size_t kMaxPixels = 32;

// Attack samples with ground truth, generated until `wanted` succeed.
struct AttackBatch {
  std::vector<Sample> successful;
  std::vector<AttackResult> all;
  std::vector<Tensor> clean;
  std::size_t attempts = 0;
};

AttackBatch generate(AttackKind kind, std::size_t wanted, std::uint64_t seed) {
  auto& w = world();
  AttackConfig cfg;
  cfg.kind = kind;
  cfg.epsilon = kEpsilon;
  cfg.steps = 10;
  cfg.step_size = 0.05f;
  cfg.max_pixels = kMaxPixels;
  AttackBatch batch;
  const auto faces = make_synthetic_faces(w.spec, w.planted, 3 * wanted, seed, "atk");
  for (const auto& f : faces) {
    if (batch.successful.size() == wanted) break;
    cfg.seed = seed + batch.attempts++;
    cfg.source_label = f.label;
    AttackResult r = run_attack(w.planted.model, f.image, cfg);
    if (r.adversarial_label != f.label) batch.successful.push_back({f.annotation.image_id, r.adversarial, f.label});
    batch.clean.push_back(f.image);
    batch.all.push_back(std::move(r));
  }
  return batch;
}

struct Separation {
  EvaluationTable full, stn;
  AttackBatch l0, bim;
  std::vector<Sample> benign;
};

Separation& separation() {
  static Separation s = [] {
    auto& w = world();
    Separation out;
    for (auto& f : make_synthetic_faces(w.spec, w.planted, 100, 2001, "benign")) {
      out.benign.push_back({f.annotation.image_id, f.image, f.label});
    }
    out.l0 = generate(AttackKind::kGreedyL0, 100, 3001);
    out.bim = generate(AttackKind::kBim, 100, 4001);
    const std::vector<AttackSet> sets = {{"greedy_l0", out.l0.successful}, {"bim", out.bim.successful}};
    out.full = evaluate(w.planted.model, w.combined, {}, out.benign, sets, DetectionMode::kFull);
    out.stn = evaluate(w.planted.model, w.combined, {}, out.benign, {}, DetectionMode::kStrengthenOnly);
    return out;
  }();
  return s;
}

Outcome detector_separation() {
  const auto& s = separation();
  const double fpr = *s.full.false_positive.rate();
  bool ok = fpr <= 0.15;
  std::ostringstream detail;
  detail << "FPR " << fpr << " (" << s.full.false_positive.flagged << "/100)";
  for (const auto& row : s.full.attacks) {
    ok &= row.detection.total == 100;
    const double tpr = row.detection.rate().value_or(0.0);
    ok &= tpr - fpr >= 0.4;
    detail << "; " << row.name << " TPR " << tpr << " (" << row.detection.flagged << "/" << row.detection.total
           << ")";
  }
  return {ok, detail.str()};
}

Outcome ablation_ordering() {
  const auto& s = separation();
  const double stn = *s.stn.false_positive.rate(), full = *s.full.false_positive.rate();
  return {stn <= full, fmt("STN FPR %.3f <= full FPR %.3f", stn, full)};
}

Outcome witness_probe() {
  auto& w = world();
  std::size_t wins = 0, total = 0;
  std::ostringstream detail;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    bool seed_ok = true;
    for (const auto& [attr, result] : w.extracted) {
      const auto c = compare_probes(w.spec, w.planted, result.witnesses, 60, seed);
      seed_ok &= c.witness_accuracy >= c.random_accuracy;
      detail << attr[0] << attr.back() << ":" << c.witness_accuracy << "/" << c.random_accuracy << " ";
    }
    wins += seed_ok;
    ++total;
  }
  return {wins == total, fmt("%zu/%zu seeds; ", wins, total) + detail.str()};
}

Outcome attack_validity() {
  const auto& s = separation();
  const AttackBatch fgsm_batch = generate(AttackKind::kFgsm, 100, 5001);
  std::size_t checked = 0, violations = 0;
  auto check_range = [&](const Tensor& t) {
    for (float v : t.data()) violations += v < 0.0f || v > 1.0f;
  };
  for (const AttackBatch* b : {&fgsm_batch, &s.bim}) {
    for (std::size_t i = 0; i < b->all.size(); ++i) {
      violations += linf_distance(b->all[i].adversarial, b->clean[i]) > static_cast<double>(kEpsilon);
      check_range(b->all[i].adversarial);
      ++checked;
    }
  }
  for (std::size_t i = 0; i < s.l0.all.size(); ++i) {
    violations += count_changed(s.l0.all[i].adversarial, s.l0.clean[i]) > kMaxPixels;
    check_range(s.l0.all[i].adversarial);
    ++checked;
  }
  return {violations == 0, fmt("%zu samples, %zu violations", checked, violations)};
}

Outcome engine_numerics() {
  std::mt19937_64 rng(9);
  std::size_t failures = 0;
  // Delta input through a padded conv reproduces the flipped kernel.
  Conv2D conv{uniform({2, 1, 3, 3}, rng, -1, 1), Tensor({2}), 1, 1};
  Tensor delta({1, 5, 5});
  delta(0, 2, 2) = 1.0f;
  const Tensor out = apply_layer(conv, delta);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const std::size_t idx[] = {o, 0, ky, kx};
        failures += out(o, 3 - ky, 3 - kx) != conv.weights.at(idx);
      }
    }
  }
  // Softmax normalization.
  double worst_sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Tensor p = softmax(uniform({16}, rng, -80, 80));
    double sum = 0.0;
    for (float v : p.data()) sum += v;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  failures += worst_sum > 1e-6;
  // Maxpool on random 8x8 maps against a direct scan.
  for (int i = 0; i < 100; ++i) {
    const Tensor x = uniform({1, 8, 8}, rng, -1, 1);
    const Tensor y = apply_layer(MaxPool{2, 2}, x);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        const float m = std::max({x(0, 2 * r, 2 * c), x(0, 2 * r, 2 * c + 1), x(0, 2 * r + 1, 2 * c),
                                  x(0, 2 * r + 1, 2 * c + 1)});
        failures += y(0, r, c) != m;
      }
    }
  }
  // Finite differences against the analytic gradient of a linear model.
  const Tensor wts = uniform({3, 16}, rng, -1, 1);
  const Model lin({1, 4, 4}, {FullyConnected{wts, Tensor({3})}, Softmax{}});
  const Tensor x = uniform({1, 4, 4}, rng);
  const Tensor g = finite_diff_gradient(lin, x, Loss::logit(2));
  double worst_grad = 0.0;
  for (std::size_t i = 0; i < 16; ++i) worst_grad = std::max(worst_grad, static_cast<double>(std::abs(g[i] - wts(2, i))));
  failures += worst_grad > 1e-3;
  return {failures == 0, fmt("softmax |sum-1| %.1e, fd grad err %.1e, %zu mismatches", worst_sum, worst_grad, failures)};
}

}  // namespace

int main() {
  const std::vector<Gate> gates = {
      {"scalar-transform exactness", 1.0, scalar_transforms},
      {"median-threshold oracle", 10.0, median_threshold},
      {"planted-witness recovery", 120.0, planted_recovery},
      {"neutral-config equivalence", 60.0, neutral_equivalence},
      {"detector separation", 600.0, detector_separation},
      {"ablation ordering", 60.0, ablation_ordering},
      {"witness-quality probe", 120.0, witness_probe},
      {"attack harness validity", 120.0, attack_validity},
      {"engine numerics", 10.0, engine_numerics},
  };
  int failed = 0;
  for (const auto& gate : gates) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = gate.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= gate.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %-28s %.2fs/%.0fs  %s%s\n", pass ? "PASS" : "FAIL", gate.name.c_str(), secs,
                gate.budget_seconds, o.detail.c_str(), in_time ? "" : "  [over time budget]");
    std::fflush(stdout);
  }
  std::printf("%d/%zu gates passed\n", static_cast<int>(gates.size()) - failed, gates.size());
  return failed == 0 ? 0 : 1;
}
