#include "witness_guard/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "witness_guard/inference.hpp"

namespace wg {

namespace {

constexpr std::size_t kConvPad = 1;
constexpr std::size_t kPoolWindow = 2;
constexpr std::size_t kPoolStride = 2;

constexpr std::ptrdiff_t kKernel = 3;

// Input rows [first, last] seen by pooled cell i along one axis (may extend
// into the zero padding).
std::pair<std::ptrdiff_t, std::ptrdiff_t> receptive_span(std::size_t i) {
  const auto start = static_cast<std::ptrdiff_t>(i * kPoolStride);
  const auto pad = static_cast<std::ptrdiff_t>(kConvPad);
  return {start - pad, start + static_cast<std::ptrdiff_t>(kPoolWindow) - 1 + kKernel - 1 - pad};
}

bool cell_inside(const Box& b, std::size_t ci, std::size_t cj) {
  const auto [r0, r1] = receptive_span(ci);
  const auto [c0, c1] = receptive_span(cj);
  const auto y = static_cast<std::ptrdiff_t>(b.y), x = static_cast<std::ptrdiff_t>(b.x);
  return r0 >= y && r1 < y + static_cast<std::ptrdiff_t>(b.h) && c0 >= x &&
         c1 < x + static_cast<std::ptrdiff_t>(b.w);
}

// Balanced +/-1 codes (half of the bits high) with large pairwise distance.
std::vector<std::vector<int>> class_codes(std::size_t classes, std::size_t bits,
                                          std::mt19937_64& rng) {
  std::vector<int> pattern(bits, -1);
  std::fill(pattern.begin(), pattern.begin() + static_cast<std::ptrdiff_t>(bits / 2), 1);
  std::vector<std::vector<int>> codes;
  std::size_t min_distance = bits / 2;
  std::size_t failures = 0;
  while (codes.size() < classes) {
    std::shuffle(pattern.begin(), pattern.end(), rng);
    bool ok = true;
    for (const auto& c : codes) {
      std::size_t d = 0;
      for (std::size_t k = 0; k < bits; ++k) d += c[k] != pattern[k];
      if (d < min_distance) { ok = false; break; }
    }
    if (ok) {
      codes.push_back(pattern);
      failures = 0;
    } else if (++failures > 2000) {
      if (min_distance == 1) throw InvalidArgument("too many classes for the planted code length");
      --min_distance;
      failures = 0;
    }
  }
  return codes;
}

void paint_face(Tensor& image, const PlantedSpec& spec,
                const std::map<std::string, std::vector<float>>& levels) {
  for (const auto& [attr, box] : spec.regions) {
    const auto& bands = levels.at(attr);
    for (std::size_t r = 0; r < box.h; ++r) {
      const float level = bands[r * bands.size() / box.h];
      for (std::size_t c = 0; c < box.w; ++c) image(0, box.y + r, box.x + c) = level;
    }
  }
}

}  // namespace

void PlantedSpec::validate() const {
  if (class_count < 2) throw InvalidArgument("planted spec needs class_count >= 2");
  if (units_per_attribute < 1) throw InvalidArgument("planted spec needs units_per_attribute >= 1");
  if (height < 4 || width < 4 || height % kPoolStride || width % kPoolStride) {
    throw InvalidArgument("planted spec needs an even input size of at least 4x4");
  }
  if (regions.empty()) throw InvalidArgument("planted spec has no regions");
  for (auto a = regions.begin(); a != regions.end(); ++a) {
    if (!is_known_attribute(a->first)) {
      throw InvalidArgument("planted spec: unknown attribute '" + a->first + "'");
    }
    const Box& b = a->second;
    if (b.w < 2 || b.h < 2 || b.x + b.w > width || b.y + b.h > height) {
      throw InvalidArgument("planted spec: region '" + a->first + "' out of bounds");
    }
    for (auto o = std::next(a); o != regions.end(); ++o) {
      if (b.overlaps(o->second)) {
        throw InvalidArgument("planted spec: regions '" + a->first + "' and '" + o->first +
                              "' overlap");
      }
    }
  }
}

PlantedModel make_planted_model(const PlantedSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t ph = spec.height / kPoolStride, pw = spec.width / kPoolStride;
  const std::size_t cells = ph * pw;
  const std::size_t per_attr = spec.units_per_attribute;
  const std::size_t planted = spec.regions.size() * per_attr;
  const std::size_t hidden = planted + spec.distractor_units;

  std::map<std::string, WitnessSet> ground_truth;
  std::vector<std::map<std::string, std::vector<float>>> prototypes;

  // Front end: mild center-weighted smoothing, identical for every class.
  Conv2D conv{Tensor({1, 1, 3, 3}, {0.0f, 0.1f, 0.0f, 0.1f, 0.6f, 0.1f, 0.0f, 0.1f, 0.0f}),
              Tensor({1}, 0.0f), 1, static_cast<std::uint32_t>(kConvPad)};
  const std::vector<LayerSpec> front = {conv, ReLU{}, MaxPool{kPoolWindow, kPoolStride}};

  // Planted wiring.
  FullyConnected fc1{Tensor({hidden, cells}, 0.0f), Tensor({hidden}, 0.0f)};
  std::size_t unit = 0;
  const std::size_t planted_layer = 4;  // relu after fc1
  for (const auto& [attr, box] : spec.regions) {
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < ph; ++i) {
      for (std::size_t j = 0; j < pw; ++j) {
        if (cell_inside(box, i, j)) inside.push_back(i * pw + j);
      }
    }
    if (inside.size() < per_attr) {
      throw InvalidArgument("planted spec: region '" + attr + "' too small for " +
                            std::to_string(per_attr) + " planted units");
    }
    WitnessSet truth;
    truth.attribute = attr;
    for (std::size_t k = 0; k < per_attr; ++k, ++unit) {
      const std::size_t begin = k * inside.size() / per_attr;
      const std::size_t end = (k + 1) * inside.size() / per_attr;
      for (std::size_t c = begin; c < end; ++c) {
        fc1.weights(unit, inside[c]) = 1.0f / static_cast<float>(end - begin);
      }
      truth.neurons.push_back({planted_layer, unit});
    }
    ground_truth[attr] = std::move(truth);
  }

  // Class prototypes from balanced codes: one band level per planted unit.
  const auto codes = class_codes(spec.class_count, planted, rng);
  prototypes.resize(spec.class_count);
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    std::size_t bit = 0;
    for (const auto& [attr, box] : spec.regions) {
      auto& bands = prototypes[c][attr];
      for (std::size_t k = 0; k < per_attr; ++k, ++bit) {
        bands.push_back(codes[c][bit] > 0 ? spec.level_high : spec.level_low);
      }
    }
  }

  // Pooled features of each noiseless prototype.
  std::vector<Tensor> pooled;
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    Tensor face({1, spec.height, spec.width}, spec.background);
    paint_face(face, spec, prototypes[c]);
    Tensor t = face;
    for (const auto& layer : front) t = apply_layer(layer, t);
    pooled.push_back(std::move(t));
  }

  // Distractors read every cell; the bias puts their mean activation over the
  // prototypes at `distractor_tonic`.
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  const float scale = spec.distractor_gain / std::sqrt(static_cast<float>(cells));
  for (std::size_t d = 0; d < spec.distractor_units; ++d) {
    const std::size_t row = planted + d;
    for (std::size_t i = 0; i < cells; ++i) fc1.weights(row, i) = scale * gauss(rng);
    double mean_pre = 0.0;
    for (const auto& p : pooled) {
      for (std::size_t i = 0; i < cells; ++i) {
        mean_pre += static_cast<double>(fc1.weights(row, i)) * p[i];
      }
    }
    mean_pre /= static_cast<double>(pooled.size());
    fc1.bias[row] = static_cast<float>(spec.distractor_tonic - mean_pre);
  }

  // Distractor activations on the prototypes.
  std::vector<std::vector<double>> templ(spec.class_count,
                                         std::vector<double>(spec.distractor_units));
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    const Tensor h = apply_layer(ReLU{}, apply_layer(fc1, pooled[c]));
    for (std::size_t d = 0; d < spec.distractor_units; ++d) {
      templ[c][d] = h[planted + d] - spec.distractor_tonic;
    }
    // Zero-sum rows: a uniform shift of all distractors leaves the logits
    // unchanged.
    if (spec.distractor_units > 0) {
      const double mean = std::accumulate(templ[c].begin(), templ[c].end(), 0.0) /
                          static_cast<double>(spec.distractor_units);
      for (double& v : templ[c]) v -= mean;
    }
  }
  // Rows rescaled to their mean norm; the read-out has no bias term.
  double mean_norm = 0.0;
  std::vector<double> norms(spec.class_count);
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    norms[c] = std::sqrt(std::inner_product(templ[c].begin(), templ[c].end(), templ[c].begin(), 0.0));
    mean_norm += norms[c] / static_cast<double>(spec.class_count);
  }
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    if (norms[c] > 0.0) {
      for (double& v : templ[c]) v *= mean_norm / norms[c];
    }
  }

  FullyConnected fc2{Tensor({spec.class_count, hidden}, 0.0f), Tensor({spec.class_count}, 0.0f)};
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    for (std::size_t k = 0; k < planted; ++k) {
      fc2.weights(c, k) = spec.planted_gain * static_cast<float>(codes[c][k]);
    }
    for (std::size_t d = 0; d < spec.distractor_units; ++d) {
      fc2.weights(c, planted + d) = spec.distractor_readout * static_cast<float>(templ[c][d]);
    }
  }

  std::vector<LayerSpec> layers = front;
  layers.emplace_back(std::move(fc1));
  layers.emplace_back(ReLU{});
  layers.emplace_back(std::move(fc2));
  layers.emplace_back(Softmax{});
  return PlantedModel{Model({1, spec.height, spec.width}, std::move(layers)), planted_layer,
                      std::move(ground_truth), std::move(prototypes)};
}

Tensor prototype_face(const PlantedSpec& spec, const PlantedModel& planted, std::size_t label) {
  Tensor face({1, spec.height, spec.width}, spec.background);
  paint_face(face, spec, planted.prototypes.at(label));
  return face;
}

std::vector<SyntheticFace> make_synthetic_faces(const PlantedSpec& spec,
                                                const PlantedModel& planted,
                                                std::size_t count, std::uint64_t seed,
                                                const std::string& id_prefix) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, spec.noise);
  std::vector<SyntheticFace> faces;
  faces.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticFace f;
    f.label = i % spec.class_count;
    f.image = prototype_face(spec, planted, f.label);
    for (float& v : f.image.data()) v = std::clamp(v + gauss(rng), 0.0f, 1.0f);
    char id[32];
    std::snprintf(id, sizeof id, "_%04zu", i);
    f.annotation.image_id = id_prefix + id;
    f.annotation.boxes = spec.regions;
    faces.push_back(std::move(f));
  }
  return faces;
}

Tensor remove_attribute(const Tensor& image, const AttributeAnnotation& ann,
                        const std::string& attr) {
  const Box& b = ann.box(attr);
  Tensor out = image;
  for (std::size_t c = 0; c < image.dim(0); ++c) {
    for (std::size_t y = b.y; y < b.y + b.h; ++y) {
      for (std::size_t x = b.x; x < b.x + b.w; ++x) out(c, y, x) = 0.0f;
    }
  }
  return out;
}

}  // namespace wg
