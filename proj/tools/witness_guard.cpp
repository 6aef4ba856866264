#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "witness_guard/attack.hpp"
#include "witness_guard/config.hpp"
#include "witness_guard/dataset.hpp"
#include "witness_guard/detector.hpp"
#include "witness_guard/image_io.hpp"
#include "witness_guard/inference.hpp"
#include "witness_guard/mutation.hpp"
#include "witness_guard/steering.hpp"
#include "witness_guard/synthetic.hpp"
#include "witness_guard/witness.hpp"

namespace {

using nlohmann::json;

constexpr int kExitAdversarial = 3;

json floats(std::span<const float> v) { return json(std::vector<float>(v.begin(), v.end())); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Steering options shared by steer, detect and eval.
struct SteeringFlags {
  std::string config_path;
  std::optional<double> alpha, beta, epsilon;
  std::optional<std::size_t> margin;
  std::string mode = "full";

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "TOML file with steering parameters")
        ->check(CLI::ExistingFile);
    app->add_option("--alpha", alpha, "weakening magnitude");
    app->add_option("--beta", beta, "strengthening slope");
    app->add_option("--epsilon", epsilon, "base strengthening factor");
    app->add_option("--margin", margin, "pooling-map crop margin");
    app->add_option("--mode", mode, "full|as_only|ap_only|weaken_only|strengthen_only");
  }

  wg::SteeringConfig resolve() const {
    wg::SteeringConfig cfg;
    if (!config_path.empty()) cfg = wg::load_steering_config(config_path);
    if (alpha) cfg.alpha = *alpha;
    if (beta) cfg.beta = *beta;
    if (epsilon) cfg.epsilon = *epsilon;
    if (margin) cfg.pool_margin = *margin;
    cfg.validate();
    return cfg;
  }
};

wg::WitnessSet load_checked_witnesses(const wg::Model& model, const std::string& path) {
  wg::WitnessSet w = wg::load_witnesses(path);
  wg::validate_witnesses(model, w);
  return w;
}

std::vector<wg::AnnotatedImage> annotated(const std::string& dir) {
  std::vector<wg::AnnotatedImage> out;
  for (auto& e : wg::load_dataset(dir)) {
    if (!e.annotation) throw wg::InvalidArgument("image '" + e.id + "' in " + dir + " has no annotation");
    out.push_back({std::move(e.image), std::move(*e.annotation)});
  }
  return out;
}

std::vector<wg::Sample> samples(const std::string& dir) {
  std::vector<wg::Sample> out;
  for (auto& e : wg::load_dataset(dir)) out.push_back({e.id, std::move(e.image), e.label});
  return out;
}

json steering_json(const wg::SteeringConfig& c) {
  return {{"alpha", c.alpha},           {"beta", c.beta},       {"epsilon", c.epsilon},
          {"pool_margin", c.pool_margin}, {"sigma_floor", c.sigma_floor},
          {"weaken", c.weaken},         {"strengthen", c.strengthen}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"witness-guard: attribute-witness adversarial input detection"};
  app.require_subcommand(1);
  int exit_code = 0;

  // forward
  auto* fwd = app.add_subcommand("forward", "classify an image");
  std::string model_path, image_path, dump_path;
  fwd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  fwd->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  fwd->add_option("--dump-activations", dump_path, "write per-layer activations as JSON");
  fwd->callback([&] {
    const wg::Model model = wg::load_model(model_path);
    const auto r = wg::forward(model, wg::read_image(image_path));
    std::cout << json{{"label", r.label}, {"probabilities", floats(r.probabilities.data())}}.dump()
              << '\n';
    if (!dump_path.empty()) {
      json layers = json::array();
      for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const auto& a = r.record.layers[l];
        layers.push_back({{"layer", l},
                          {"kind", wg::to_string(model.kind(l))},
                          {"shape", a.raw.shape()},
                          {"summary", floats(a.summary)},
                          {"values", floats(a.raw.data())}});
      }
      write_text(dump_path, json{{"layers", layers}}.dump() + "\n");
    }
  });

  // mutate
  auto* mut = app.add_subcommand("mutate", "attribute substitution or preservation");
  std::string mode = "substitute", attr, base_path, donor_path, ann_base, ann_donor, out_path;
  mut->add_option("--mode", mode)->check(CLI::IsMember({"substitute", "preserve"}));
  mut->add_option("--attr", attr)->required();
  mut->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  mut->add_option("--donor", donor_path)->required()->check(CLI::ExistingFile);
  mut->add_option("--ann-base", ann_base)->required()->check(CLI::ExistingFile);
  mut->add_option("--ann-donor", ann_donor)->required()->check(CLI::ExistingFile);
  mut->add_option("--out", out_path)->required();
  mut->callback([&] {
    const wg::Tensor base = wg::read_image(base_path), donor = wg::read_image(donor_path);
    const auto ab = wg::load_annotation(ann_base), ad = wg::load_annotation(ann_donor);
    const wg::Tensor out = mode == "substitute"
                               ? wg::substitute_attribute(base, ab, donor, ad, attr)
                               : wg::preserve_attribute(base, ab, donor, ad, attr);
    wg::write_image(out_path, out);
  });

  // extract-witnesses
  auto* ext = app.add_subcommand("extract-witnesses", "bi-directional witness extraction");
  std::string bases_dir, donors_dir, direction = "both";
  wg::ExtractionConfig ecfg;
  ext->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  ext->add_option("--bases", bases_dir)->required()->check(CLI::ExistingDirectory);
  ext->add_option("--donors", donors_dir)->required()->check(CLI::ExistingDirectory);
  ext->add_option("--attr", attr)->required();
  ext->add_option("--out", out_path)->required();
  ext->add_option("--direction", direction)->check(CLI::IsMember({"both", "as", "ap"}));
  ext->add_option("--vote-threshold", ecfg.vote_threshold);
  ext->add_option("--donors-per-base", ecfg.donors_per_base);
  ext->callback([&] {
    const wg::Model model = wg::load_model(model_path);
    const auto bases = annotated(bases_dir), donors = annotated(donors_dir);
    const auto result = wg::extract_witnesses(model, bases, donors, attr, ecfg);
    const wg::WitnessSet& chosen = direction == "as"   ? result.substitution
                                   : direction == "ap" ? result.preservation
                                                       : result.witnesses;
    wg::save_witnesses(chosen, out_path,
                       {{"direction", direction},
                        {"vote_threshold", ecfg.vote_threshold},
                        {"donors_per_base", ecfg.donors_per_base},
                        {"bases", bases.size()},
                        {"donors", donors.size()}});
    std::cout << attr << ": " << chosen.neurons.size() << " witness neurons\n";
  });

  // steer
  auto* steer = app.add_subcommand("steer", "run the attribute-steered model");
  std::string witness_path;
  SteeringFlags sflags;
  steer->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  steer->add_option("--witnesses", witness_path)->required()->check(CLI::ExistingFile);
  steer->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  sflags.add(steer);
  steer->callback([&] {
    const wg::Model model = wg::load_model(model_path);
    const auto w = load_checked_witnesses(model, witness_path);
    const auto cfg = wg::config_for_mode(sflags.resolve(), wg::detection_mode_from_string(sflags.mode));
    const wg::Tensor image = wg::read_image(image_path);
    const auto steered = wg::steered_forward(model, w, cfg, image);
    std::cout << json{{"original_label", wg::predict(model, image)},
                      {"steered_label", steered.label},
                      {"steered_probabilities", floats(steered.probabilities.data())},
                      {"config", steering_json(cfg)}}.dump()
              << '\n';
  });

  // detect
  auto* det = app.add_subcommand("detect", "flag an input whose steered label differs");
  det->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  det->add_option("--witnesses", witness_path)->required()->check(CLI::ExistingFile);
  det->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  sflags.add(det);
  det->callback([&] {
    const wg::Model model = wg::load_model(model_path);
    const auto w = load_checked_witnesses(model, witness_path);
    const auto m = wg::detection_mode_from_string(sflags.mode);
    const auto r = wg::detect(model, w, sflags.resolve(), wg::read_image(image_path), m,
                              std::filesystem::path(image_path).stem().string());
    std::cout << json{{"input_id", r.input_id},
                      {"original_label", r.original_label},
                      {"steered_label", r.steered_label},
                      {"is_adversarial", r.is_adversarial},
                      {"mode", wg::to_string(r.mode)}}.dump()
              << '\n';
    if (r.is_adversarial) exit_code = kExitAdversarial;
  });

  // eval
  auto* ev = app.add_subcommand("eval", "TPR/FPR over benign and attack directories");
  std::string benign_dir, csv_path;
  std::vector<std::string> attack_dirs;
  ev->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--witnesses", witness_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--benign", benign_dir)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--attacks", attack_dirs)->delimiter(',')->check(CLI::ExistingDirectory);
  ev->add_option("--out", out_path, "JSON report");
  ev->add_option("--csv", csv_path, "per-input rows");
  sflags.add(ev);
  ev->callback([&] {
    const wg::Model model = wg::load_model(model_path);
    const auto w = load_checked_witnesses(model, witness_path);
    std::vector<wg::AttackSet> attacks;
    for (const auto& dir : attack_dirs) {
      attacks.push_back({std::filesystem::path(dir).filename().string(), samples(dir)});
    }
    const auto table = wg::evaluate(model, w, sflags.resolve(), samples(benign_dir), attacks,
                                    wg::detection_mode_from_string(sflags.mode));
    std::cout << wg::to_text(table);
    if (!out_path.empty()) write_text(out_path, wg::to_json(table).dump(2) + "\n");
    if (!csv_path.empty()) write_text(csv_path, wg::to_csv(table));
  });

  // gen-attack
  auto* gen = app.add_subcommand("gen-attack", "craft an adversarial sample");
  std::string kind = "fgsm", target, out_dir;
  std::optional<std::size_t> label;
  wg::AttackConfig acfg;
  gen->add_option("--kind", kind)->check(CLI::IsMember({"fgsm", "bim", "greedy_l0"}));
  gen->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  gen->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  gen->add_option("--eps", acfg.epsilon);
  gen->add_option("--steps", acfg.steps);
  gen->add_option("--step-size", acfg.step_size);
  gen->add_option("--max-pixels", acfg.max_pixels);
  gen->add_option("--target", target)->check(CLI::IsMember({"first", "next"}));
  gen->add_option("--label", label, "ground-truth label (defaults to the image sidecar)");
  gen->add_option("--seed", acfg.seed);
  gen->add_option("--out", out_dir)->required();
  gen->callback([&] {
    const wg::Model model = wg::load_model(model_path);
    const std::filesystem::path input(image_path);
    const wg::Tensor image = wg::read_image(input);
    if (!label) {
      auto sidecar = input;
      sidecar.replace_extension(".json");
      if (std::filesystem::exists(sidecar)) {
        std::ifstream in(sidecar);
        const json j = json::parse(in);
        if (j.contains("label")) label = j["label"].get<std::size_t>();
      }
    }
    acfg.kind = wg::attack_kind_from_string(kind);
    const std::size_t source = label.value_or(wg::predict(model, image));
    acfg.source_label = source;
    if (target == "first") acfg.target = source == 0 ? 1 : 0;
    if (target == "next") acfg.target = (source + 1) % model.class_count();
    const wg::AttackResult r = wg::run_attack(model, image, acfg);

    // The emitted PNG is 8-bit, so every statistic is recomputed on it.
    const wg::Tensor stored = wg::quantize_8bit(r.adversarial);
    const std::size_t stored_label = wg::predict(model, stored);
    const bool success = acfg.target ? stored_label == *acfg.target : stored_label != source;
    wg::DatasetEntry entry;
    entry.id = input.stem().string() + "_" + kind;
    entry.image = stored;
    entry.label = label;
    entry.extra = {{"attack", kind},
                   {"success", success},
                   {"original_label", r.original_label},
                   {"adversarial_label", stored_label},
                   {"changed_pixels", wg::count_changed(image, stored)},
                   {"linf", wg::linf_distance(image, stored)},
                   {"epsilon", acfg.epsilon},
                   {"seed", acfg.seed}};
    if (acfg.target) entry.extra["target"] = *acfg.target;
    wg::save_entry(out_dir, entry);
    std::cout << entry.extra.dump() << '\n';
  });

  // make-synthetic
  auto* syn = app.add_subcommand("make-synthetic", "planted model plus synthetic faces");
  std::string spec_path;
  std::size_t count = 100;
  std::uint64_t seed = 1;
  syn->add_option("--spec", spec_path, "TOML planted spec")->check(CLI::ExistingFile);
  syn->add_option("--count", count);
  syn->add_option("--seed", seed);
  syn->add_option("--out", out_dir)->required();
  syn->callback([&] {
    const wg::PlantedSpec spec = spec_path.empty() ? wg::PlantedSpec{} : wg::load_planted_spec(spec_path);
    const auto planted = wg::make_planted_model(spec);
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out / "faces");
    wg::save_model(planted.model, out / "model.wgrd");
    json truth = json::array();
    for (const auto& [name, set] : planted.ground_truth) {
      truth.push_back(wg::witnesses_to_json(set, {{"source", "planted"}}));
    }
    write_text((out / "witnesses_truth.json").string(), json{{"witnesses", truth}}.dump(2) + "\n");
    for (auto& face : wg::make_synthetic_faces(spec, planted, count, seed)) {
      wg::save_entry(out / "faces",
                     {face.annotation.image_id, face.image, face.annotation, face.label, json::object()});
    }
    std::cout << "wrote " << count << " faces and model to " << out_dir << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}
