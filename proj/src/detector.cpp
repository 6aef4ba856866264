#include "witness_guard/detector.hpp"

#include <iomanip>
#include <sstream>

#include "parallel.hpp"
#include "witness_guard/inference.hpp"

namespace wg {

std::string to_string(DetectionMode mode) {
  switch (mode) {
    case DetectionMode::kFull: return "full";
    case DetectionMode::kSubstitutionOnly: return "as_only";
    case DetectionMode::kPreservationOnly: return "ap_only";
    case DetectionMode::kWeakenOnly: return "weaken_only";
    case DetectionMode::kStrengthenOnly: return "strengthen_only";
  }
  return "unknown";
}

DetectionMode detection_mode_from_string(const std::string& name) {
  for (auto m : {DetectionMode::kFull, DetectionMode::kSubstitutionOnly,
                 DetectionMode::kPreservationOnly, DetectionMode::kWeakenOnly,
                 DetectionMode::kStrengthenOnly}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidArgument("unknown detection mode '" + name + "'");
}

SteeringConfig config_for_mode(SteeringConfig cfg, DetectionMode mode) {
  if (mode == DetectionMode::kWeakenOnly) cfg.strengthen = false;
  if (mode == DetectionMode::kStrengthenOnly) cfg.weaken = false;
  return cfg;
}

DetectionReport detect(const Model& model, const WitnessSet& witnesses, const SteeringConfig& cfg,
                       const Tensor& image, DetectionMode mode, const std::string& input_id) {
  DetectionReport r;
  r.input_id = input_id;
  r.mode = mode;
  r.original_label = predict(model, image);
  r.steered_label = steered_forward(model, witnesses, config_for_mode(cfg, mode), image).label;
  r.is_adversarial = r.original_label != r.steered_label;
  return r;
}

std::optional<double> RateCell::rate() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(flagged) / static_cast<double>(total);
}

namespace {

std::vector<DetectionReport> detect_all(const Model& model, const WitnessSet& witnesses,
                                        const SteeringConfig& cfg,
                                        const std::vector<Sample>& samples, DetectionMode mode) {
  std::vector<DetectionReport> out(samples.size());
  detail::parallel_for(samples.size(), [&](std::size_t i) {
    out[i] = detect(model, witnesses, cfg, samples[i].image, mode, samples[i].id);
  });
  return out;
}

RateCell tally(const std::vector<DetectionReport>& rows) {
  RateCell cell;
  cell.total = rows.size();
  for (const auto& r : rows) cell.flagged += r.is_adversarial;
  return cell;
}

}  // namespace

EvaluationTable evaluate(const Model& model, const WitnessSet& witnesses,
                         const SteeringConfig& cfg, const std::vector<Sample>& benign,
                         const std::vector<AttackSet>& attacks, DetectionMode mode) {
  if (benign.empty() && attacks.empty()) throw InvalidArgument("evaluate: nothing to evaluate");
  EvaluationTable table;
  table.mode = mode;
  table.benign_rows = detect_all(model, witnesses, cfg, benign, mode);
  table.false_positive = tally(table.benign_rows);
  for (const auto& set : attacks) {
    std::vector<Sample> successful;
    for (const auto& s : set.samples) {
      if (!s.label) {
        throw InvalidArgument("attack sample '" + s.id + "' has no ground-truth label");
      }
      if (predict(model, s.image) != *s.label) successful.push_back(s);
    }
    auto rows = detect_all(model, witnesses, cfg, successful, mode);
    table.attacks.push_back({set.name, set.samples.size(), tally(rows)});
    table.attack_rows.push_back(std::move(rows));
  }
  return table;
}

namespace {

nlohmann::json cell_json(const RateCell& c) {
  nlohmann::json j = {{"flagged", c.flagged}, {"total", c.total}};
  if (auto r = c.rate()) j["rate"] = *r;
  else j["rate"] = "n/a";
  return j;
}

std::string rate_text(const RateCell& c) {
  std::ostringstream os;
  if (auto r = c.rate()) {
    os << std::fixed << std::setprecision(4) << *r;
  } else {
    os << "n/a";
  }
  os << " (" << c.flagged << "/" << c.total << ")";
  return os.str();
}

}  // namespace

nlohmann::json to_json(const EvaluationTable& table) {
  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& a : table.attacks) {
    attacks.push_back({{"name", a.name}, {"samples", a.samples},
                       {"successful", a.detection.total}, {"tpr", cell_json(a.detection)}});
  }
  return {{"mode", to_string(table.mode)},
          {"fpr", cell_json(table.false_positive)},
          {"attacks", attacks}};
}

std::string to_text(const EvaluationTable& table) {
  std::ostringstream os;
  os << "mode: " << to_string(table.mode) << '\n';
  os << std::left << std::setw(20) << "set" << "rate (flagged/total)\n";
  for (const auto& a : table.attacks) {
    os << std::setw(20) << ("TPR " + a.name) << rate_text(a.detection) << '\n';
  }
  os << std::setw(20) << "FPR benign" << rate_text(table.false_positive) << '\n';
  return os.str();
}

std::string to_csv(const EvaluationTable& table) {
  std::ostringstream os;
  os << "input_set,input_id,original_label,steered_label,is_adversarial,mode\n";
  auto emit = [&](const std::string& set, const DetectionReport& r) {
    os << set << ',' << r.input_id << ',' << r.original_label << ',' << r.steered_label << ','
       << (r.is_adversarial ? 1 : 0) << ',' << to_string(r.mode) << '\n';
  };
  for (const auto& r : table.benign_rows) emit("benign", r);
  for (std::size_t i = 0; i < table.attacks.size(); ++i) {
    for (const auto& r : table.attack_rows[i]) emit(table.attacks[i].name, r);
  }
  return os.str();
}

}  // namespace wg
