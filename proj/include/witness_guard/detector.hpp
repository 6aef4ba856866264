#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "witness_guard/model.hpp"
#include "witness_guard/steering.hpp"
#include "witness_guard/witness.hpp"

namespace wg {

// full: all mechanisms. as_only / ap_only: full steering driven by a witness
// set extracted from one direction. weaken_only: weakening plus the
// conserving transform. strengthen_only: witness strengthening alone.
enum class DetectionMode { kFull, kSubstitutionOnly, kPreservationOnly, kWeakenOnly, kStrengthenOnly };

std::string to_string(DetectionMode mode);
DetectionMode detection_mode_from_string(const std::string& name);

// Mechanism switches implied by the mode, applied on top of `cfg`.
SteeringConfig config_for_mode(SteeringConfig cfg, DetectionMode mode);

struct DetectionReport {
  std::string input_id;
  std::size_t original_label = 0;
  std::size_t steered_label = 0;
  bool is_adversarial = false;  // original_label != steered_label
  DetectionMode mode = DetectionMode::kFull;
};

DetectionReport detect(const Model& model, const WitnessSet& witnesses, const SteeringConfig& cfg,
                       const Tensor& image, DetectionMode mode = DetectionMode::kFull,
                       const std::string& input_id = {});

struct Sample {
  std::string id;
  Tensor image;
  std::optional<std::size_t> label;  // ground truth
};

struct AttackSet {
  std::string name;
  std::vector<Sample> samples;
};

struct RateCell {
  std::size_t flagged = 0;
  std::size_t total = 0;
  std::optional<double> rate() const;
};

struct AttackRow {
  std::string name;
  std::size_t samples = 0;     // all samples in the set
  RateCell detection;          // over successful attacks only
};

struct EvaluationTable {
  DetectionMode mode = DetectionMode::kFull;
  RateCell false_positive;  // over the benign set
  std::vector<AttackRow> attacks;
  std::vector<DetectionReport> benign_rows;
  std::vector<std::vector<DetectionReport>> attack_rows;  // successful only
};

// An attack sample counts as successful when the original model's label
// differs from its ground truth; attack samples without ground truth are
// rejected. TPR per set = flagged / successful, FPR = flagged / benign.
EvaluationTable evaluate(const Model& model, const WitnessSet& witnesses,
                         const SteeringConfig& cfg, const std::vector<Sample>& benign,
                         const std::vector<AttackSet>& attacks,
                         DetectionMode mode = DetectionMode::kFull);

nlohmann::json to_json(const EvaluationTable& table);
std::string to_text(const EvaluationTable& table);
// input_set,input_id,original_label,steered_label,is_adversarial,mode
std::string to_csv(const EvaluationTable& table);

}  // namespace wg
