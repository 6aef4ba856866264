#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "test_util.hpp"
#include "witness_guard/attack.hpp"
#include "witness_guard/detector.hpp"
#include "witness_guard/synthetic.hpp"

namespace wg {
namespace {

class DetectorFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    std::vector<WitnessSet> sets;
    for (const auto& [attr, set] : planted.ground_truth) sets.push_back(set);
    witnesses = combine_witnesses(sets);
    for (auto& f : make_synthetic_faces(spec, planted, 20, 71, "benign")) {
      benign.push_back({f.annotation.image_id, f.image, f.label});
    }
    AttackSet l0{"greedy_l0", {}};
    const auto faces = make_synthetic_faces(spec, planted, 10, 72, "atk");
    for (std::size_t i = 0; i < faces.size(); ++i) {
      AttackConfig cfg;
      cfg.kind = AttackKind::kGreedyL0;
      cfg.seed = i;
      l0.samples.push_back({faces[i].annotation.image_id, run_attack(planted.model, faces[i].image, cfg).adversarial,
                            faces[i].label});
    }
    attacks.push_back(std::move(l0));
  }
  PlantedSpec spec;
  PlantedModel planted = make_planted_model(spec);
  WitnessSet witnesses;
  std::vector<Sample> benign;
  std::vector<AttackSet> attacks;
};

TEST_F(DetectorFixture, BenignInputsAreConsistent) {
  for (const auto& s : benign) {
    const auto r = detect(planted.model, witnesses, {}, s.image, DetectionMode::kFull, s.id);
    EXPECT_FALSE(r.is_adversarial) << s.id;
    EXPECT_EQ(r.original_label, *s.label);
    EXPECT_EQ(r.input_id, s.id);
  }
}

TEST_F(DetectorFixture, EmptyWitnessesNeverFlag) {
  SteeringConfig cfg;
  cfg.pool_margin = 0;
  for (const auto& s : attacks[0].samples) {
    EXPECT_FALSE(detect(planted.model, WitnessSet{}, cfg, s.image).is_adversarial);
  }
}

TEST_F(DetectorFixture, NeutralWeakenOnlyHasZeroRates) {
  SteeringConfig neutral;
  neutral.alpha = std::numeric_limits<double>::infinity();
  neutral.pool_margin = 0;
  const auto t = evaluate(planted.model, witnesses, neutral, benign, attacks, DetectionMode::kWeakenOnly);
  EXPECT_EQ(t.false_positive.flagged, 0u);
  EXPECT_EQ(t.attacks[0].detection.flagged, 0u);
}

TEST_F(DetectorFixture, EvaluateCountsSuccessfulAttacksOnly) {
  const auto t = evaluate(planted.model, witnesses, {}, benign, attacks);
  ASSERT_EQ(t.attacks.size(), 1u);
  std::size_t successful = 0;
  for (const auto& s : attacks[0].samples) successful += predict(planted.model, s.image) != *s.label;
  EXPECT_EQ(t.attacks[0].samples, 10u);
  EXPECT_EQ(t.attacks[0].detection.total, successful);
  EXPECT_EQ(t.false_positive.total, benign.size());
  EXPECT_EQ(t.attack_rows[0].size(), successful);
  for (const auto& row : t.attack_rows[0]) EXPECT_EQ(row.is_adversarial, row.original_label != row.steered_label);
  // Re-running is bit-identical.
  EXPECT_EQ(to_json(evaluate(planted.model, witnesses, {}, benign, attacks)), to_json(t));
}

TEST_F(DetectorFixture, ReportsNaForEmptySuccessfulSubset) {
  AttackSet clean{"clean", {}};
  for (std::size_t i = 0; i < 3; ++i) clean.samples.push_back(benign[i]);
  const auto t = evaluate(planted.model, witnesses, {}, benign, {clean});
  EXPECT_FALSE(t.attacks[0].detection.rate());
  EXPECT_EQ(to_json(t)["attacks"][0]["tpr"]["rate"], "n/a");
  EXPECT_NE(to_text(t).find("n/a"), std::string::npos);
}

TEST_F(DetectorFixture, RejectsUnlabeledAttackSamples) {
  AttackSet bad{"bad", {{"x", benign[0].image, std::nullopt}}};
  EXPECT_THROW(evaluate(planted.model, witnesses, {}, benign, {bad}), InvalidArgument);
  EXPECT_THROW(evaluate(planted.model, witnesses, {}, {}, {}), InvalidArgument);
}

TEST_F(DetectorFixture, CsvRows) {
  const auto t = evaluate(planted.model, witnesses, {}, benign, attacks, DetectionMode::kStrengthenOnly);
  const std::string csv = to_csv(t);
  EXPECT_EQ(csv.rfind("input_set,input_id,original_label,steered_label,is_adversarial,mode\n", 0), 0u);
  EXPECT_NE(csv.find("benign,benign_0000,0,0,0,strengthen_only\n"), std::string::npos);
  const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  EXPECT_EQ(lines, 1 + benign.size() + t.attack_rows[0].size());
}

TEST(DetectionMode, NamesAndSwitches) {
  for (auto m : {DetectionMode::kFull, DetectionMode::kSubstitutionOnly, DetectionMode::kPreservationOnly,
                 DetectionMode::kWeakenOnly, DetectionMode::kStrengthenOnly}) {
    EXPECT_EQ(detection_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(detection_mode_from_string("fs"), InvalidArgument);
  EXPECT_FALSE(config_for_mode({}, DetectionMode::kWeakenOnly).strengthen);
  EXPECT_FALSE(config_for_mode({}, DetectionMode::kStrengthenOnly).weaken);
  const auto full = config_for_mode({}, DetectionMode::kFull);
  EXPECT_TRUE(full.weaken && full.strengthen);
}

TEST(RateCell, ExactRatio) {
  EXPECT_EQ(*(RateCell{3, 4}.rate()), 0.75);
  EXPECT_FALSE(RateCell{}.rate());
}

}  // namespace
}  // namespace wg
