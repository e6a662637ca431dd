#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "smr/errors.hpp"
#include "smr/metrics.hpp"

using namespace smr;

namespace {

std::vector<PoseSample> helix(int n) {
  std::vector<PoseSample> out;
  for (int i = 0; i < n; ++i) {
    const double a = 0.05 * i;
    out.push_back(PoseSample{i, Pose{Mat3::Identity(), Vec3(20 * std::cos(a), 20 * std::sin(a), 0.1 * i)}});
  }
  return out;
}

Submap map_with_keyframes(SubmapId id, int keyframes, int others) {
  Submap m(id, 1.0);
  FrameId next = 1000 * id;
  for (int i = 0; i < keyframes + others; ++i) {
    FrameRecord r;
    r.frame.id = next++;
    r.keyframe = i < keyframes;
    m.append(r);
  }
  return m;
}

RunReport report(const std::string& scenario, std::uint64_t seed, std::vector<FrameId> keyframe_ids) {
  RunReport r;
  r.scenario = scenario;
  r.seed = seed;
  for (FrameId id : keyframe_ids) {
    KeyframeEntry k;
    k.frame_id = id;
    k.ground_truth.translation = Vec3(id, 0.5 * id * id, std::sin(static_cast<double>(id)));
    k.estimated = k.ground_truth;
    r.keyframes.push_back(k);
  }
  r.keyframes_retained = keyframe_ids.size();
  return r;
}

}  // namespace

TEST(Integrity, Counts) {
  EXPECT_EQ(trajectory_integrity(std::vector<Submap>{}), 0u);
  const std::vector<Submap> one{map_with_keyframes(0, 117, 40)};
  EXPECT_EQ(trajectory_integrity(one), 117u);
}

TEST(Integrity, AdditiveOverDisjointMaps) {
  std::vector<Submap> maps;
  std::size_t total = 0;
  for (int i = 0; i < 9; ++i) {
    maps.push_back(map_with_keyframes(i, 3 + i, i));
    total += 3 + i;
  }
  EXPECT_EQ(trajectory_integrity(maps), total);
  const std::size_t first = trajectory_integrity(std::span(maps).first(4));
  const std::size_t rest = trajectory_integrity(std::span(maps).subspan(4));
  EXPECT_EQ(first + rest, total);
}

TEST(Ate, ZeroForIdenticalTrajectories) {
  const auto gt = helix(100);
  EXPECT_LT(ate_rmse(gt, gt), 1e-9);
}

TEST(Ate, InvariantUnderGlobalSimilarity) {
  Rng rng(2);
  const auto gt = helix(200);
  for (int trial = 0; trial < 20; ++trial) {
    const SimilarityTransform T = oracle::random_similarity(rng);
    std::vector<PoseSample> est;
    for (const PoseSample& s : gt) est.push_back(PoseSample{s.frame_id, apply_similarity_pose(T, s.pose)});
    EXPECT_LT(ate_rmse(est, gt), 1e-7);
  }
}

TEST(Ate, IsotropicNoiseGivesSqrt3Sigma) {
  Rng rng(3);
  const double sigma = 0.05;
  const auto gt = helix(500);
  std::vector<PoseSample> est = gt;
  for (PoseSample& s : est) s.pose.translation += Vec3(rng.normal(sigma), rng.normal(sigma), rng.normal(sigma));
  const double expected_cm = 100.0 * std::sqrt(3.0) * sigma;
  EXPECT_NEAR(ate_rmse(est, gt), expected_cm, 0.15 * expected_cm);
}

TEST(Ate, OnlyCommonFramesCount) {
  const auto gt = helix(50);
  auto est = helix(80);
  est[70].pose.translation += Vec3(100, 0, 0);  // no ground truth for frame 70
  EXPECT_LT(ate_rmse(est, gt), 1e-9);
}

TEST(Ate, DegenerateInput) {
  std::vector<PoseSample> line;
  for (int i = 0; i < 5; ++i) line.push_back(PoseSample{i, Pose{Mat3::Identity(), Vec3(i, 0, 0)}});
  try {
    ate_rmse(line, line);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateConfiguration);
  }
}

TEST(PooledAte, AlignsComponentsSeparately) {
  Rng rng(4);
  std::vector<KeyframeEntry> kfs;
  for (SubmapId m = 0; m < 3; ++m) {
    const SimilarityTransform gauge = oracle::random_similarity(rng);
    for (const PoseSample& s : helix(40)) {
      KeyframeEntry k;
      k.frame_id = 100 * m + s.frame_id;
      k.submap = m;
      k.ground_truth = s.pose;
      k.estimated = apply_similarity_pose(gauge, s.pose);
      kfs.push_back(k);
    }
  }
  // A two-keyframe component cannot be aligned and is skipped.
  for (FrameId f : {900, 901}) {
    KeyframeEntry k;
    k.frame_id = f;
    k.submap = 9;
    k.estimated.translation = Vec3(f, 5, 5);
    kfs.push_back(k);
  }
  const AteResult r = pooled_ate(kfs);
  EXPECT_LT(r.rmse_cm, 1e-6);
  EXPECT_EQ(r.components, 3u);
  EXPECT_EQ(r.skipped_components, 1u);
  EXPECT_EQ(r.samples, 120u);

  const std::vector<FrameId> filter{0, 1, 2, 3, 4, 5};
  EXPECT_EQ(pooled_ate(kfs, filter).samples, 6u);
}

TEST(Compare, IdenticalReportsGiveEqualColumns) {
  const RunReport r = report("s", 1, {0, 5, 10, 15, 20, 25});
  const ComparisonRow row = compare_modes(r, r);
  EXPECT_EQ(row.keyframes_proposed, row.keyframes_baseline);
  EXPECT_EQ(row.rmse_proposed_cm, row.rmse_baseline_cm);
  EXPECT_EQ(row.common_keyframes, 6u);
  EXPECT_TRUE(row.integrity_dominates);
  EXPECT_TRUE(row.rmse_within_gate);
}

TEST(Compare, UsesOnlyCommonKeyframes) {
  RunReport p = report("s", 1, {0, 5, 10, 15, 20, 25, 30, 35});
  const RunReport b = report("s", 1, {0, 10, 20, 30, 40});
  p.keyframes[1].estimated.translation += Vec3(50, 0, 0);  // frame 5, not in the baseline
  const ComparisonRow row = compare_modes(p, b);
  EXPECT_EQ(row.common_keyframes, 4u);
  EXPECT_LT(row.rmse_proposed_cm, 1e-6);
  EXPECT_TRUE(row.integrity_dominates);
}

TEST(Compare, ScenarioMismatch) {
  for (const auto& [name, seed] : std::vector<std::pair<std::string, std::uint64_t>>{{"t", 1}, {"s", 2}}) {
    try {
      compare_modes(report("s", 1, {0, 1, 2}), report(name, seed, {0, 1, 2}));
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kScenarioMismatch);
    }
  }
}

TEST(Compare, Formatting) {
  ComparisonRow row;
  row.scenario = "uav";
  row.keyframes_proposed = 496;
  row.keyframes_baseline = 117;
  row.rmse_proposed_cm = 36.912;
  row.rmse_baseline_cm = 35.421;
  row.integrity_dominates = true;
  const std::vector<ComparisonRow> rows{row};
  const std::string text = format_comparison_text(rows);
  EXPECT_NE(text.find("496"), std::string::npos);
  EXPECT_NE(text.find("36.912"), std::string::npos);
  const std::string csv = format_comparison_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "scenario,keyframes_proposed,keyframes_baseline,common_keyframes,rmse_proposed_cm,"
            "rmse_baseline_cm,components_proposed,integrity_dominates,rmse_within_gate");
  EXPECT_NE(csv.find("uav,496,117,0,36.912000,35.421000,0,1,0"), std::string::npos);
}

TEST(ModeNames, RoundTrip) {
  EXPECT_EQ(mode_from_string(to_string(Mode::kProposed)), Mode::kProposed);
  EXPECT_EQ(mode_from_string(to_string(Mode::kBaseline)), Mode::kBaseline);
  EXPECT_EQ(mode_from_string("relocalization_baseline"), Mode::kBaseline);
  EXPECT_THROW(mode_from_string("other"), Error);
}
