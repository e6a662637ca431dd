#pragma once

#include <span>
#include <vector>

#include "smr/scene_sim.hpp"
#include "smr/submap.hpp"

namespace smr {

// Original keyframe-database constants replaced by the adaptive thresholds.
inline constexpr double kFixedCommonWordsRatio = 0.8;
inline constexpr double kFixedScoreRatio = 0.75;

// Guard band for the adaptive coefficients. k > 1 would reject even the
// frame holding the maximum common-word count.
inline constexpr double kMinAdaptiveCoefficient = 0.05;
inline constexpr double kMaxAdaptiveCoefficient = 1.0;

/// Per-query thresholds: k = N1/N0 (common words), l = S1/S0 (BoW score),
/// with N0/S0 measured against the adjacent frame and N1/S1 against the
/// frame overlapping the query by about half.
struct AdaptiveThresholds {
  double k = kFixedCommonWordsRatio;
  double l = kFixedScoreRatio;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  double s0 = 0.0;
  double s1 = 0.0;

  /// Throws kZeroBaseline when n0 or s0 is zero. k and l are clamped.
  static AdaptiveThresholds from_counts(std::size_t n0, std::size_t n1, double s0, double s1);
  /// Forces k and l, bypassing adaptation.
  static AdaptiveThresholds fixed(double k, double l);
};

struct ConnectedFrameMatch {
  FrameId query_frame_id = 0;
  FrameId matched_frame_id = 0;
  SubmapId matched_submap_id = 0;
  std::size_t common_words = 0;
  double score = 0.0;

  bool operator==(const ConnectedFrameMatch&) const = default;
};

/// Size of the multiset intersection of the two word lists.
std::size_t common_words(const Frame& a, const Frame& b);

/// 1 - 0.5 * sum_w |a_w - b_w| over L1-normalized word histograms.
double bow_score(const Frame& a, const Frame& b);

struct AdjacentAndNearby {
  const FrameRecord* adjacent = nullptr;
  const FrameRecord* nearby50 = nullptr;
};

/// adjacent: the latest frame of the map preceding `current`.
/// nearby50: among the other frames (latest `window` of them, 0 = all), the
/// one whose landmark overlap with `current` is closest to 0.5; ties go to
/// the most recent.
AdjacentAndNearby select_adjacent_and_nearby50(const Frame& current, const Submap& current_map,
                                               std::size_t window = 0);

AdaptiveThresholds compute_thresholds(const Frame& current, const Frame& adjacent,
                                      const Frame& nearby50);

/// Two-stage keyframe-database filter over the keyframes of `other_submaps`:
/// keep hits with common_words >= k * max_common, then among those keep
/// bow_score >= l * best_score. Sorted by (submap id, frame id).
std::vector<ConnectedFrameMatch> retrieve_connected_frames(
    const Frame& current, std::span<const Submap* const> other_submaps,
    const AdaptiveThresholds& th);

}  // namespace smr
