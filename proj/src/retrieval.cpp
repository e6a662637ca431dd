#include "smr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "smr/errors.hpp"

namespace smr {

AdaptiveThresholds AdaptiveThresholds::from_counts(std::size_t n0, std::size_t n1, double s0,
                                                   double s1) {
  if (n0 == 0 || !(s0 > 0.0)) {
    throw Error(ErrorCode::kZeroBaseline, "query shares nothing with its adjacent frame");
  }
  AdaptiveThresholds th;
  th.n0 = n0;
  th.n1 = n1;
  th.s0 = s0;
  th.s1 = s1;
  th.k = std::clamp(static_cast<double>(n1) / static_cast<double>(n0), kMinAdaptiveCoefficient,
                    kMaxAdaptiveCoefficient);
  th.l = std::clamp(s1 / s0, kMinAdaptiveCoefficient, kMaxAdaptiveCoefficient);
  return th;
}

AdaptiveThresholds AdaptiveThresholds::fixed(double k, double l) {
  AdaptiveThresholds th;
  th.k = k;
  th.l = l;
  return th;
}

std::size_t common_words(const Frame& a, const Frame& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.words.size() && j < b.words.size()) {
    if (a.words[i] == b.words[j]) {
      ++n;
      ++i;
      ++j;
    } else if (a.words[i] < b.words[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

double bow_score(const Frame& a, const Frame& b) {
  if (a.words.empty() || b.words.empty()) {
    throw Error(ErrorCode::kEmptyFrame, "bow_score needs two non-empty word histograms");
  }
  const double na = static_cast<double>(a.words.size());
  const double nb = static_cast<double>(b.words.size());
  double l1 = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.words.size() || j < b.words.size()) {
    WordId w;
    if (j >= b.words.size() || (i < a.words.size() && a.words[i] <= b.words[j])) {
      w = a.words[i];
    } else {
      w = b.words[j];
    }
    std::size_t ca = 0, cb = 0;
    while (i < a.words.size() && a.words[i] == w) { ++ca; ++i; }
    while (j < b.words.size() && b.words[j] == w) { ++cb; ++j; }
    l1 += std::abs(static_cast<double>(ca) / na - static_cast<double>(cb) / nb);
  }
  return 1.0 - 0.5 * l1;
}

AdjacentAndNearby select_adjacent_and_nearby50(const Frame& current, const Submap& current_map,
                                               std::size_t window) {
  std::vector<const FrameRecord*> history;
  for (auto it = current_map.frames.rbegin(); it != current_map.frames.rend(); ++it) {
    if (it->frame.id < current.id) history.push_back(&*it);
    if (window > 0 && history.size() >= window + 1) break;
  }
  if (history.size() < 2) {
    throw Error(ErrorCode::kInsufficientHistory,
                "map " + current_map.name + " has fewer than 2 frames before " +
                    std::to_string(current.id));
  }
  AdjacentAndNearby out;
  out.adjacent = history.front();
  double best_gap = 0.0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    const double gap = std::abs(word_overlap_ratio(current, history[i]->frame) - 0.5);
    // History runs newest first, so strict < keeps the most recent on ties.
    if (out.nearby50 == nullptr || gap < best_gap) {
      out.nearby50 = history[i];
      best_gap = gap;
    }
  }
  return out;
}

AdaptiveThresholds compute_thresholds(const Frame& current, const Frame& adjacent,
                                      const Frame& nearby50) {
  if (adjacent.words.empty() || nearby50.words.empty()) {
    throw Error(ErrorCode::kEmptyFrame, "adjacent and nearby frames must carry words");
  }
  const std::size_t n0 = common_words(current, adjacent);
  const std::size_t n1 = common_words(current, nearby50);
  if (n0 == 0 || current.words.empty()) {
    throw Error(ErrorCode::kZeroBaseline, "query shares no words with its adjacent frame");
  }
  return AdaptiveThresholds::from_counts(n0, n1, bow_score(current, adjacent),
                                         bow_score(current, nearby50));
}

std::vector<ConnectedFrameMatch> retrieve_connected_frames(
    const Frame& current, std::span<const Submap* const> other_submaps,
    const AdaptiveThresholds& th) {
  struct Hit {
    ConnectedFrameMatch match;
    const Frame* frame;
  };
  std::vector<Hit> hits;
  std::vector<ConnectedFrameMatch> out;
  if (current.words.empty()) return out;

  std::size_t max_common = 0;
  for (const Submap* map : other_submaps) {
    for (const FrameRecord& r : map->frames) {
      if (!r.keyframe) continue;
      const std::size_t n = common_words(current, r.frame);
      if (n == 0) continue;
      hits.push_back(Hit{ConnectedFrameMatch{current.id, r.frame.id, map->id, n, 0.0}, &r.frame});
      max_common = std::max(max_common, n);
    }
  }
  const double min_common = th.k * static_cast<double>(max_common);
  std::erase_if(hits, [&](const Hit& h) {
    return static_cast<double>(h.match.common_words) < min_common;
  });

  double best_score = 0.0;
  for (Hit& h : hits) {
    h.match.score = bow_score(current, *h.frame);
    best_score = std::max(best_score, h.match.score);
  }
  const double min_score = th.l * best_score;
  for (const Hit& h : hits) {
    if (h.match.score >= min_score) out.push_back(h.match);
  }
  std::sort(out.begin(), out.end(), [](const ConnectedFrameMatch& a, const ConnectedFrameMatch& b) {
    return std::tie(a.matched_submap_id, a.matched_frame_id) <
           std::tie(b.matched_submap_id, b.matched_frame_id);
  });
  return out;
}

}  // namespace smr
