#include "smr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "smr/errors.hpp"

namespace smr {

std::string to_string(Mode mode) {
  return mode == Mode::kProposed ? "proposed" : "baseline";
}

Mode mode_from_string(const std::string& s) {
  if (s == "proposed") return Mode::kProposed;
  if (s == "baseline" || s == "relocalization_baseline") return Mode::kBaseline;
  throw Error(ErrorCode::kInvalidConfig, "mode: unknown value '" + s + "'");
}

std::size_t trajectory_integrity(std::span<const Submap> maps) {
  std::size_t n = 0;
  for (const Submap& m : maps) n += m.keyframe_count();
  return n;
}

namespace {

struct Residuals {
  double sum_sq = 0.0;
  std::size_t count = 0;
};

Residuals aligned_residuals(std::span<const Vec3> est, std::span<const Vec3> gt) {
  const SimilarityEstimate fit = estimate_similarity(est, gt);
  Residuals r;
  for (std::size_t i = 0; i < est.size(); ++i) {
    r.sum_sq += (fit.transform.apply(est[i]) - gt[i]).squaredNorm();
  }
  r.count = est.size();
  return r;
}

}  // namespace

double ate_rmse(std::span<const PoseSample> estimated, std::span<const PoseSample> ground_truth) {
  std::map<FrameId, Vec3> gt;
  for (const PoseSample& s : ground_truth) gt.emplace(s.frame_id, s.pose.center());
  std::vector<Vec3> src, dst;
  for (const PoseSample& s : estimated) {
    auto it = gt.find(s.frame_id);
    if (it == gt.end()) continue;
    src.push_back(s.pose.center());
    dst.push_back(it->second);
  }
  const Residuals r = aligned_residuals(src, dst);
  return 100.0 * std::sqrt(r.sum_sq / static_cast<double>(r.count));
}

AteResult pooled_ate(std::span<const KeyframeEntry> keyframes, std::span<const FrameId> frame_filter) {
  std::map<SubmapId, std::pair<std::vector<Vec3>, std::vector<Vec3>>> groups;
  for (const KeyframeEntry& k : keyframes) {
    if (!frame_filter.empty() &&
        !std::binary_search(frame_filter.begin(), frame_filter.end(), k.frame_id)) {
      continue;
    }
    auto& [est, gt] = groups[k.submap];
    est.push_back(k.estimated.center());
    gt.push_back(k.ground_truth.center());
  }
  AteResult out;
  double sum_sq = 0.0;
  for (const auto& [id, g] : groups) {
    try {
      const Residuals r = aligned_residuals(g.first, g.second);
      sum_sq += r.sum_sq;
      out.samples += r.count;
      ++out.components;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
      ++out.skipped_components;
    }
  }
  if (out.samples > 0) out.rmse_cm = 100.0 * std::sqrt(sum_sq / static_cast<double>(out.samples));
  return out;
}

ComparisonRow compare_modes(const RunReport& proposed, const RunReport& baseline) {
  if (proposed.scenario != baseline.scenario || proposed.seed != baseline.seed) {
    throw Error(ErrorCode::kScenarioMismatch,
                "cannot compare '" + proposed.scenario + "' seed " + std::to_string(proposed.seed) +
                    " with '" + baseline.scenario + "' seed " + std::to_string(baseline.seed));
  }
  std::vector<FrameId> a, b, common;
  for (const KeyframeEntry& k : proposed.keyframes) a.push_back(k.frame_id);
  for (const KeyframeEntry& k : baseline.keyframes) b.push_back(k.frame_id);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));

  ComparisonRow row;
  row.scenario = proposed.scenario;
  row.keyframes_proposed = proposed.keyframes_retained;
  row.keyframes_baseline = baseline.keyframes_retained;
  row.common_keyframes = common.size();
  row.integrity_dominates = row.keyframes_proposed >= row.keyframes_baseline;
  if (!common.empty()) {
    const AteResult p = pooled_ate(proposed.keyframes, common);
    const AteResult q = pooled_ate(baseline.keyframes, common);
    row.rmse_proposed_cm = p.rmse_cm;
    row.rmse_baseline_cm = q.rmse_cm;
    row.components_proposed = p.components;
  }
  row.rmse_within_gate = row.rmse_proposed_cm <= kRmseGate * row.rmse_baseline_cm;
  return row;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_comparison_text(std::span<const ComparisonRow> rows) {
  const std::vector<std::string> header = {"scenario",  "kf_proposed", "kf_baseline", "common",
                                           "rmse_proposed_cm", "rmse_baseline_cm", "ratio",
                                           "dominates"};
  std::vector<std::vector<std::string>> cells{header};
  for (const ComparisonRow& r : rows) {
    const double ratio = r.rmse_baseline_cm > 0.0 ? r.rmse_proposed_cm / r.rmse_baseline_cm : 0.0;
    cells.push_back({r.scenario, std::to_string(r.keyframes_proposed),
                     std::to_string(r.keyframes_baseline), std::to_string(r.common_keyframes),
                     fixed(r.rmse_proposed_cm, 3), fixed(r.rmse_baseline_cm, 3), fixed(ratio, 3),
                     r.integrity_dominates ? "yes" : "NO"});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << "  ";
      if (i == 0) {
        out << row[i] << std::string(width[i] - row[i].size(), ' ');
      } else {
        out << std::string(width[i] - row[i].size(), ' ') << row[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string format_comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << "scenario,keyframes_proposed,keyframes_baseline,common_keyframes,rmse_proposed_cm,"
         "rmse_baseline_cm,components_proposed,integrity_dominates,rmse_within_gate\n";
  for (const ComparisonRow& r : rows) {
    out << r.scenario << ',' << r.keyframes_proposed << ',' << r.keyframes_baseline << ','
        << r.common_keyframes << ',' << fixed(r.rmse_proposed_cm, 6) << ','
        << fixed(r.rmse_baseline_cm, 6) << ',' << r.components_proposed << ','
        << (r.integrity_dominates ? 1 : 0) << ',' << (r.rmse_within_gate ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace smr
