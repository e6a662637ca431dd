#include "smr/submap.hpp"

#include <algorithm>

#include "smr/errors.hpp"

namespace smr {

std::string submap_label(SubmapId id) {
  if (id >= 0 && id < 26) return std::string(1, static_cast<char>('A' + id));
  return "S" + std::to_string(id);
}

std::string composite_name(std::vector<SubmapId> members) {
  std::sort(members.begin(), members.end(), std::greater<>());
  std::string out;
  for (SubmapId m : members) {
    if (!out.empty()) out += '-';
    out += submap_label(m);
  }
  return out;
}

Submap::Submap(SubmapId submap_id, double gauge_scale)
    : id(submap_id), name(submap_label(submap_id)), members{submap_id} {
  gauge.scale = gauge_scale;
}

const FrameRecord* Submap::find(FrameId frame_id) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_id,
                             [](const FrameRecord& r, FrameId id) { return r.frame.id < id; });
  if (it == frames.end() || it->frame.id != frame_id) return nullptr;
  return &*it;
}

FrameRecord* Submap::find(FrameId frame_id) {
  return const_cast<FrameRecord*>(std::as_const(*this).find(frame_id));
}

std::size_t Submap::keyframe_count() const {
  return static_cast<std::size_t>(
      std::count_if(frames.begin(), frames.end(), [](const FrameRecord& r) { return r.keyframe; }));
}

std::vector<const FrameRecord*> Submap::keyframes() const {
  std::vector<const FrameRecord*> out;
  for (const FrameRecord& r : frames) {
    if (r.keyframe) out.push_back(&r);
  }
  return out;
}

std::size_t Submap::tracked_landmark_count(const Frame& frame) const {
  std::size_t n = 0;
  for (const Observation& o : frame.observations) {
    if (map_points.contains(o.landmark_id)) ++n;
  }
  return n;
}

void Submap::append(FrameRecord record) {
  if (!frames.empty() && record.frame.id <= frames.back().frame.id) {
    throw Error(ErrorCode::kOutOfOrderFrame,
                "frame " + std::to_string(record.frame.id) + " does not follow " +
                    std::to_string(frames.back().frame.id));
  }
  frames.push_back(std::move(record));
}

void Submap::sort_frames() {
  std::sort(frames.begin(), frames.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return a.frame.id < b.frame.id;
  });
}

}  // namespace smr
