#include "detfuse/bbox.h"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "detfuse/errors.h"

namespace detfuse {

void validate(const BBox& box) {
  if (!std::isfinite(box.x1) || !std::isfinite(box.y1) ||
      !std::isfinite(box.x2) || !std::isfinite(box.y2)) {
    throw InvariantViolation("box coordinates must be finite");
  }
  if (!(box.x1 < box.x2) || !(box.y1 < box.y2)) {
    throw InvariantViolation("box must have positive area (x1 < x2, y1 < y2)");
  }
  if (!(box.score >= 0.0 && box.score <= 1.0)) {
    throw InvariantViolation("score " + std::to_string(box.score) +
                             " outside [0, 1]");
  }
  if (box.consensus_n && *box.consensus_n < 1) {
    throw InvariantViolation("consensus_n must be >= 1");
  }
}

bool geometry_less(const BBox& a, const BBox& b) {
  return std::tie(a.x1, a.y1, a.x2, a.y2) < std::tie(b.x1, b.y1, b.x2, b.y2);
}

bool score_then_geometry_less(const BBox& a, const BBox& b) {
  if (a.score != b.score) return a.score > b.score;
  return geometry_less(a, b);
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::string to_string(const FrameKey& key) {
  return key.video_id + "/" + std::to_string(key.frame_id);
}

void DetectionSet::add(const FrameKey& key, BBox box) {
  validate(box);
  auto [it, inserted] = frames.try_emplace(key);
  if (inserted) it->second.key = key;
  it->second.boxes.push_back(std::move(box));
}

std::size_t DetectionSet::box_count() const {
  std::size_t n = 0;
  for (const auto& [key, frame] : frames) n += frame.boxes.size();
  return n;
}

void GroundTruthSet::add(const FrameKey& key, BBox box) {
  box.score = 1.0;
  box.detector_id.reset();
  validate(box);
  auto& boxes = frames[key];
  if (box.track_id) {
    for (const BBox& other : boxes) {
      if (other.track_id == box.track_id) {
        throw InvariantViolation("track id " + *box.track_id +
                                 " repeated in frame " + to_string(key));
      }
    }
  }
  boxes.push_back(std::move(box));
}

std::size_t GroundTruthSet::box_count() const {
  std::size_t n = 0;
  for (const auto& [key, boxes] : frames) n += boxes.size();
  return n;
}

DetectionSet GroundTruthSet::as_detections(const std::string& source_id) const {
  DetectionSet out;
  out.source_id = source_id;
  for (const auto& [key, boxes] : frames) {
    FrameDetections& frame = out.frames[key];
    frame.key = key;
    for (BBox box : boxes) {
      box.score = 1.0;
      box.detector_id = source_id;
      box.track_id.reset();
      frame.boxes.push_back(std::move(box));
    }
  }
  return out;
}

void CorpusMeta::validate() const {
  for (const auto& [video, info] : videos) {
    if (info.frame_count <= 0) {
      throw InvariantViolation("video " + video + ": frame count must be positive");
    }
    if (!(info.width > 0.0) || !(info.height > 0.0)) {
      throw InvariantViolation("video " + video + ": dimensions must be positive");
    }
  }
}

std::map<std::string, std::int64_t> CorpusMeta::video_lengths() const {
  std::map<std::string, std::int64_t> out;
  for (const auto& [video, info] : videos) out[video] = info.frame_count;
  return out;
}

const std::string& CategoryMap::superclass(const std::string& category) const {
  auto it = mapping_.find(category);
  if (it == mapping_.end()) throw UnmappedCategory(category);
  return it->second;
}

namespace {

// Returns false when the box is dropped.
bool remap(BBox& box, const CategoryMap& cmap) {
  const std::string& target = cmap.superclass(box.category);
  if (target == CategoryMap::kDropCategory) return false;
  box.category = target;
  return true;
}

}  // namespace

DetectionSet map_to_superclass(const DetectionSet& dets, const CategoryMap& cmap) {
  DetectionSet out;
  out.source_id = dets.source_id;
  for (const auto& [key, frame] : dets.frames) {
    FrameDetections& mapped = out.frames[key];
    mapped.key = key;
    for (BBox box : frame.boxes) {
      if (remap(box, cmap)) mapped.boxes.push_back(std::move(box));
    }
  }
  return out;
}

GroundTruthSet map_to_superclass(const GroundTruthSet& gt, const CategoryMap& cmap) {
  GroundTruthSet out;
  for (const auto& [key, boxes] : gt.frames) {
    auto& mapped = out.frames[key];
    for (BBox box : boxes) {
      if (remap(box, cmap)) mapped.push_back(std::move(box));
    }
  }
  return out;
}

}  // namespace detfuse
