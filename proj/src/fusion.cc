#include "detfuse/fusion.h"

#include <algorithm>
#include <map>

#include "detfuse/ensemble.h"
#include "detfuse/errors.h"

namespace detfuse {

void FuseConfig::validate() const {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw InvalidConfig("fusion iou_thresh must lie in (0, 1)");
  }
  if (!(unmatched_downweight > 0.0 && unmatched_downweight <= 1.0)) {
    throw InvalidConfig("unmatched_downweight must lie in (0, 1]");
  }
}

namespace {

// Two-source merge for one category; reuses the ensemble matcher with k = 2.
std::vector<BBox> fuse_category(std::vector<BBox> a, std::vector<BBox> b,
                                const FuseConfig& cfg) {
  std::stable_sort(a.begin(), a.end(), score_then_geometry_less);
  std::stable_sort(b.begin(), b.end(), score_then_geometry_less);
  const DetectorBoxes frame{std::move(a), std::move(b)};
  const NeighborMap neighbors = match_nearest_neighbors(frame, cfg.iou_thresh);

  std::vector<BBox> out;
  std::vector<bool> paired_b(frame[1].size(), false);
  for (std::size_t i = 0; i < frame[0].size(); ++i) {
    const BBox& box = frame[0][i];
    const auto nb = neighbors.at({0, i}, 1);
    if (nb && neighbors.at({1, *nb}, 0) == i) {
      const BBox& other = frame[1][*nb];
      // Keep the field order symmetric: (a + b) / 2 == (b + a) / 2 exactly.
      BBox merged = box;
      merged.x1 = (box.x1 + other.x1) / 2.0;
      merged.y1 = (box.y1 + other.y1) / 2.0;
      merged.x2 = (box.x2 + other.x2) / 2.0;
      merged.y2 = (box.y2 + other.y2) / 2.0;
      merged.score = (box.score + other.score) / 2.0;
      merged.consensus_n = 2;
      out.push_back(std::move(merged));
      paired_b[*nb] = true;
    } else {
      BBox single = box;
      single.score *= cfg.unmatched_downweight;
      single.consensus_n = 1;
      out.push_back(std::move(single));
    }
  }
  for (std::size_t j = 0; j < frame[1].size(); ++j) {
    if (paired_b[j]) continue;
    BBox single = frame[1][j];
    single.score *= cfg.unmatched_downweight;
    single.consensus_n = 1;
    out.push_back(std::move(single));
  }
  return nms(std::move(out), cfg.iou_thresh);
}

}  // namespace

FrameDetections fuse_pair(const FrameDetections& a, const FrameDetections& b,
                          const FuseConfig& cfg, const std::string& output_id) {
  cfg.validate();
  if (a.key != b.key) {
    throw FrameMismatch("cannot fuse " + to_string(a.key) + " with " + to_string(b.key));
  }
  std::map<std::string, std::pair<std::vector<BBox>, std::vector<BBox>>> by_category;
  for (const BBox& box : a.boxes) by_category[box.category].first.push_back(box);
  for (const BBox& box : b.boxes) by_category[box.category].second.push_back(box);

  FrameDetections out;
  out.key = a.key;
  for (auto& [category, sides] : by_category) {
    for (BBox& box : fuse_category(std::move(sides.first), std::move(sides.second), cfg)) {
      box.detector_id = output_id;
      box.track_id.reset();
      out.boxes.push_back(std::move(box));
    }
  }
  std::stable_sort(out.boxes.begin(), out.boxes.end(), score_then_geometry_less);
  return out;
}

DetectionSet fuse(const DetectionSet& a, const DetectionSet& b, const FuseConfig& cfg,
                  const std::string& output_id) {
  cfg.validate();
  FrameSet keys;
  for (const auto& [key, frame] : a.frames) keys.insert(key);
  for (const auto& [key, frame] : b.frames) keys.insert(key);

  DetectionSet out;
  out.source_id = output_id;
  for (const FrameKey& key : keys) {
    FrameDetections empty;
    empty.key = key;
    auto ia = a.frames.find(key);
    auto ib = b.frames.find(key);
    const FrameDetections& fa = ia != a.frames.end() ? ia->second : empty;
    const FrameDetections& fb = ib != b.frames.end() ? ib->second : empty;
    out.frames[key] = fuse_pair(fa, fb, cfg, output_id);
  }
  return out;
}

DetectionSet override_with_ground_truth(const DetectionSet& dets, const GroundTruthSet& gt,
                                        const FrameSet& labeled_frames) {
  DetectionSet out = dets;
  for (const FrameKey& key : labeled_frames) {
    auto it = gt.frames.find(key);
    if (it == gt.frames.end()) {
      throw MissingGroundTruth("labeled frame " + to_string(key) + " has no ground truth");
    }
    FrameDetections frame;
    frame.key = key;
    for (BBox box : it->second) {
      box.score = 1.0;
      box.detector_id = dets.source_id;
      box.track_id.reset();
      box.consensus_n.reset();
      frame.boxes.push_back(std::move(box));
    }
    std::stable_sort(frame.boxes.begin(), frame.boxes.end(), score_then_geometry_less);
    out.frames[key] = std::move(frame);
  }
  return out;
}

}  // namespace detfuse
