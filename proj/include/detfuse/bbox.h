#ifndef DETFUSE_BBOX_H_
#define DETFUSE_BBOX_H_

// Domain types shared by every stage: boxes, per-frame groupings, corpora,
// category superclass maps, and box geometry.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace detfuse {

// Axis-aligned pixel rectangle. (x1, y1) is the inclusive top-left corner and
// (x2, y2) the exclusive bottom-right corner; coordinates are continuous.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double score = 1.0;
  std::string category;
  // Absent for ground truth.
  std::optional<std::string> detector_id;
  // Ground truth only: links one physical object across frames.
  std::optional<std::string> track_id;
  // Number of detectors that agreed on this box, set by merging.
  std::optional<int> consensus_n;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const BBox&) const = default;
};

// Throws InvariantViolation unless x1 < x2, y1 < y2, all coordinates are
// finite and 0 <= score <= 1.
void validate(const BBox& box);

// Strict weak order on (x1, y1, x2, y2) only.
bool geometry_less(const BBox& a, const BBox& b);

// Descending score, then ascending geometry. Used wherever a deterministic
// "best first" order is needed.
bool score_then_geometry_less(const BBox& a, const BBox& b);

// Intersection over union; symmetric, 1 for identical boxes, 0 when disjoint.
double iou(const BBox& a, const BBox& b);

struct FrameKey {
  std::string video_id;
  std::int64_t frame_id = 0;

  auto operator<=>(const FrameKey&) const = default;
  bool operator==(const FrameKey&) const = default;
};

std::string to_string(const FrameKey& key);

struct FrameDetections {
  FrameKey key;
  std::vector<BBox> boxes;
};

// One source's detections over a corpus, keyed by frame.
struct DetectionSet {
  std::string source_id;
  std::map<FrameKey, FrameDetections> frames;

  // Appends a validated box, creating the frame entry if needed.
  void add(const FrameKey& key, BBox box);
  std::size_t box_count() const;
};

struct GroundTruthSet {
  std::map<FrameKey, std::vector<BBox>> frames;

  // Validates the box, forces score to 1.0 and rejects a track id already
  // used in the same frame.
  void add(const FrameKey& key, BBox box);
  std::size_t box_count() const;

  // Same boxes viewed as detections with score 1.0.
  DetectionSet as_detections(const std::string& source_id) const;
};

// Per-video frame counts and frame pixel dimensions.
struct VideoInfo {
  std::int64_t frame_count = 0;
  double width = 0.0;
  double height = 0.0;
};

struct CorpusMeta {
  std::map<std::string, VideoInfo> videos;

  // Throws InvariantViolation on non-positive counts or dimensions.
  void validate() const;
  std::map<std::string, std::int64_t> video_lengths() const;
};

using FrameSet = std::set<FrameKey>;

// Category -> superclass. A superclass equal to kDropCategory removes the box.
class CategoryMap {
 public:
  static constexpr const char* kDropCategory = "DROP";

  CategoryMap() = default;
  explicit CategoryMap(std::map<std::string, std::string> mapping)
      : mapping_(std::move(mapping)) {}

  void set(const std::string& category, const std::string& superclass) {
    mapping_[category] = superclass;
  }
  // Throws UnmappedCategory.
  const std::string& superclass(const std::string& category) const;
  const std::map<std::string, std::string>& mapping() const { return mapping_; }

 private:
  std::map<std::string, std::string> mapping_;
};

// Replaces every box category by its superclass and removes dropped boxes.
// Frame entries are kept even if they become empty.
DetectionSet map_to_superclass(const DetectionSet& dets, const CategoryMap& cmap);
GroundTruthSet map_to_superclass(const GroundTruthSet& gt, const CategoryMap& cmap);

}  // namespace detfuse

#endif  // DETFUSE_BBOX_H_
