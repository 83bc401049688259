#ifndef DETFUSE_ENSEMBLE_H_
#define DETFUSE_ENSEMBLE_H_

// Greedy IOU-based merging of several detectors' boxes in one frame, with
// consensus confidence reweighting.
//
// Per frame and category:
//   1. every box finds, in each other detector, its highest-IOU box with
//      IOU >= iou_thresh;
//   2. every box anchors a tuple of itself plus the neighbors for which the
//      relation is mutual (members need only be mutual with the anchor);
//   3. tuples are consumed greedily, largest first, and each surviving tuple
//      becomes one box with averaged corners and scores;
//   4. scores are adjusted by the policy and NMS runs at iou_thresh.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "detfuse/bbox.h"

namespace detfuse {

enum class MergePolicy {
  // Consensus reweighting of every merged box.
  kReweight,
  // Averaged scores pass through unchanged ("1-of-k").
  kKeepAll,
  // Boxes seen by a single detector are removed ("2-of-k").
  kDropSingletons,
};

std::string to_string(MergePolicy policy);
// Accepts "reweight", "keep-all", "drop-singletons"; throws InvalidConfig.
MergePolicy parse_merge_policy(const std::string& name);

struct MergeConfig {
  double iou_thresh = 0.7;
  double beta = 3.0;
  // Consensus count whose scores are left untouched.
  int n_ref = 2;
  MergePolicy policy = MergePolicy::kReweight;

  // Throws InvalidConfig unless 0 < iou_thresh < 1, beta >= 1, n_ref >= 1.
  void validate() const;
};

// Boxes of one frame and category, outer index = detector.
using DetectorBoxes = std::vector<std::vector<BBox>>;

struct BoxRef {
  std::size_t detector = 0;
  std::size_t index = 0;

  auto operator<=>(const BoxRef&) const = default;
};

// nearest[d][i][e] is the index of the box in detector e closest to box i of
// detector d, or nullopt when none reaches the threshold. nearest[d][i][d] is
// always nullopt.
struct NeighborMap {
  std::vector<std::vector<std::vector<std::optional<std::size_t>>>> nearest;

  std::optional<std::size_t> at(BoxRef box, std::size_t other_detector) const {
    return nearest[box.detector][box.index][other_detector];
  }
};

struct MutualTuple {
  BoxRef anchor;
  // Includes the anchor; at most one member per detector, ordered by detector.
  std::vector<BoxRef> members;

  std::size_t cardinality() const { return members.size(); }
};

// Step 1. Ties on IOU prefer the higher score, then the smaller geometry.
NeighborMap match_nearest_neighbors(const DetectorBoxes& frame, double iou_thresh);

// Step 2. One tuple per box, in (detector, index) order.
std::vector<MutualTuple> build_mutual_tuples(const NeighborMap& neighbors);

// Step 3. Tuples are visited by descending cardinality, then descending mean
// member score, then anchor geometry. A tuple touching an already consumed box
// is skipped. Output boxes carry consensus_n = cardinality and the anchor's
// category.
std::vector<BBox> merge_tuples(const DetectorBoxes& frame,
                               const std::vector<MutualTuple>& tuples);

// score^(1 / beta^(n - n_ref)).
double reweight_confidence(double score, int n, const MergeConfig& cfg);

// Greedy NMS: keeps the best remaining box and drops every remaining box with
// IOU >= iou_thresh to it. Equal scores keep the smaller geometry. Output is
// in descending score order.
std::vector<BBox> nms(std::vector<BBox> boxes, double iou_thresh);

// Steps 1-4 for one category. Boxes within each detector may be in any order.
std::vector<BBox> ensemble_boxes(const DetectorBoxes& frame, const MergeConfig& cfg);

// Groups the frame's boxes by detector_id and category, runs ensemble_boxes
// per category, and tags the output with output_id.
FrameDetections ensemble_frame(const FrameDetections& frame, const MergeConfig& cfg,
                               const std::string& output_id = "ensemble");

// Applies ensemble_frame to every frame of the union of the inputs. Boxes are
// grouped by their detector_id, not by which set they came from.
DetectionSet ensemble(const std::vector<DetectionSet>& inputs, const MergeConfig& cfg,
                      const std::string& output_id = "ensemble");

}  // namespace detfuse

#endif  // DETFUSE_ENSEMBLE_H_
