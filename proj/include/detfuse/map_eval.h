#ifndef DETFUSE_MAP_EVAL_H_
#define DETFUSE_MAP_EVAL_H_

// COCO-style mAP@0.5:0.95 for a single (super)class. Detections are pooled
// over the whole corpus and ranked by score before the PR curve is built.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "detfuse/bbox.h"

namespace detfuse {

// IOU thresholds 0.50, 0.55, ..., 0.95, each built as (50 + 5 i) / 100.
std::vector<double> coco_iou_thresholds();

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  int recall_points = 101;
  std::size_t max_dets_per_frame = 100;

  // Throws InvalidConfig.
  void validate() const;
};

struct ScoredFlag {
  double score = 0.0;
  bool true_positive = false;
};

// Greedy matching in one frame. Detections are visited by descending score
// (ties by geometry); each takes the still-unmatched ground-truth box with the
// highest IOU if that IOU >= iou_t. The result is in visiting order.
std::vector<ScoredFlag> match_detections_to_gt(const std::vector<BBox>& dets,
                                               const std::vector<BBox>& gt, double iou_t);

// Interpolated AP from flags already sorted by descending score. Precision is
// made monotone from the right and sampled at recall_points evenly spaced
// recalls in [0, 1]. With num_gt == 0 the result is 0 if any detection exists
// and 1 otherwise.
double average_precision(const std::vector<ScoredFlag>& flags, std::size_t num_gt,
                         int recall_points = 101);

struct ThresholdAp {
  double iou_threshold = 0.0;
  double ap = 0.0;
};

struct MatchCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

struct EvalReport {
  double overall_map = 0.0;
  std::vector<ThresholdAp> ap_per_threshold;
  // Videos without ground-truth boxes are left out.
  std::map<std::string, double> map_per_video;
  // At the first threshold (0.5 by default).
  MatchCounts counts;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;
};

// Throws EmptyGroundTruth when gt holds no boxes.
EvalReport coco_map(const DetectionSet& dets, const GroundTruthSet& gt,
                    const EvalConfig& cfg = {});

}  // namespace detfuse

#endif  // DETFUSE_MAP_EVAL_H_
