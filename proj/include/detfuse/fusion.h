#ifndef DETFUSE_FUSION_H_
#define DETFUSE_FUSION_H_

#include <string>

#include "detfuse/bbox.h"

namespace detfuse {

struct FuseConfig {
  double iou_thresh = 0.3;
  // Multiplier applied to boxes without a partner in the other source.
  double unmatched_downweight = 0.5;

  // Throws InvalidConfig unless 0 < iou_thresh < 1 and
  // 0 < unmatched_downweight <= 1.
  void validate() const;
};

// Merges mutually nearest pairs (IOU >= iou_thresh, same category) by
// averaging corners and scores, downweights every unpaired box, then runs NMS
// at iou_thresh. Throws FrameMismatch when the frame keys differ.
FrameDetections fuse_pair(const FrameDetections& a, const FrameDetections& b,
                          const FuseConfig& cfg, const std::string& output_id = "fused");

// fuse_pair over the union of frames; a frame missing from one side is fused
// with an empty frame.
DetectionSet fuse(const DetectionSet& a, const DetectionSet& b, const FuseConfig& cfg,
                  const std::string& output_id = "fused");

// Replaces the labeled frames with their ground-truth boxes (score 1.0).
// Throws MissingGroundTruth when a labeled frame has no ground-truth entry.
DetectionSet override_with_ground_truth(const DetectionSet& dets, const GroundTruthSet& gt,
                                        const FrameSet& labeled_frames);

}  // namespace detfuse

#endif  // DETFUSE_FUSION_H_
