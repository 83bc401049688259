#include "detfuse/map_eval.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "detfuse/errors.h"

namespace detfuse {

std::vector<double> coco_iou_thresholds() {
  std::vector<double> out;
  for (int i = 0; i < 10; ++i) out.push_back((50.0 + 5.0 * i) / 100.0);
  return out;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw InvalidConfig("no IOU thresholds");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t < 1.0)) throw InvalidConfig("IOU thresholds must lie in (0, 1)");
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw InvalidConfig("IOU thresholds must be strictly increasing");
    }
  }
  if (recall_points < 2) throw InvalidConfig("recall_points must be >= 2");
  if (max_dets_per_frame == 0) throw InvalidConfig("max_dets_per_frame must be >= 1");
}

std::vector<ScoredFlag> match_detections_to_gt(const std::vector<BBox>& dets,
                                               const std::vector<BBox>& gt, double iou_t) {
  std::vector<const BBox*> order;
  order.reserve(dets.size());
  for (const BBox& d : dets) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const BBox* a, const BBox* b) {
    return score_then_geometry_less(*a, *b);
  });

  std::vector<bool> taken(gt.size(), false);
  std::vector<ScoredFlag> flags;
  flags.reserve(order.size());
  for (const BBox* det : order) {
    std::ptrdiff_t best = -1;
    double best_iou = iou_t;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double overlap = iou(*det, gt[g]);
      if (overlap >= best_iou && (best < 0 || overlap > best_iou)) {
        best = static_cast<std::ptrdiff_t>(g);
        best_iou = overlap;
      }
    }
    if (best >= 0) taken[static_cast<std::size_t>(best)] = true;
    flags.push_back({det->score, best >= 0});
  }
  return flags;
}

double average_precision(const std::vector<ScoredFlag>& flags, std::size_t num_gt,
                         int recall_points) {
  if (num_gt == 0) return flags.empty() ? 1.0 : 0.0;
  if (flags.empty()) return 0.0;

  std::vector<double> precision(flags.size());
  std::vector<double> recall(flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i].true_positive) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = flags.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }

  double sum = 0.0;
  const double denom = static_cast<double>(recall_points - 1);
  for (int k = 0; k < recall_points; ++k) {
    const double r = static_cast<double>(k) / denom;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it == recall.end()) break;
    sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / static_cast<double>(recall_points);
}

namespace {

struct PooledFlag {
  double score;
  const FrameKey* key;
  const BBox* box;
  bool true_positive;
};

bool pooled_less(const PooledFlag& a, const PooledFlag& b) {
  if (a.score != b.score) return a.score > b.score;
  if (*a.key != *b.key) return *a.key < *b.key;
  return geometry_less(*a.box, *b.box);
}

struct FrameView {
  const FrameKey* key;
  std::vector<BBox> dets;  // capped, best first
  const std::vector<BBox>* gt;
};

double pooled_ap(std::vector<PooledFlag> pooled, std::size_t num_gt, int recall_points) {
  std::stable_sort(pooled.begin(), pooled.end(), pooled_less);
  std::vector<ScoredFlag> flags;
  flags.reserve(pooled.size());
  for (const PooledFlag& p : pooled) flags.push_back({p.score, p.true_positive});
  return average_precision(flags, num_gt, recall_points);
}

}  // namespace

EvalReport coco_map(const DetectionSet& dets, const GroundTruthSet& gt,
                    const EvalConfig& cfg) {
  cfg.validate();
  if (gt.box_count() == 0) throw EmptyGroundTruth();

  static const std::vector<BBox> kNoBoxes;
  std::set<FrameKey> keys;
  for (const auto& [key, frame] : dets.frames) keys.insert(key);
  for (const auto& [key, boxes] : gt.frames) keys.insert(key);

  std::vector<FrameView> views;
  views.reserve(keys.size());
  std::map<std::string, std::size_t> gt_per_video;
  EvalReport report;
  for (const FrameKey& key : keys) {
    FrameView view{&key, {}, &kNoBoxes};
    if (auto it = dets.frames.find(key); it != dets.frames.end()) {
      view.dets = it->second.boxes;
      std::stable_sort(view.dets.begin(), view.dets.end(), score_then_geometry_less);
      if (view.dets.size() > cfg.max_dets_per_frame) view.dets.resize(cfg.max_dets_per_frame);
    }
    if (auto it = gt.frames.find(key); it != gt.frames.end()) view.gt = &it->second;
    gt_per_video[key.video_id] += view.gt->size();
    report.num_gt += view.gt->size();
    report.num_dets += view.dets.size();
    views.push_back(std::move(view));
  }

  std::map<std::string, std::vector<double>> video_aps;
  for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
    const double thresh = cfg.iou_thresholds[t];
    std::vector<PooledFlag> all;
    std::map<std::string, std::vector<PooledFlag>> by_video;
    for (const FrameView& view : views) {
      // view.dets is already in matching order, so flags line up with boxes.
      const auto flags = match_detections_to_gt(view.dets, *view.gt, thresh);
      for (std::size_t i = 0; i < flags.size(); ++i) {
        const PooledFlag p{flags[i].score, view.key, &view.dets[i], flags[i].true_positive};
        all.push_back(p);
        by_video[view.key->video_id].push_back(p);
      }
    }
    if (t == 0) {
      for (const PooledFlag& p : all) {
        if (p.true_positive) {
          ++report.counts.true_positives;
        } else {
          ++report.counts.false_positives;
        }
      }
      report.counts.false_negatives = report.num_gt - report.counts.true_positives;
    }
    report.ap_per_threshold.push_back(
        {thresh, pooled_ap(std::move(all), report.num_gt, cfg.recall_points)});
    for (const auto& [video, count] : gt_per_video) {
      if (count == 0) continue;
      video_aps[video].push_back(
          pooled_ap(std::move(by_video[video]), count, cfg.recall_points));
    }
  }

  double sum = 0.0;
  for (const ThresholdAp& ap : report.ap_per_threshold) sum += ap.ap;
  report.overall_map = sum / static_cast<double>(report.ap_per_threshold.size());
  for (const auto& [video, aps] : video_aps) {
    report.map_per_video[video] =
        std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
  }
  return report;
}

}  // namespace detfuse
