#include "detfuse/ensemble.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "detfuse/errors.h"

namespace detfuse {

std::string to_string(MergePolicy policy) {
  switch (policy) {
    case MergePolicy::kReweight:
      return "reweight";
    case MergePolicy::kKeepAll:
      return "keep-all";
    case MergePolicy::kDropSingletons:
      return "drop-singletons";
  }
  return "unknown";
}

MergePolicy parse_merge_policy(const std::string& name) {
  if (name == "reweight") return MergePolicy::kReweight;
  if (name == "keep-all") return MergePolicy::kKeepAll;
  if (name == "drop-singletons") return MergePolicy::kDropSingletons;
  throw InvalidConfig("unknown merge policy: " + name);
}

void MergeConfig::validate() const {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw InvalidConfig("iou_thresh must lie in (0, 1)");
  }
  if (!(beta >= 1.0) || !std::isfinite(beta)) {
    throw InvalidConfig("beta must be a finite value >= 1");
  }
  if (n_ref < 1) throw InvalidConfig("n_ref must be >= 1");
}

NeighborMap match_nearest_neighbors(const DetectorBoxes& frame, double iou_thresh) {
  const std::size_t k = frame.size();
  NeighborMap out;
  out.nearest.resize(k);
  for (std::size_t d = 0; d < k; ++d) {
    out.nearest[d].assign(frame[d].size(),
                          std::vector<std::optional<std::size_t>>(k));
    for (std::size_t i = 0; i < frame[d].size(); ++i) {
      const BBox& box = frame[d][i];
      for (std::size_t e = 0; e < k; ++e) {
        if (e == d) continue;
        std::optional<std::size_t> best;
        double best_iou = 0.0;
        for (std::size_t j = 0; j < frame[e].size(); ++j) {
          const BBox& cand = frame[e][j];
          const double overlap = iou(box, cand);
          if (overlap < iou_thresh) continue;
          bool better = !best || overlap > best_iou;
          if (best && overlap == best_iou) {
            const BBox& cur = frame[e][*best];
            better = cand.score > cur.score ||
                     (cand.score == cur.score && geometry_less(cand, cur));
          }
          if (better) {
            best = j;
            best_iou = overlap;
          }
        }
        out.nearest[d][i][e] = best;
      }
    }
  }
  return out;
}

std::vector<MutualTuple> build_mutual_tuples(const NeighborMap& neighbors) {
  std::vector<MutualTuple> tuples;
  const std::size_t k = neighbors.nearest.size();
  for (std::size_t d = 0; d < k; ++d) {
    for (std::size_t i = 0; i < neighbors.nearest[d].size(); ++i) {
      const BoxRef anchor{d, i};
      MutualTuple tuple{anchor, {}};
      for (std::size_t e = 0; e < k; ++e) {
        if (e == d) {
          tuple.members.push_back(anchor);
          continue;
        }
        const auto nb = neighbors.at(anchor, e);
        if (!nb) continue;
        const BoxRef other{e, *nb};
        if (neighbors.at(other, d) == i) tuple.members.push_back(other);
      }
      tuples.push_back(std::move(tuple));
    }
  }
  return tuples;
}

namespace {

const BBox& box_at(const DetectorBoxes& frame, BoxRef ref) {
  return frame[ref.detector][ref.index];
}

double mean_score(const DetectorBoxes& frame, const MutualTuple& tuple) {
  double sum = 0.0;
  for (BoxRef ref : tuple.members) sum += box_at(frame, ref).score;
  return sum / static_cast<double>(tuple.cardinality());
}

// Canonical order: each detector's boxes sorted best-first, so that results
// do not depend on the order boxes arrived in.
DetectorBoxes canonicalize(const DetectorBoxes& frame) {
  DetectorBoxes sorted = frame;
  for (auto& boxes : sorted) {
    std::stable_sort(boxes.begin(), boxes.end(), score_then_geometry_less);
  }
  return sorted;
}

}  // namespace

std::vector<BBox> merge_tuples(const DetectorBoxes& frame,
                               const std::vector<MutualTuple>& tuples) {
  struct Ranked {
    const MutualTuple* tuple;
    double mean;
  };
  std::vector<Ranked> order;
  order.reserve(tuples.size());
  for (const MutualTuple& t : tuples) order.push_back({&t, mean_score(frame, t)});
  std::stable_sort(order.begin(), order.end(), [&](const Ranked& a, const Ranked& b) {
    if (a.tuple->cardinality() != b.tuple->cardinality()) {
      return a.tuple->cardinality() > b.tuple->cardinality();
    }
    if (a.mean != b.mean) return a.mean > b.mean;
    const BBox& aa = box_at(frame, a.tuple->anchor);
    const BBox& ba = box_at(frame, b.tuple->anchor);
    if (geometry_less(aa, ba)) return true;
    if (geometry_less(ba, aa)) return false;
    return a.tuple->anchor < b.tuple->anchor;
  });

  std::set<BoxRef> consumed;
  std::vector<BBox> merged;
  for (const Ranked& r : order) {
    const MutualTuple& t = *r.tuple;
    const bool taken = std::any_of(t.members.begin(), t.members.end(),
                                   [&](BoxRef m) { return consumed.count(m) > 0; });
    if (taken) continue;
    BBox out = box_at(frame, t.anchor);
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    for (BoxRef m : t.members) {
      const BBox& b = box_at(frame, m);
      x1 += b.x1;
      y1 += b.y1;
      x2 += b.x2;
      y2 += b.y2;
      consumed.insert(m);
    }
    const double n = static_cast<double>(t.cardinality());
    out.x1 = x1 / n;
    out.y1 = y1 / n;
    out.x2 = x2 / n;
    out.y2 = y2 / n;
    out.score = r.mean;
    out.consensus_n = static_cast<int>(t.cardinality());
    out.track_id.reset();
    merged.push_back(std::move(out));
  }
  return merged;
}

double reweight_confidence(double score, int n, const MergeConfig& cfg) {
  if (n == cfg.n_ref || cfg.beta == 1.0) return score;
  const double exponent = std::pow(cfg.beta, static_cast<double>(cfg.n_ref - n));
  return std::clamp(std::pow(score, exponent), 0.0, 1.0);
}

std::vector<BBox> nms(std::vector<BBox> boxes, double iou_thresh) {
  std::stable_sort(boxes.begin(), boxes.end(), score_then_geometry_less);
  std::vector<BBox> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (suppressed[i]) continue;
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (!suppressed[j] && iou(boxes[i], boxes[j]) >= iou_thresh) suppressed[j] = true;
    }
    kept.push_back(std::move(boxes[i]));
  }
  return kept;
}

std::vector<BBox> ensemble_boxes(const DetectorBoxes& frame, const MergeConfig& cfg) {
  cfg.validate();
  const DetectorBoxes sorted = canonicalize(frame);
  const NeighborMap neighbors = match_nearest_neighbors(sorted, cfg.iou_thresh);
  std::vector<BBox> merged = merge_tuples(sorted, build_mutual_tuples(neighbors));

  std::vector<BBox> scored;
  scored.reserve(merged.size());
  for (BBox& box : merged) {
    const int n = box.consensus_n.value_or(1);
    switch (cfg.policy) {
      case MergePolicy::kReweight:
        box.score = reweight_confidence(box.score, n, cfg);
        break;
      case MergePolicy::kDropSingletons:
        if (n == 1) continue;
        break;
      case MergePolicy::kKeepAll:
        break;
    }
    scored.push_back(std::move(box));
  }
  return nms(std::move(scored), cfg.iou_thresh);
}

FrameDetections ensemble_frame(const FrameDetections& frame, const MergeConfig& cfg,
                               const std::string& output_id) {
  // category -> detector id -> boxes
  std::map<std::string, std::map<std::string, std::vector<BBox>>> groups;
  for (const BBox& box : frame.boxes) {
    groups[box.category][box.detector_id.value_or("")].push_back(box);
  }
  FrameDetections out;
  out.key = frame.key;
  for (auto& [category, by_detector] : groups) {
    DetectorBoxes per_detector;
    per_detector.reserve(by_detector.size());
    for (auto& [id, boxes] : by_detector) per_detector.push_back(std::move(boxes));
    for (BBox& box : ensemble_boxes(per_detector, cfg)) {
      box.detector_id = output_id;
      out.boxes.push_back(std::move(box));
    }
  }
  std::stable_sort(out.boxes.begin(), out.boxes.end(), score_then_geometry_less);
  return out;
}

DetectionSet ensemble(const std::vector<DetectionSet>& inputs, const MergeConfig& cfg,
                      const std::string& output_id) {
  cfg.validate();
  std::map<FrameKey, FrameDetections> pooled;
  for (const DetectionSet& set : inputs) {
    for (const auto& [key, frame] : set.frames) {
      FrameDetections& dst = pooled[key];
      dst.key = key;
      for (BBox box : frame.boxes) {
        if (!box.detector_id) box.detector_id = set.source_id;
        dst.boxes.push_back(std::move(box));
      }
    }
  }
  DetectionSet out;
  out.source_id = output_id;
  for (const auto& [key, frame] : pooled) {
    out.frames[key] = ensemble_frame(frame, cfg, output_id);
  }
  return out;
}

}  // namespace detfuse
