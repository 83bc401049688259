#ifndef DETFUSE_EXPERIMENT_H_
#define DETFUSE_EXPERIMENT_H_

// Declarative synthetic experiments.
//
// Recipe (JSON):
//   {
//     "seed": 7,
//     "corpus": {"video_ids": ["v0"], "frames_per_video": 200, "width": 1242,
//                "height": 375, "objects_per_frame": 3, "min_duration": 10,
//                "max_duration": 60, "min_box_size": 40, "max_box_size": 160,
//                "max_speed": 3, "category": "vehicle"},
//     "detectors": [{"detector_id": "a", "coord_jitter_sigma": 2,
//                    "score_mean": 0.7, "score_sigma": 0.15, "miss_rate": 0.2,
//                    "fp_rate": 1, "fp_score_mean": 0.3, "fp_score_sigma": 0.15}],
//     "labeler": {"detector_id": "labeler", "fraction": 0.2,
//                 "specialized": {...profile...}, "general": {...profile...}},
//     "merge": {"iou_thresh": 0.7, "beta": 3, "n_ref": 2, "policy": "reweight"},
//     "fuse": {"iou_thresh": 0.3, "downweight": 0.5},
//     "budget_fractions": [0.01, 0.05, 0.1]
//   }
// Every key except "detectors" is optional. A detector's "seed" defaults to
// the recipe seed.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "detfuse/ensemble.h"
#include "detfuse/fusion.h"
#include "detfuse/map_eval.h"
#include "detfuse/synth.h"

namespace detfuse {

struct LabelerRecipe {
  LabelerSpec spec;
  // Share of frames, uniformly spaced, on which the labeler is specialized.
  double fraction = 0.2;
};

struct ExperimentRecipe {
  std::uint64_t seed = 0;
  SyntheticCorpusSpec corpus;
  std::vector<SyntheticDetectorSpec> detectors;
  std::optional<LabelerRecipe> labeler;
  MergeConfig merge;
  FuseConfig fuse;
  std::vector<double> budget_fractions;
};

// Throws ParseError or InvalidConfig / InvalidProfile.
ExperimentRecipe parse_recipe(const std::string& text);

struct ExperimentOutputs {
  SyntheticCorpus corpus;
  std::map<std::string, DetectionSet> detectors;
  std::optional<DetectionSet> labeler;
  std::optional<FrameSet> labeler_frames;
  std::map<double, FrameSet> budgets;
};

ExperimentOutputs generate_experiment(const ExperimentRecipe& recipe);

struct ExperimentResult {
  // Row name -> mAP. Rows: each detector, "ensemble", and when a labeler is
  // configured "labeler", "fused" and "fused+gt@<fraction>" per budget.
  std::vector<std::pair<std::string, double>> map_rows;
  DetectionSet ensemble;
  std::optional<DetectionSet> fused;
};

ExperimentResult run_experiment(const ExperimentRecipe& recipe,
                                const ExperimentOutputs& outputs);

// Writes gt.jsonl, meta.json, one <detector_id>.jsonl per detector,
// labeler.jsonl and labeled_frames_<fraction>.txt files into dir.
void write_experiment(const ExperimentOutputs& outputs, const std::filesystem::path& dir);

}  // namespace detfuse

#endif  // DETFUSE_EXPERIMENT_H_
