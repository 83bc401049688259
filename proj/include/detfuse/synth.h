#ifndef DETFUSE_SYNTH_H_
#define DETFUSE_SYNTH_H_

// Synthetic corpora and noisy detectors for desk-scale experiments.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "detfuse/bbox.h"

namespace detfuse {

struct ScoreModel {
  double mean = 0.7;
  double sigma = 0.15;
};

struct NoiseProfile {
  // Per-corner Gaussian jitter in pixels.
  double coord_jitter_sigma = 0.0;
  ScoreModel score_model;
  // Probability that a ground-truth box is missed.
  double miss_rate = 0.0;
  // Expected number of false positives per frame (Poisson).
  double fp_rate = 0.0;
  ScoreModel fp_score_model{0.3, 0.15};
  std::uint64_t seed = 0;

  // Throws InvalidProfile.
  void validate() const;
};

struct SyntheticDetectorSpec {
  std::string detector_id;
  NoiseProfile profile;
};

// Sampled scores are clamped to [kMinScore, kMaxScore], inside (0, 1).
inline constexpr double kMinScore = 1e-6;
inline constexpr double kMaxScore = 1.0 - 1e-6;

// Simulates a detector. Each ground-truth box is dropped with miss_rate;
// survivors get per-corner jitter (corners re-sorted if they cross) and a
// sampled score. Every frame listed in meta additionally receives
// Poisson(fp_rate) false positives with log-uniform sizes between 4 px and
// half the frame dimension. Randomness is drawn from a stream keyed by
// (seed, detector_id, video_id, frame_id), so output does not depend on
// iteration order. Throws InvalidProfile, or InvariantViolation when gt holds
// a video that meta does not describe.
DetectionSet perturb_ground_truth(const GroundTruthSet& gt, const CorpusMeta& meta,
                                  const SyntheticDetectorSpec& spec);

// A detector that is accurate on `specialized_frames` and noisy elsewhere,
// used as a stand-in for a model trained on a few labeled frames.
struct LabelerSpec {
  std::string detector_id = "labeler";
  NoiseProfile specialized;
  NoiseProfile general;
};

DetectionSet simulate_labeler(const GroundTruthSet& gt, const CorpusMeta& meta,
                              const LabelerSpec& spec, const FrameSet& specialized_frames);

// Per video: B = max(1, round(fraction * N)) frames at floor(k * N / B).
// Throws InvalidConfig unless 0 < budget_fraction <= 1.
FrameSet sample_label_frames(const std::map<std::string, std::int64_t>& video_lengths,
                             double budget_fraction);

// Median over tracks of (last frame - first frame + 1) within a video; an
// even count averages the two middle values. Throws NoTracks.
double median_object_duration(const GroundTruthSet& gt);

// Moving-object ground truth: objects enter at random frames, live for a
// random duration, and drift linearly inside the frame.
struct SyntheticCorpusSpec {
  std::vector<std::string> video_ids{"video0"};
  std::int64_t frames_per_video = 100;
  double width = 1242.0;
  double height = 375.0;
  // Average number of objects visible in a frame.
  double objects_per_frame = 3.0;
  std::int64_t min_duration = 10;
  std::int64_t max_duration = 60;
  double min_box_size = 40.0;
  double max_box_size = 160.0;
  // Pixels per frame.
  double max_speed = 3.0;
  std::string category = "vehicle";
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  CorpusMeta meta;
  GroundTruthSet gt;
};

SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec);

}  // namespace detfuse

#endif  // DETFUSE_SYNTH_H_
