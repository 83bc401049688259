#include "detfuse/synth.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "detfuse/errors.h"

namespace detfuse {

void NoiseProfile::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw InvalidProfile(what);
  };
  check(coord_jitter_sigma >= 0.0 && std::isfinite(coord_jitter_sigma),
        "coord_jitter_sigma must be >= 0");
  check(score_model.sigma >= 0.0 && std::isfinite(score_model.sigma),
        "score sigma must be >= 0");
  check(fp_score_model.sigma >= 0.0 && std::isfinite(fp_score_model.sigma),
        "fp score sigma must be >= 0");
  check(std::isfinite(score_model.mean) && std::isfinite(fp_score_model.mean),
        "score means must be finite");
  check(miss_rate >= 0.0 && miss_rate <= 1.0, "miss_rate must lie in [0, 1]");
  check(fp_rate >= 0.0 && std::isfinite(fp_rate), "fp_rate must be >= 0");
}

namespace {

constexpr double kMinExtent = 1e-3;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, detector, video, frame).
std::mt19937_64 stream_for(std::uint64_t seed, const std::string& detector,
                           const std::string& video, std::int64_t frame) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, &seed, sizeof(seed));
  h = fnv1a(h, detector.data(), detector.size());
  h = fnv1a(h, "\x1f", 1);
  h = fnv1a(h, video.data(), video.size());
  h = fnv1a(h, "\x1f", 1);
  h = fnv1a(h, &frame, sizeof(frame));
  return std::mt19937_64(splitmix64(h));
}

double sample_score(std::mt19937_64& rng, const ScoreModel& model) {
  double s = model.mean;
  if (model.sigma > 0.0) s = std::normal_distribution<double>(model.mean, model.sigma)(rng);
  return std::clamp(s, kMinScore, kMaxScore);
}

double jitter(std::mt19937_64& rng, double value, double sigma) {
  if (sigma <= 0.0) return value;
  return value + std::normal_distribution<double>(0.0, sigma)(rng);
}

// Orders the pair and keeps a minimal positive extent.
void fix_interval(double& lo, double& hi) {
  if (hi < lo) std::swap(lo, hi);
  if (hi - lo < kMinExtent) hi = lo + kMinExtent;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

void emit_frame(const std::vector<BBox>* gt_boxes, const VideoInfo& info,
                const FrameKey& key, const SyntheticDetectorSpec& spec,
                DetectionSet& out) {
  const NoiseProfile& p = spec.profile;
  std::mt19937_64 rng = stream_for(p.seed, spec.detector_id, key.video_id, key.frame_id);
  std::bernoulli_distribution miss(p.miss_rate);

  FrameDetections& frame = out.frames[key];
  frame.key = key;
  if (gt_boxes) {
    for (const BBox& truth : *gt_boxes) {
      // Draw every variate regardless of the miss outcome so the stream stays
      // aligned across profiles that differ only in miss_rate.
      const bool missed = miss(rng);
      double x1 = jitter(rng, truth.x1, p.coord_jitter_sigma);
      double y1 = jitter(rng, truth.y1, p.coord_jitter_sigma);
      double x2 = jitter(rng, truth.x2, p.coord_jitter_sigma);
      double y2 = jitter(rng, truth.y2, p.coord_jitter_sigma);
      const double score = sample_score(rng, p.score_model);
      if (missed) continue;
      fix_interval(x1, x2);
      fix_interval(y1, y2);
      BBox box;
      box.x1 = x1;
      box.y1 = y1;
      box.x2 = x2;
      box.y2 = y2;
      box.score = score;
      box.category = truth.category;
      box.detector_id = spec.detector_id;
      frame.boxes.push_back(std::move(box));
    }
  }

  if (p.fp_rate > 0.0) {
    const std::string category =
        gt_boxes && !gt_boxes->empty() ? gt_boxes->front().category : "vehicle";
    const int count = std::poisson_distribution<int>(p.fp_rate)(rng);
    const double max_w = std::max(4.0, info.width / 2.0);
    const double max_h = std::max(4.0, info.height / 2.0);
    for (int i = 0; i < count; ++i) {
      const double w = std::min(log_uniform(rng, 4.0, max_w), info.width);
      const double h = std::min(log_uniform(rng, 4.0, max_h), info.height);
      const double x = std::uniform_real_distribution<double>(0.0, info.width - w)(rng);
      const double y = std::uniform_real_distribution<double>(0.0, info.height - h)(rng);
      BBox box;
      box.x1 = x;
      box.y1 = y;
      box.x2 = x + w;
      box.y2 = y + h;
      fix_interval(box.x1, box.x2);
      fix_interval(box.y1, box.y2);
      box.score = sample_score(rng, p.fp_score_model);
      box.category = category;
      box.detector_id = spec.detector_id;
      frame.boxes.push_back(std::move(box));
    }
  }
  if (frame.boxes.empty()) out.frames.erase(key);
}

}  // namespace

DetectionSet perturb_ground_truth(const GroundTruthSet& gt, const CorpusMeta& meta,
                                  const SyntheticDetectorSpec& spec) {
  spec.profile.validate();
  meta.validate();
  for (const auto& [key, boxes] : gt.frames) {
    if (!meta.videos.count(key.video_id)) {
      throw InvariantViolation("corpus metadata lacks video " + key.video_id);
    }
  }
  DetectionSet out;
  out.source_id = spec.detector_id;
  for (const auto& [video, info] : meta.videos) {
    for (std::int64_t f = 0; f < info.frame_count; ++f) {
      const FrameKey key{video, f};
      auto it = gt.frames.find(key);
      emit_frame(it != gt.frames.end() ? &it->second : nullptr, info, key, spec, out);
    }
  }
  // Ground-truth frames beyond the declared frame count.
  for (const auto& [key, boxes] : gt.frames) {
    if (key.frame_id >= 0 && key.frame_id < meta.videos.at(key.video_id).frame_count) continue;
    emit_frame(&boxes, meta.videos.at(key.video_id), key, spec, out);
  }
  return out;
}

DetectionSet simulate_labeler(const GroundTruthSet& gt, const CorpusMeta& meta,
                              const LabelerSpec& spec, const FrameSet& specialized_frames) {
  const DetectionSet good =
      perturb_ground_truth(gt, meta, {spec.detector_id, spec.specialized});
  const DetectionSet bad = perturb_ground_truth(gt, meta, {spec.detector_id, spec.general});
  DetectionSet out;
  out.source_id = spec.detector_id;
  for (const auto& [key, frame] : good.frames) {
    if (specialized_frames.count(key)) out.frames[key] = frame;
  }
  for (const auto& [key, frame] : bad.frames) {
    if (!specialized_frames.count(key)) out.frames[key] = frame;
  }
  return out;
}

FrameSet sample_label_frames(const std::map<std::string, std::int64_t>& video_lengths,
                             double budget_fraction) {
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
    throw InvalidConfig("budget fraction must lie in (0, 1]");
  }
  FrameSet out;
  for (const auto& [video, n] : video_lengths) {
    if (n <= 0) continue;
    const auto budget = std::max<std::int64_t>(
        1, std::llround(budget_fraction * static_cast<double>(n)));
    for (std::int64_t k = 0; k < budget; ++k) out.insert({video, k * n / budget});
  }
  return out;
}

double median_object_duration(const GroundTruthSet& gt) {
  std::map<std::pair<std::string, std::string>, std::pair<std::int64_t, std::int64_t>> spans;
  for (const auto& [key, boxes] : gt.frames) {
    for (const BBox& box : boxes) {
      if (!box.track_id) continue;
      auto [it, inserted] =
          spans.try_emplace({key.video_id, *box.track_id}, key.frame_id, key.frame_id);
      if (!inserted) {
        it->second.first = std::min(it->second.first, key.frame_id);
        it->second.second = std::max(it->second.second, key.frame_id);
      }
    }
  }
  if (spans.empty()) throw NoTracks();
  std::vector<std::int64_t> durations;
  durations.reserve(spans.size());
  for (const auto& [id, span] : spans) durations.push_back(span.second - span.first + 1);
  std::sort(durations.begin(), durations.end());
  const std::size_t mid = durations.size() / 2;
  if (durations.size() % 2 == 1) return static_cast<double>(durations[mid]);
  return (static_cast<double>(durations[mid - 1]) + static_cast<double>(durations[mid])) / 2.0;
}

SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.frames_per_video <= 0 || spec.min_duration < 1 ||
      spec.max_duration < spec.min_duration || !(spec.min_box_size > 0.0) ||
      spec.max_box_size < spec.min_box_size || spec.max_box_size > spec.width ||
      spec.max_box_size > spec.height || spec.objects_per_frame < 0.0) {
    throw InvalidConfig("inconsistent synthetic corpus spec");
  }
  SyntheticCorpus corpus;
  const double mean_duration =
      std::min(static_cast<double>(spec.frames_per_video),
               (static_cast<double>(spec.min_duration) + static_cast<double>(spec.max_duration)) / 2.0);
  for (const std::string& video : spec.video_ids) {
    corpus.meta.videos[video] = {spec.frames_per_video, spec.width, spec.height};
    std::mt19937_64 rng = stream_for(spec.seed, "corpus", video, -1);
    const auto tracks = static_cast<std::int64_t>(std::llround(
        spec.objects_per_frame * static_cast<double>(spec.frames_per_video) / mean_duration));
    std::uniform_int_distribution<std::int64_t> duration(spec.min_duration, spec.max_duration);
    std::uniform_real_distribution<double> size(spec.min_box_size, spec.max_box_size);
    std::uniform_real_distribution<double> speed(-spec.max_speed, spec.max_speed);
    for (std::int64_t t = 0; t < tracks; ++t) {
      const std::int64_t dur = duration(rng);
      // Start so that the whole track fits when possible.
      const std::int64_t last_start = std::max<std::int64_t>(0, spec.frames_per_video - dur);
      const std::int64_t start =
          std::uniform_int_distribution<std::int64_t>(0, last_start)(rng);
      const double w = size(rng);
      const double h = size(rng) * 0.75;
      double x = std::uniform_real_distribution<double>(0.0, spec.width - w)(rng);
      double y = std::uniform_real_distribution<double>(0.0, spec.height - h)(rng);
      double vx = speed(rng);
      double vy = speed(rng) * 0.25;
      const std::string track = video + ":" + std::to_string(t);
      const std::int64_t end = std::min(start + dur, spec.frames_per_video);
      for (std::int64_t f = start; f < end; ++f) {
        BBox box;
        box.x1 = x;
        box.y1 = y;
        box.x2 = x + w;
        box.y2 = y + h;
        box.category = spec.category;
        box.track_id = track;
        corpus.gt.add({video, f}, std::move(box));
        x += vx;
        y += vy;
        if (x < 0.0 || x + w > spec.width) {
          vx = -vx;
          x = std::clamp(x, 0.0, spec.width - w);
        }
        if (y < 0.0 || y + h > spec.height) {
          vy = -vy;
          y = std::clamp(y, 0.0, spec.height - h);
        }
      }
    }
  }
  return corpus;
}

}  // namespace detfuse
