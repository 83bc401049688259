#include "detfuse/experiment.h"

#include <set>
#include <sstream>

#include "detfuse/errors.h"
#include "detfuse/io.h"
#include "json.hpp"

namespace detfuse {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("recipe field ") + key + ": " + e.what());
  }
}

NoiseProfile parse_profile(const json& obj, std::uint64_t default_seed) {
  if (!obj.is_object()) throw ParseError(0, "noise profile must be an object");
  NoiseProfile p;
  p.coord_jitter_sigma = get_or(obj, "coord_jitter_sigma", p.coord_jitter_sigma);
  p.score_model.mean = get_or(obj, "score_mean", p.score_model.mean);
  p.score_model.sigma = get_or(obj, "score_sigma", p.score_model.sigma);
  p.miss_rate = get_or(obj, "miss_rate", p.miss_rate);
  p.fp_rate = get_or(obj, "fp_rate", p.fp_rate);
  p.fp_score_model.mean = get_or(obj, "fp_score_mean", p.fp_score_model.mean);
  p.fp_score_model.sigma = get_or(obj, "fp_score_sigma", p.fp_score_model.sigma);
  p.seed = get_or<std::uint64_t>(obj, "seed", default_seed);
  p.validate();
  return p;
}

std::string budget_name(double fraction) { return format_number(fraction); }

double map_of(const DetectionSet& dets, const GroundTruthSet& gt) {
  return coco_map(dets, gt).overall_map;
}

}  // namespace

ExperimentRecipe parse_recipe(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  if (!doc.is_object()) throw ParseError(0, "recipe must be a JSON object");

  ExperimentRecipe r;
  r.seed = get_or<std::uint64_t>(doc, "seed", 0);
  if (auto it = doc.find("corpus"); it != doc.end()) {
    const json& c = *it;
    SyntheticCorpusSpec& s = r.corpus;
    s.video_ids = get_or(c, "video_ids", s.video_ids);
    s.frames_per_video = get_or(c, "frames_per_video", s.frames_per_video);
    s.width = get_or(c, "width", s.width);
    s.height = get_or(c, "height", s.height);
    s.objects_per_frame = get_or(c, "objects_per_frame", s.objects_per_frame);
    s.min_duration = get_or(c, "min_duration", s.min_duration);
    s.max_duration = get_or(c, "max_duration", s.max_duration);
    s.min_box_size = get_or(c, "min_box_size", s.min_box_size);
    s.max_box_size = get_or(c, "max_box_size", s.max_box_size);
    s.max_speed = get_or(c, "max_speed", s.max_speed);
    s.category = get_or(c, "category", s.category);
  }
  r.corpus.seed = r.seed;

  auto dets = doc.find("detectors");
  if (dets == doc.end() || !dets->is_array() || dets->empty()) {
    throw ParseError(0, "recipe needs a non-empty \"detectors\" array");
  }
  std::set<std::string> ids;
  for (const json& d : *dets) {
    if (!d.is_object()) throw ParseError(0, "detector entry must be an object");
    SyntheticDetectorSpec spec{get_or<std::string>(d, "detector_id", ""),
                               parse_profile(d, r.seed)};
    if (spec.detector_id.empty()) throw InvalidConfig("detector_id must be non-empty");
    if (!ids.insert(spec.detector_id).second) {
      throw InvalidConfig("duplicate detector_id " + spec.detector_id);
    }
    r.detectors.push_back(std::move(spec));
  }

  if (auto it = doc.find("labeler"); it != doc.end() && !it->is_null()) {
    LabelerRecipe lab;
    lab.spec.detector_id = get_or<std::string>(*it, "detector_id", "labeler");
    if (ids.count(lab.spec.detector_id)) {
      throw InvalidConfig("labeler id collides with detector " + lab.spec.detector_id);
    }
    lab.fraction = get_or(*it, "fraction", lab.fraction);
    if (!(lab.fraction > 0.0 && lab.fraction <= 1.0)) {
      throw InvalidConfig("labeler fraction must lie in (0, 1]");
    }
    lab.spec.specialized = parse_profile(it->value("specialized", json::object()), r.seed);
    lab.spec.general = parse_profile(it->value("general", json::object()), r.seed);
    r.labeler = std::move(lab);
  }

  if (auto it = doc.find("merge"); it != doc.end()) {
    r.merge.iou_thresh = get_or(*it, "iou_thresh", r.merge.iou_thresh);
    r.merge.beta = get_or(*it, "beta", r.merge.beta);
    r.merge.n_ref = get_or(*it, "n_ref", r.merge.n_ref);
    r.merge.policy = parse_merge_policy(get_or<std::string>(*it, "policy", "reweight"));
  }
  r.merge.validate();
  if (auto it = doc.find("fuse"); it != doc.end()) {
    r.fuse.iou_thresh = get_or(*it, "iou_thresh", r.fuse.iou_thresh);
    r.fuse.unmatched_downweight = get_or(*it, "downweight", r.fuse.unmatched_downweight);
  }
  r.fuse.validate();
  r.budget_fractions = get_or(doc, "budget_fractions", r.budget_fractions);
  for (double f : r.budget_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw InvalidConfig("budget fractions must lie in (0, 1]");
  }
  return r;
}

ExperimentOutputs generate_experiment(const ExperimentRecipe& recipe) {
  ExperimentOutputs out;
  out.corpus = generate_corpus(recipe.corpus);
  for (const SyntheticDetectorSpec& spec : recipe.detectors) {
    out.detectors[spec.detector_id] =
        perturb_ground_truth(out.corpus.gt, out.corpus.meta, spec);
  }
  const auto lengths = out.corpus.meta.video_lengths();
  if (recipe.labeler) {
    out.labeler_frames = sample_label_frames(lengths, recipe.labeler->fraction);
    out.labeler = simulate_labeler(out.corpus.gt, out.corpus.meta, recipe.labeler->spec,
                                   *out.labeler_frames);
  }
  for (double f : recipe.budget_fractions) out.budgets[f] = sample_label_frames(lengths, f);
  return out;
}

ExperimentResult run_experiment(const ExperimentRecipe& recipe,
                                const ExperimentOutputs& outputs) {
  const GroundTruthSet& gt = outputs.corpus.gt;
  ExperimentResult result;
  std::vector<DetectionSet> members;
  for (const auto& [id, dets] : outputs.detectors) {
    result.map_rows.emplace_back(id, map_of(dets, gt));
    members.push_back(dets);
  }
  result.ensemble = ensemble(members, recipe.merge);
  result.map_rows.emplace_back("ensemble", map_of(result.ensemble, gt));

  if (outputs.labeler) {
    result.map_rows.emplace_back("labeler", map_of(*outputs.labeler, gt));
    result.fused = fuse(result.ensemble, *outputs.labeler, recipe.fuse);
    result.map_rows.emplace_back("fused", map_of(*result.fused, gt));

    // Frames without objects still count as labeled (and empty).
    GroundTruthSet dense = gt;
    for (const auto& [video, info] : outputs.corpus.meta.videos) {
      for (std::int64_t f = 0; f < info.frame_count; ++f) dense.frames[{video, f}];
    }
    for (const auto& [fraction, frames] : outputs.budgets) {
      const DetectionSet labeled = override_with_ground_truth(*result.fused, dense, frames);
      result.map_rows.emplace_back("fused+gt@" + budget_name(fraction), map_of(labeled, gt));
    }
  }
  return result;
}

void write_experiment(const ExperimentOutputs& outputs, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  {
    std::ostringstream gt;
    write_jsonl(gt, outputs.corpus.gt);
    write_file_atomically(dir / "gt.jsonl", gt.str());
  }
  write_file_atomically(dir / "meta.json", corpus_meta_json(outputs.corpus.meta));
  for (const auto& [id, dets] : outputs.detectors) {
    export_soft_targets(dets, dir / (id + ".jsonl"));
  }
  if (outputs.labeler) {
    export_soft_targets(*outputs.labeler, dir / (outputs.labeler->source_id + ".jsonl"));
  }
  for (const auto& [fraction, frames] : outputs.budgets) {
    write_file_atomically(dir / ("labeled_frames_" + budget_name(fraction) + ".txt"),
                          frame_list_text(frames));
  }
}

}  // namespace detfuse
