#include "detfuse/cli.h"

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "detfuse/ensemble.h"
#include "detfuse/errors.h"
#include "detfuse/experiment.h"
#include "detfuse/fusion.h"
#include "detfuse/io.h"
#include "detfuse/map_eval.h"
#include "detfuse/synth.h"

namespace detfuse {
namespace {

namespace fs = std::filesystem;

struct InputOptions {
  std::string format = "jsonl";
  std::string image_index;
  std::string category_map;
};

std::istringstream open_text(const std::string& path) {
  return std::istringstream(read_file(path));
}

std::optional<CategoryMap> load_category_map(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto in = open_text(path);
  return parse_category_map(in);
}

DetectionSet load_detections(const std::string& path, const InputOptions& opts,
                             const std::optional<CategoryMap>& cmap) {
  const DetectionFormat format = parse_detection_format(opts.format);
  std::optional<ImageIndex> images;
  if (format == DetectionFormat::kCocoResults) {
    if (opts.image_index.empty()) throw InvalidConfig("coco-results input needs --image-index");
    auto in = open_text(opts.image_index);
    images = parse_image_index(in);
  }
  auto in = open_text(path);
  DetectionSet dets = parse_detections(in, format, fs::path(path).stem().string(),
                                       images ? &*images : nullptr);
  return cmap ? map_to_superclass(dets, *cmap) : dets;
}

GroundTruthSet load_ground_truth(const std::string& path,
                                 const std::optional<CategoryMap>& cmap) {
  auto in = open_text(path);
  GroundTruthSet gt = parse_ground_truth(in);
  return cmap ? map_to_superclass(gt, *cmap) : gt;
}

void add_input_options(CLI::App* cmd, InputOptions& opts) {
  cmd->add_option("--format", opts.format, "Input format: jsonl or coco-results")
      ->capture_default_str();
  cmd->add_option("--image-index", opts.image_index,
                  "image_id -> (video_id, frame_id) map for coco-results input");
  cmd->add_option("--category-map", opts.category_map,
                  "Two-column category -> superclass map applied to every input");
}

struct MergeArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string policy = "reweight";
  std::string output_id = "ensemble";
  MergeConfig cfg;
  InputOptions in;
};

int run_merge(MergeArgs& a, std::ostream& out) {
  a.cfg.policy = parse_merge_policy(a.policy);
  a.cfg.validate();
  const auto cmap = load_category_map(a.in.category_map);
  std::vector<DetectionSet> sets;
  for (const std::string& path : a.inputs) sets.push_back(load_detections(path, a.in, cmap));
  const DetectionSet merged = ensemble(sets, a.cfg, a.output_id);
  export_soft_targets(merged, a.output);
  out << "merged " << a.inputs.size() << " input(s) into " << merged.box_count()
      << " boxes -> " << a.output << "\n";
  return kExitOk;
}

struct FuseArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string output_id = "fused";
  std::string override_gt;
  std::string labeled_frames;
  std::string meta;
  FuseConfig cfg;
  InputOptions in;
};

int run_fuse(FuseArgs& a, std::ostream& out) {
  a.cfg.validate();
  if (a.override_gt.empty() != a.labeled_frames.empty()) {
    throw InvalidConfig("--override-gt and --labeled-frames must be given together");
  }
  const auto cmap = load_category_map(a.in.category_map);
  const DetectionSet first = load_detections(a.inputs[0], a.in, cmap);
  const DetectionSet second = load_detections(a.inputs[1], a.in, cmap);
  DetectionSet fused = fuse(first, second, a.cfg, a.output_id);
  if (!a.override_gt.empty()) {
    GroundTruthSet gt = load_ground_truth(a.override_gt, cmap);
    if (!a.meta.empty()) {
      auto in = open_text(a.meta);
      const CorpusMeta meta = parse_corpus_meta(in);
      for (const auto& [video, info] : meta.videos) {
        for (std::int64_t f = 0; f < info.frame_count; ++f) gt.frames[{video, f}];
      }
    }
    auto in = open_text(a.labeled_frames);
    fused = override_with_ground_truth(fused, gt, parse_frame_list(in));
  }
  export_soft_targets(fused, a.output);
  out << "fused into " << fused.box_count() << " boxes -> " << a.output << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string gt;
  std::string dets;
  std::string report;
  EvalConfig cfg;
  InputOptions in;
};

int run_eval(EvalArgs& a, std::ostream& out) {
  const auto cmap = load_category_map(a.in.category_map);
  const GroundTruthSet gt = load_ground_truth(a.gt, cmap);
  const DetectionSet dets = load_detections(a.dets, a.in, cmap);
  const EvalReport report = coco_map(dets, gt, a.cfg);
  out << report_table(report);
  if (!a.report.empty()) write_file_atomically(a.report, report_json(report));
  return kExitOk;
}

struct SynthArgs {
  std::string recipe;
  std::string out_dir;
  bool run = false;
};

int run_synth(SynthArgs& a, std::ostream& out) {
  const ExperimentRecipe recipe = parse_recipe(read_file(a.recipe));
  const ExperimentOutputs outputs = generate_experiment(recipe);
  write_experiment(outputs, a.out_dir);
  out << "wrote " << outputs.detectors.size() << " detector file(s), "
      << outputs.corpus.gt.box_count() << " ground-truth boxes to " << a.out_dir << "\n";
  if (!a.run) return kExitOk;

  const ExperimentResult result = run_experiment(recipe, outputs);
  const fs::path dir(a.out_dir);
  export_soft_targets(result.ensemble, dir / "ensemble.jsonl");
  if (result.fused) export_soft_targets(*result.fused, dir / "fused.jsonl");
  std::ostringstream json;
  json << "{";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < result.map_rows.size(); ++i) {
    const auto& [name, value] = result.map_rows[i];
    out << std::left << std::setw(20) << name << value << "\n";
    json << (i ? "," : "") << "\"" << name << "\":" << format_number(value);
  }
  json << "}\n";
  write_file_atomically(dir / "experiment.json", json.str());
  return kExitOk;
}

struct SampleArgs {
  std::string meta;
  std::string output;
  double fraction = 0.0;
};

int run_sample(SampleArgs& a, std::ostream& out) {
  auto in = open_text(a.meta);
  const FrameSet frames = sample_label_frames(parse_corpus_meta(in).video_lengths(), a.fraction);
  const std::string text = frame_list_text(frames);
  if (a.output.empty()) {
    out << text;
  } else {
    write_file_atomically(a.output, text);
  }
  return kExitOk;
}

struct StatsArgs {
  std::string gt;
  std::string json;
};

int run_stats(StatsArgs& a, std::ostream& out) {
  const GroundTruthSet gt = load_ground_truth(a.gt, std::nullopt);
  std::set<std::string> videos;
  std::size_t non_empty = 0;
  for (const auto& [key, boxes] : gt.frames) {
    videos.insert(key.video_id);
    if (!boxes.empty()) ++non_empty;
  }
  std::optional<double> median;
  try {
    median = median_object_duration(gt);
  } catch (const NoTracks&) {
  }
  out << "videos                  " << videos.size() << "\n"
      << "frames with boxes       " << non_empty << "\n"
      << "boxes                   " << gt.box_count() << "\n"
      << "median object duration  "
      << (median ? format_number(*median) + " frames" : std::string("n/a (no track ids)"))
      << "\n";
  if (!a.json.empty()) {
    std::ostringstream js;
    js << "{\"videos\":" << videos.size() << ",\"frames_with_boxes\":" << non_empty
       << ",\"boxes\":" << gt.box_count() << ",\"median_object_duration\":"
       << (median ? format_number(*median) : std::string("null")) << "}\n";
    write_file_atomically(a.json, js.str());
  }
  return kExitOk;
}

struct MapArgs {
  std::string input;
  std::string output;
  bool ground_truth = false;
  InputOptions in;
};

int run_map_categories(MapArgs& a, std::ostream& out) {
  if (a.in.category_map.empty()) throw InvalidConfig("--category-map is required");
  const auto cmap = load_category_map(a.in.category_map);
  std::ostringstream text;
  if (a.ground_truth) {
    const GroundTruthSet gt = load_ground_truth(a.input, cmap);
    write_jsonl(text, gt);
    out << "mapped " << gt.box_count() << " ground-truth boxes -> " << a.output << "\n";
  } else {
    const DetectionSet dets = load_detections(a.input, a.in, cmap);
    write_jsonl(text, dets);
    out << "mapped " << dets.box_count() << " boxes -> " << a.output << "\n";
  }
  write_file_atomically(a.output, text.str());
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-detector box merging, two-source fusion and COCO mAP evaluation"};
  app.name("detfuse");
  app.require_subcommand(1);

  MergeArgs merge;
  auto* merge_cmd = app.add_subcommand("merge", "Ensemble k detection files into one");
  merge_cmd->add_option("inputs", merge.inputs, "Detection files")->required();
  merge_cmd->add_option("-o,--output", merge.output, "Output jsonl")->required();
  merge_cmd->add_option("--iou-thresh", merge.cfg.iou_thresh)->capture_default_str();
  merge_cmd->add_option("--beta", merge.cfg.beta)->capture_default_str();
  merge_cmd->add_option("--n-ref", merge.cfg.n_ref, "Consensus count left unchanged")
      ->capture_default_str();
  merge_cmd->add_option("--policy", merge.policy, "reweight, keep-all or drop-singletons")
      ->capture_default_str();
  merge_cmd->add_option("--output-id", merge.output_id)->capture_default_str();
  add_input_options(merge_cmd, merge.in);

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse two detection sources");
  fuse_cmd->add_option("inputs", fuse_args.inputs, "Two detection files")
      ->required()
      ->expected(2);
  fuse_cmd->add_option("-o,--output", fuse_args.output, "Output jsonl")->required();
  fuse_cmd->add_option("--iou-thresh", fuse_args.cfg.iou_thresh)->capture_default_str();
  fuse_cmd->add_option("--downweight", fuse_args.cfg.unmatched_downweight)
      ->capture_default_str();
  fuse_cmd->add_option("--override-gt", fuse_args.override_gt,
                       "Ground truth that replaces the labeled frames");
  fuse_cmd->add_option("--labeled-frames", fuse_args.labeled_frames,
                       "'video_id frame_id' list of labeled frames");
  fuse_cmd->add_option("--meta", fuse_args.meta,
                       "Corpus metadata; labeled frames without boxes count as empty");
  fuse_cmd->add_option("--output-id", fuse_args.output_id)->capture_default_str();
  add_input_options(fuse_cmd, fuse_args.in);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "COCO mAP@0.5:0.95 against ground truth");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth jsonl")->required();
  eval_cmd->add_option("--dets", eval.dets, "Detections")->required();
  eval_cmd->add_option("--report", eval.report, "Write the report as JSON");
  eval_cmd->add_option("--recall-points", eval.cfg.recall_points)->capture_default_str();
  eval_cmd->add_option("--max-dets", eval.cfg.max_dets_per_frame)->capture_default_str();
  add_input_options(eval_cmd, eval.in);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic experiment from a recipe");
  synth_cmd->add_option("recipe", synth.recipe, "Recipe JSON")->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_flag("--run", synth.run, "Also merge, fuse and evaluate");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample-frames", "Uniformly spaced labeled frames");
  sample_cmd->add_option("--meta", sample.meta, "Corpus metadata JSON")->required();
  sample_cmd->add_option("--budget-fraction", sample.fraction)->required();
  sample_cmd->add_option("-o,--output", sample.output, "Output file (stdout if omitted)");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus counts and median object duration");
  stats_cmd->add_option("--gt", stats.gt, "Ground-truth jsonl")->required();
  stats_cmd->add_option("--json", stats.json, "Write the statistics as JSON");

  MapArgs map_args;
  auto* map_cmd = app.add_subcommand("map-categories", "Collapse categories into superclasses");
  map_cmd->add_option("input", map_args.input, "Detection or ground-truth jsonl")->required();
  map_cmd->add_option("-o,--output", map_args.output, "Output jsonl")->required();
  map_cmd->add_flag("--gt", map_args.ground_truth, "Input is ground truth");
  add_input_options(map_cmd, map_args.in);

  std::vector<std::string> argv_store{"detfuse"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (merge_cmd->parsed()) return run_merge(merge, out);
    if (fuse_cmd->parsed()) return run_fuse(fuse_args, out);
    if (eval_cmd->parsed()) return run_eval(eval, out);
    if (synth_cmd->parsed()) return run_synth(synth, out);
    if (sample_cmd->parsed()) return run_sample(sample, out);
    if (stats_cmd->parsed()) return run_stats(stats, out);
    if (map_cmd->parsed()) return run_map_categories(map_args, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace detfuse
