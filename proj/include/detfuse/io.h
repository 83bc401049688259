#ifndef DETFUSE_IO_H_
#define DETFUSE_IO_H_

// File formats.
//
// jsonl detections (canonical, one box per line, fields in this order):
//   {"video_id":"v","frame_id":0,"detector_id":"d","x1":0,"y1":0,"x2":10,
//    "y2":10,"score":0.9,"category":"car","track_id":"t","consensus_n":3}
// track_id and consensus_n are optional. On input detector_id is optional and
// defaults to the set's source id; ground-truth files omit it and carry no
// score (or score 1). Numbers are written in shortest round-trip form and
// records are ordered by video_id, frame_id, descending score, geometry.
//
// coco-results (import only): a JSON array of
//   {"image_id":..,"bbox":[x,y,w,h],"score":..,"category_id":..}
// plus an image index, a JSON array of {"image_id":..,"video_id":..,"frame_id":..}.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "detfuse/bbox.h"
#include "detfuse/map_eval.h"

namespace detfuse {

enum class DetectionFormat { kJsonl, kCocoResults };

// Throws InvalidConfig for anything but "jsonl" / "coco-results".
DetectionFormat parse_detection_format(const std::string& name);

// image_id (rendered as text) -> frame.
using ImageIndex = std::map<std::string, FrameKey>;

ImageIndex parse_image_index(std::istream& in);

// Throws ParseError, InvariantViolation or DuplicateRecord.
DetectionSet parse_detections_jsonl(std::istream& in, const std::string& source_id);
DetectionSet parse_coco_results(std::istream& in, const ImageIndex& images,
                                const std::string& source_id);
DetectionSet parse_detections(std::istream& in, DetectionFormat format,
                              const std::string& source_id,
                              const ImageIndex* images = nullptr);
GroundTruthSet parse_ground_truth(std::istream& in);

void write_jsonl(std::ostream& out, const DetectionSet& dets);
void write_jsonl(std::ostream& out, const GroundTruthSet& gt);

// Writes dets as jsonl to path via a temporary file and rename. The scores
// and consensus counts are the soft targets for a downstream student model.
void export_soft_targets(const DetectionSet& dets, const std::filesystem::path& path);

// Same box content frame by frame (empty frames ignored), with coordinates
// and scores compared to within tol.
bool equivalent(const DetectionSet& a, const DetectionSet& b, double tol = 1e-9);

// "category superclass" per line, comma or whitespace separated; '#' starts a
// comment.
CategoryMap parse_category_map(std::istream& in);

// {"videos":[{"video_id":..,"frames":N,"width":W,"height":H}, ...]}
CorpusMeta parse_corpus_meta(std::istream& in);
std::string corpus_meta_json(const CorpusMeta& meta);

// "video_id frame_id" per line.
FrameSet parse_frame_list(std::istream& in);
std::string frame_list_text(const FrameSet& frames);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over path.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace detfuse

#endif  // DETFUSE_IO_H_
