#include "detfuse/io.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <system_error>
#include <tuple>

#include "detfuse/errors.h"
#include "json.hpp"

namespace detfuse {

using nlohmann::json;

DetectionFormat parse_detection_format(const std::string& name) {
  if (name == "jsonl") return DetectionFormat::kJsonl;
  if (name == "coco-results") return DetectionFormat::kCocoResults;
  throw InvalidConfig("unknown detection format: " + name);
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf.data(), end);
}

namespace {

std::string id_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
  throw std::invalid_argument("identifier must be a string or an integer");
}

double number_field(const json& obj, const char* name, std::size_t where) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(where, std::string("missing field ") + name);
  if (!it->is_number()) throw ParseError(where, std::string(name) + " is not a number");
  return it->get<double>();
}

std::string string_field(const json& obj, const char* name, std::size_t where) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(where, std::string("missing field ") + name);
  if (!it->is_string()) throw ParseError(where, std::string(name) + " is not a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* name,
                                           std::size_t where) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ParseError(where, std::string(name) + " is not a string");
  return it->get<std::string>();
}

std::int64_t frame_field(const json& obj, const char* name, std::size_t where) {
  auto it = obj.find(name);
  if (it == obj.end()) throw ParseError(where, std::string("missing field ") + name);
  if (!it->is_number_integer()) {
    throw ParseError(where, std::string(name) + " is not an integer");
  }
  const auto value = it->get<std::int64_t>();
  if (value < 0) {
    throw InvariantViolation("line " + std::to_string(where) + ": negative frame_id");
  }
  return value;
}

json parse_json(const std::string& text, std::size_t where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where, e.what());
  }
}

void validate_at(const BBox& box, std::size_t where) {
  try {
    validate(box);
  } catch (const InvariantViolation& e) {
    throw InvariantViolation("record " + std::to_string(where) + ": " + e.what());
  }
}

using RecordKey =
    std::tuple<std::string, std::int64_t, std::string, double, double, double, double>;

RecordKey record_key(const FrameKey& key, const BBox& box) {
  return {key.video_id, key.frame_id, box.detector_id.value_or(""),
          box.x1,       box.y1,       box.x2,
          box.y2};
}

struct Record {
  FrameKey key;
  BBox box;
};

Record parse_record(const std::string& line, std::size_t where) {
  const json obj = parse_json(line, where);
  if (!obj.is_object()) throw ParseError(where, "record is not an object");
  Record r;
  r.key.video_id = string_field(obj, "video_id", where);
  r.key.frame_id = frame_field(obj, "frame_id", where);
  r.box.detector_id = optional_string(obj, "detector_id", where);
  r.box.x1 = number_field(obj, "x1", where);
  r.box.y1 = number_field(obj, "y1", where);
  r.box.x2 = number_field(obj, "x2", where);
  r.box.y2 = number_field(obj, "y2", where);
  r.box.score = obj.contains("score") ? number_field(obj, "score", where) : 1.0;
  r.box.category = string_field(obj, "category", where);
  r.box.track_id = optional_string(obj, "track_id", where);
  if (auto it = obj.find("consensus_n"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ParseError(where, "consensus_n is not an integer");
    r.box.consensus_n = it->get<int>();
  }
  validate_at(r.box, where);
  return r;
}

template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, number);
  }
  if (in.bad()) throw IoError("read failure");
}

void write_record(std::ostream& out, const FrameKey& key, const BBox& box,
                  bool with_score) {
  out << "{\"video_id\":" << json(key.video_id).dump()
      << ",\"frame_id\":" << key.frame_id;
  if (box.detector_id) out << ",\"detector_id\":" << json(*box.detector_id).dump();
  out << ",\"x1\":" << format_number(box.x1) << ",\"y1\":" << format_number(box.y1)
      << ",\"x2\":" << format_number(box.x2) << ",\"y2\":" << format_number(box.y2);
  if (with_score) out << ",\"score\":" << format_number(box.score);
  out << ",\"category\":" << json(box.category).dump();
  if (box.track_id) out << ",\"track_id\":" << json(*box.track_id).dump();
  if (box.consensus_n) out << ",\"consensus_n\":" << *box.consensus_n;
  out << "}\n";
}

bool record_less(const BBox& a, const BBox& b) {
  if (score_then_geometry_less(a, b)) return true;
  if (score_then_geometry_less(b, a)) return false;
  return std::tie(a.detector_id, a.category, a.track_id, a.consensus_n) <
         std::tie(b.detector_id, b.category, b.track_id, b.consensus_n);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::string cleaned = line.substr(0, line.find('#'));
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream ss(cleaned);
  std::vector<std::string> fields;
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

}  // namespace

ImageIndex parse_image_index(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const json doc = parse_json(buf.str(), 0);
  if (!doc.is_array()) throw ParseError(0, "image index must be a JSON array");
  ImageIndex index;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& e = doc[i];
    if (!e.is_object() || !e.contains("image_id")) {
      throw ParseError(i, "image index entry lacks image_id");
    }
    std::string id;
    try {
      id = id_text(e["image_id"]);
    } catch (const std::invalid_argument& err) {
      throw ParseError(i, err.what());
    }
    const FrameKey key{string_field(e, "video_id", i), frame_field(e, "frame_id", i)};
    if (!index.emplace(id, key).second) {
      throw DuplicateRecord("image_id " + id + " listed twice in image index");
    }
  }
  return index;
}

DetectionSet parse_detections_jsonl(std::istream& in, const std::string& source_id) {
  DetectionSet set;
  set.source_id = source_id;
  std::set<RecordKey> seen;
  for_each_line(in, [&](const std::string& line, std::size_t where) {
    Record r = parse_record(line, where);
    if (!r.box.detector_id) r.box.detector_id = source_id;
    if (!seen.insert(record_key(r.key, r.box)).second) {
      throw DuplicateRecord("line " + std::to_string(where) + ": duplicate record");
    }
    set.add(r.key, std::move(r.box));
  });
  return set;
}

DetectionSet parse_coco_results(std::istream& in, const ImageIndex& images,
                                const std::string& source_id) {
  std::stringstream buf;
  buf << in.rdbuf();
  const json doc = parse_json(buf.str(), 0);
  if (!doc.is_array()) throw ParseError(0, "coco results must be a JSON array");
  DetectionSet set;
  set.source_id = source_id;
  std::set<RecordKey> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& e = doc[i];
    if (!e.is_object()) throw ParseError(i, "result is not an object");
    std::string image, category;
    try {
      if (!e.contains("image_id")) throw std::invalid_argument("missing image_id");
      if (!e.contains("category_id")) throw std::invalid_argument("missing category_id");
      image = id_text(e["image_id"]);
      category = id_text(e["category_id"]);
    } catch (const std::invalid_argument& err) {
      throw ParseError(i, err.what());
    }
    auto bbox = e.find("bbox");
    if (bbox == e.end() || !bbox->is_array() || bbox->size() != 4 ||
        !std::all_of(bbox->begin(), bbox->end(), [](const json& v) { return v.is_number(); })) {
      throw ParseError(i, "bbox must be [x, y, w, h]");
    }
    auto key = images.find(image);
    if (key == images.end()) {
      throw InvariantViolation("result " + std::to_string(i) + ": image_id " + image +
                               " missing from image index");
    }
    BBox box;
    const double x = (*bbox)[0].get<double>();
    const double y = (*bbox)[1].get<double>();
    box.x1 = x;
    box.y1 = y;
    box.x2 = x + (*bbox)[2].get<double>();
    box.y2 = y + (*bbox)[3].get<double>();
    box.score = number_field(e, "score", i);
    box.category = category;
    box.detector_id = source_id;
    validate_at(box, i);
    if (!seen.insert(record_key(key->second, box)).second) {
      throw DuplicateRecord("result " + std::to_string(i) + ": duplicate record");
    }
    set.add(key->second, std::move(box));
  }
  return set;
}

DetectionSet parse_detections(std::istream& in, DetectionFormat format,
                              const std::string& source_id, const ImageIndex* images) {
  if (format == DetectionFormat::kJsonl) return parse_detections_jsonl(in, source_id);
  if (!images) throw InvalidConfig("coco-results input needs an image index");
  return parse_coco_results(in, *images, source_id);
}

GroundTruthSet parse_ground_truth(std::istream& in) {
  GroundTruthSet gt;
  std::set<RecordKey> seen;
  for_each_line(in, [&](const std::string& line, std::size_t where) {
    Record r = parse_record(line, where);
    if (r.box.score != 1.0) {
      throw InvariantViolation("line " + std::to_string(where) +
                               ": ground-truth score must be 1");
    }
    r.box.detector_id.reset();
    r.box.consensus_n.reset();
    if (!seen.insert(record_key(r.key, r.box)).second) {
      throw DuplicateRecord("line " + std::to_string(where) + ": duplicate record");
    }
    try {
      gt.add(r.key, std::move(r.box));
    } catch (const InvariantViolation& e) {
      throw InvariantViolation("line " + std::to_string(where) + ": " + e.what());
    }
  });
  return gt;
}

void write_jsonl(std::ostream& out, const DetectionSet& dets) {
  for (const auto& [key, frame] : dets.frames) {
    std::vector<const BBox*> boxes;
    for (const BBox& b : frame.boxes) boxes.push_back(&b);
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const BBox* a, const BBox* b) { return record_less(*a, *b); });
    for (const BBox* b : boxes) write_record(out, key, *b, true);
  }
}

void write_jsonl(std::ostream& out, const GroundTruthSet& gt) {
  for (const auto& [key, boxes] : gt.frames) {
    std::vector<const BBox*> sorted;
    for (const BBox& b : boxes) sorted.push_back(&b);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const BBox* a, const BBox* b) { return record_less(*a, *b); });
    for (const BBox* b : sorted) write_record(out, key, *b, false);
  }
}

void export_soft_targets(const DetectionSet& dets, const std::filesystem::path& path) {
  std::ostringstream out;
  write_jsonl(out, dets);
  write_file_atomically(path, out.str());
}

bool equivalent(const DetectionSet& a, const DetectionSet& b, double tol) {
  auto non_empty = [](const DetectionSet& s) {
    std::map<FrameKey, std::vector<BBox>> out;
    for (const auto& [key, frame] : s.frames) {
      if (frame.boxes.empty()) continue;
      auto boxes = frame.boxes;
      std::stable_sort(boxes.begin(), boxes.end(), record_less);
      out[key] = std::move(boxes);
    }
    return out;
  };
  const auto fa = non_empty(a);
  const auto fb = non_empty(b);
  if (fa.size() != fb.size()) return false;
  for (auto ia = fa.begin(), ib = fb.begin(); ia != fa.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.size() != ib->second.size()) return false;
    for (std::size_t i = 0; i < ia->second.size(); ++i) {
      const BBox& x = ia->second[i];
      const BBox& y = ib->second[i];
      const bool close = std::abs(x.x1 - y.x1) <= tol && std::abs(x.y1 - y.y1) <= tol &&
                         std::abs(x.x2 - y.x2) <= tol && std::abs(x.y2 - y.y2) <= tol &&
                         std::abs(x.score - y.score) <= tol;
      if (!close || x.category != y.category || x.detector_id != y.detector_id ||
          x.track_id != y.track_id || x.consensus_n != y.consensus_n) {
        return false;
      }
    }
  }
  return true;
}

CategoryMap parse_category_map(std::istream& in) {
  CategoryMap cmap;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw ParseError(number, "expected 'category superclass'");
    auto it = cmap.mapping().find(fields[0]);
    if (it != cmap.mapping().end() && it->second != fields[1]) {
      throw ParseError(number, "conflicting mapping for " + fields[0]);
    }
    cmap.set(fields[0], fields[1]);
  }
  return cmap;
}

CorpusMeta parse_corpus_meta(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  const json doc = parse_json(buf.str(), 0);
  if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_array()) {
    throw ParseError(0, "corpus metadata needs a \"videos\" array");
  }
  CorpusMeta meta;
  const json& videos = doc["videos"];
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const json& v = videos[i];
    if (!v.is_object()) throw ParseError(i, "video entry is not an object");
    const std::string id = string_field(v, "video_id", i);
    auto frames = v.find("frames");
    if (frames == v.end() || !frames->is_number_integer()) {
      throw ParseError(i, "frames must be an integer");
    }
    VideoInfo info{frames->get<std::int64_t>(), number_field(v, "width", i),
                   number_field(v, "height", i)};
    if (!meta.videos.emplace(id, info).second) {
      throw DuplicateRecord("video " + id + " listed twice");
    }
  }
  meta.validate();
  return meta;
}

std::string corpus_meta_json(const CorpusMeta& meta) {
  std::ostringstream out;
  out << "{\"videos\":[";
  bool first = true;
  for (const auto& [id, info] : meta.videos) {
    if (!first) out << ",";
    first = false;
    out << "{\"video_id\":" << json(id).dump() << ",\"frames\":" << info.frame_count
        << ",\"width\":" << format_number(info.width)
        << ",\"height\":" << format_number(info.height) << "}";
  }
  out << "]}\n";
  return out.str();
}

FrameSet parse_frame_list(std::istream& in) {
  FrameSet frames;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw ParseError(number, "expected 'video_id frame_id'");
    std::int64_t frame = 0;
    const std::string& f = fields[1];
    auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), frame);
    if (ec != std::errc() || end != f.data() + f.size() || frame < 0) {
      throw ParseError(number, "bad frame index " + f);
    }
    frames.insert({fields[0], frame});
  }
  return frames;
}

std::string frame_list_text(const FrameSet& frames) {
  std::ostringstream out;
  for (const FrameKey& key : frames) out << key.video_id << ' ' << key.frame_id << '\n';
  return out.str();
}

std::string report_json(const EvalReport& report) {
  std::ostringstream out;
  out << "{\"overall_map\":" << format_number(report.overall_map)
      << ",\"ap_per_threshold\":[";
  for (std::size_t i = 0; i < report.ap_per_threshold.size(); ++i) {
    if (i) out << ",";
    out << "{\"iou\":" << format_number(report.ap_per_threshold[i].iou_threshold)
        << ",\"ap\":" << format_number(report.ap_per_threshold[i].ap) << "}";
  }
  out << "],\"map_per_video\":{";
  bool first = true;
  for (const auto& [video, value] : report.map_per_video) {
    if (!first) out << ",";
    first = false;
    out << json(video).dump() << ":" << format_number(value);
  }
  out << "},\"counts\":{\"tp\":" << report.counts.true_positives
      << ",\"fp\":" << report.counts.false_positives
      << ",\"fn\":" << report.counts.false_negatives << "},\"num_gt\":" << report.num_gt
      << ",\"num_dets\":" << report.num_dets << "}\n";
  return out.str();
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "IoU    AP\n";
  for (const ThresholdAp& ap : report.ap_per_threshold) {
    out << std::setprecision(2) << ap.iou_threshold << "   " << std::setprecision(4)
        << ap.ap << "\n";
  }
  out << "mAP@0.5:0.95  " << report.overall_map << "\n";
  if (!report.map_per_video.empty()) {
    out << "per video:\n";
    for (const auto& [video, value] : report.map_per_video) {
      out << "  " << video << "  " << value << "\n";
    }
  }
  out << "TP " << report.counts.true_positives << "  FP " << report.counts.false_positives
      << "  FN " << report.counts.false_negatives << "  (IoU "
      << std::setprecision(2)
      << (report.ap_per_threshold.empty() ? 0.5 : report.ap_per_threshold.front().iou_threshold)
      << ")\n";
  return out.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return buf.str();
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename onto " + path.string());
  }
}

}  // namespace detfuse
