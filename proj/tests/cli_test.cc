#include "detfuse/cli.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "detfuse/ensemble.h"
#include "detfuse/io.h"
#include "detfuse/map_eval.h"
#include "detfuse/synth.h"

namespace detfuse {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("detfuse_cli_test_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    write_file_atomically(dir_ / name, text);
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_command(args, out_, err_);
  }

  static std::string record(const std::string& detector, double x1, double score,
                            int frame = 0) {
    std::ostringstream s;
    s << R"({"video_id":"v","frame_id":)" << frame << R"(,"detector_id":")" << detector
      << R"(","x1":)" << x1 << R"(,"y1":0,"x2":)" << x1 + 10 << R"(,"y2":10,"score":)"
      << score << R"(,"category":"car"})" << "\n";
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, MergeHappyPath) {
  write("a.jsonl", record("a", 0, 0.9) + record("a", 100, 0.5));
  write("b.jsonl", record("b", 0, 0.6));
  write("c.jsonl", record("c", 0, 0.9));
  ASSERT_EQ(run({"merge", path("a.jsonl"), path("b.jsonl"), path("c.jsonl"), "--beta", "3",
                 "-o", path("out.jsonl")}),
            kExitOk)
      << err_.str();
  std::istringstream in(read_file(path("out.jsonl")));
  const DetectionSet out = parse_detections_jsonl(in, "ensemble");
  ASSERT_EQ(out.box_count(), 2u);
  const auto& boxes = out.frames.at({"v", 0}).boxes;
  EXPECT_NEAR(boxes[0].score, std::cbrt(0.8), 1e-12);
  EXPECT_EQ(boxes[0].consensus_n, 3);
  EXPECT_NEAR(boxes[1].score, 0.125, 1e-12);
}

TEST_F(CliTest, MergeSingleDetectorDropSingletonsIsEmpty) {
  write("a.jsonl", record("a", 0, 0.9) + record("a", 100, 0.5));
  ASSERT_EQ(run({"merge", path("a.jsonl"), "--policy", "drop-singletons", "-o",
                 path("out.jsonl")}),
            kExitOk);
  EXPECT_EQ(read_file(path("out.jsonl")), "");
}

TEST_F(CliTest, EvalSelfEvaluation) {
  const std::string gt =
      R"({"video_id":"v","frame_id":0,"x1":0,"y1":0,"x2":10,"y2":10,"category":"car"})"
      "\n"
      R"({"video_id":"v","frame_id":1,"x1":5,"y1":5,"x2":20,"y2":30,"category":"car"})"
      "\n";
  write("gt.jsonl", gt);
  ASSERT_EQ(run({"eval", "--gt", path("gt.jsonl"), "--dets", path("gt.jsonl"), "--report",
                 path("report.json")}),
            kExitOk)
      << err_.str();
  EXPECT_NE(out_.str().find("mAP@0.5:0.95  1.0000"), std::string::npos);
  EXPECT_NE(read_file(path("report.json")).find("\"overall_map\":1,"), std::string::npos);
}

TEST_F(CliTest, EvalCocoResultsWithCategoryMap) {
  write("gt.jsonl",
        R"({"video_id":"v","frame_id":0,"x1":0,"y1":0,"x2":10,"y2":10,"category":"truck"})"
        "\n");
  write("results.json", R"([{"image_id":1,"bbox":[0,0,10,8],"score":0.9,"category_id":"car"}])");
  write("index.json", R"([{"image_id":1,"video_id":"v","frame_id":0}])");
  write("cats.txt", "car vehicle\ntruck vehicle\n");
  ASSERT_EQ(run({"eval", "--gt", path("gt.jsonl"), "--dets", path("results.json"), "--format",
                 "coco-results", "--image-index", path("index.json"), "--category-map",
                 path("cats.txt"), "--report", path("r.json")}),
            kExitOk)
      << err_.str();
  EXPECT_NE(read_file(path("r.json")).find("\"overall_map\":0.7,"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  write("bad_score.jsonl", record("a", 0, 1.5));
  EXPECT_EQ(run({"merge", path("bad_score.jsonl"), "-o", path("o.jsonl")}), kExitValidation);
  EXPECT_FALSE(fs::exists(path("o.jsonl")));
  EXPECT_NE(err_.str().find("score"), std::string::npos);

  write("broken.jsonl", "{oops\n");
  EXPECT_EQ(run({"merge", path("broken.jsonl"), "-o", path("o.jsonl")}), kExitIo);
  EXPECT_EQ(run({"merge", path("missing.jsonl"), "-o", path("o.jsonl")}), kExitIo);
  EXPECT_FALSE(fs::exists(path("o.jsonl")));

  write("a.jsonl", record("a", 0, 0.5));
  EXPECT_EQ(run({"merge", path("a.jsonl"), "-o", path("o.jsonl"), "--beta", "0.5"}),
            kExitValidation);
  EXPECT_EQ(run({"merge", path("a.jsonl"), "-o", path("o.jsonl"), "--policy", "vote"}),
            kExitValidation);
  EXPECT_EQ(run({"merge", path("a.jsonl")}), kExitValidation);
  EXPECT_EQ(run({"frobnicate"}), kExitValidation);
  EXPECT_EQ(run({}), kExitValidation);
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("merge"), std::string::npos);
}

TEST_F(CliTest, FuseWithGroundTruthOverride) {
  write("student.jsonl", record("s", 0, 0.8) + record("s", 0, 0.8, 1));
  write("labeler.jsonl", record("l", 2, 0.6) + record("l", 200, 0.9, 1));
  write("gt.jsonl",
        R"({"video_id":"v","frame_id":1,"x1":40,"y1":0,"x2":50,"y2":10,"category":"car"})"
        "\n");
  write("labeled.txt", "v 1\nv 2\n");
  write("meta.json", R"({"videos":[{"video_id":"v","frames":3,"width":640,"height":480}]})");

  ASSERT_EQ(run({"fuse", path("student.jsonl"), path("labeler.jsonl"), "-o", path("f.jsonl")}),
            kExitOk)
      << err_.str();
  {
    std::istringstream in(read_file(path("f.jsonl")));
    const DetectionSet fused = parse_detections_jsonl(in, "fused");
    ASSERT_EQ(fused.frames.at({"v", 0}).boxes.size(), 1u);
    EXPECT_NEAR(fused.frames.at({"v", 0}).boxes[0].score, 0.7, 1e-12);
    EXPECT_EQ(fused.frames.at({"v", 1}).boxes.size(), 2u);
  }

  // Frame 2 has no ground-truth boxes: an error without metadata...
  EXPECT_EQ(run({"fuse", path("student.jsonl"), path("labeler.jsonl"), "-o", path("g.jsonl"),
                 "--override-gt", path("gt.jsonl"), "--labeled-frames", path("labeled.txt")}),
            kExitValidation);
  // ...and an empty labeled frame with it.
  ASSERT_EQ(run({"fuse", path("student.jsonl"), path("labeler.jsonl"), "-o", path("g.jsonl"),
                 "--override-gt", path("gt.jsonl"), "--labeled-frames", path("labeled.txt"),
                 "--meta", path("meta.json")}),
            kExitOk)
      << err_.str();
  std::istringstream in(read_file(path("g.jsonl")));
  const DetectionSet out = parse_detections_jsonl(in, "fused");
  ASSERT_EQ(out.frames.at({"v", 1}).boxes.size(), 1u);
  EXPECT_EQ(out.frames.at({"v", 1}).boxes[0].score, 1.0);
  EXPECT_EQ(out.frames.count({"v", 2}), 0u);
  EXPECT_EQ(out.frames.at({"v", 0}).boxes.size(), 1u);

  EXPECT_EQ(run({"fuse", path("student.jsonl"), "-o", path("h.jsonl")}), kExitValidation);
  EXPECT_EQ(run({"fuse", path("student.jsonl"), path("labeler.jsonl"), "-o", path("h.jsonl"),
                 "--override-gt", path("gt.jsonl")}),
            kExitValidation);
}

TEST_F(CliTest, SampleFramesAndStats) {
  write("meta.json", R"({"videos":[{"video_id":"v","frames":100,"width":640,"height":480}]})");
  ASSERT_EQ(run({"sample-frames", "--meta", path("meta.json"), "--budget-fraction", "0.05"}),
            kExitOk);
  EXPECT_EQ(out_.str(), "v 0\nv 20\nv 40\nv 60\nv 80\n");
  EXPECT_EQ(run({"sample-frames", "--meta", path("meta.json"), "--budget-fraction", "0"}),
            kExitValidation);

  std::string gt;
  const int durations[] = {3, 5, 7};
  for (int t = 0; t < 3; ++t) {
    for (int f = 0; f < durations[t]; ++f) {
      gt += R"({"video_id":"v","frame_id":)" + std::to_string(f) + R"(,"x1":)" +
            std::to_string(t * 20) + R"(,"y1":0,"x2":)" + std::to_string(t * 20 + 10) +
            R"(,"y2":10,"category":"car","track_id":"t)" + std::to_string(t) + "\"}\n";
    }
  }
  write("gt.jsonl", gt);
  ASSERT_EQ(run({"stats", "--gt", path("gt.jsonl"), "--json", path("stats.json")}), kExitOk);
  EXPECT_NE(out_.str().find("median object duration  5 frames"), std::string::npos);
  EXPECT_NE(read_file(path("stats.json")).find("\"median_object_duration\":5"),
            std::string::npos);
}

TEST_F(CliTest, MapCategories) {
  write("d.jsonl", record("a", 0, 0.9) + record("a", 50, 0.4));
  write("cats.txt", "car vehicle\n");
  ASSERT_EQ(run({"map-categories", path("d.jsonl"), "--category-map", path("cats.txt"), "-o",
                 path("m.jsonl")}),
            kExitOk);
  const std::string text = read_file(path("m.jsonl"));
  EXPECT_EQ(text.find("\"car\""), std::string::npos);
  EXPECT_NE(text.find("\"vehicle\""), std::string::npos);

  write("other.txt", "truck vehicle\n");
  EXPECT_EQ(run({"map-categories", path("d.jsonl"), "--category-map", path("other.txt"), "-o",
                 path("n.jsonl")}),
            kExitValidation);
  EXPECT_FALSE(fs::exists(path("n.jsonl")));
}

constexpr char kRecipe[] = R"({
  "seed": 11,
  "corpus": {"video_ids": ["v0", "v1"], "frames_per_video": 40},
  "detectors": [
    {"detector_id": "a", "coord_jitter_sigma": 2, "miss_rate": 0.2, "fp_rate": 1},
    {"detector_id": "b", "coord_jitter_sigma": 2, "miss_rate": 0.2, "fp_rate": 1},
    {"detector_id": "c", "coord_jitter_sigma": 2, "miss_rate": 0.2, "fp_rate": 1}
  ],
  "labeler": {"fraction": 0.2,
              "specialized": {"coord_jitter_sigma": 1, "miss_rate": 0.05},
              "general": {"coord_jitter_sigma": 6, "miss_rate": 0.5, "fp_rate": 2}},
  "merge": {"beta": 3},
  "budget_fractions": [0.05, 0.1]
})";

TEST_F(CliTest, SynthRunIsByteDeterministic) {
  write("recipe.json", kRecipe);
  ASSERT_EQ(run({"synth", path("recipe.json"), "--out-dir", path("one"), "--run"}), kExitOk)
      << err_.str();
  ASSERT_EQ(run({"synth", path("recipe.json"), "--out-dir", path("two"), "--run"}), kExitOk);
  for (const char* name : {"gt.jsonl", "meta.json", "a.jsonl", "b.jsonl", "c.jsonl",
                           "labeler.jsonl", "ensemble.jsonl", "fused.jsonl",
                           "experiment.json", "labeled_frames_0.05.txt"}) {
    ASSERT_TRUE(fs::exists(dir_ / "one" / name)) << name;
    EXPECT_EQ(read_file(dir_ / "one" / name), read_file(dir_ / "two" / name)) << name;
  }
  EXPECT_NE(out_.str().find("ensemble"), std::string::npos);
  EXPECT_NE(out_.str().find("fused+gt@0.1"), std::string::npos);

  write("bad.json", R"({"detectors": []})");
  EXPECT_EQ(run({"synth", path("bad.json"), "--out-dir", path("three")}), kExitIo);
  write("bad_profile.json", R"({"detectors": [{"detector_id": "a", "miss_rate": 2}]})");
  EXPECT_EQ(run({"synth", path("bad_profile.json"), "--out-dir", path("three")}),
            kExitValidation);
}

TEST_F(CliTest, MergeThenEvalMatchesInMemoryPipeline) {
  write("recipe.json", kRecipe);
  ASSERT_EQ(run({"synth", path("recipe.json"), "--out-dir", path("s")}), kExitOk);
  ASSERT_EQ(run({"merge", path("s/a.jsonl"), path("s/b.jsonl"), path("s/c.jsonl"), "-o",
                 path("ens.jsonl")}),
            kExitOk);
  ASSERT_EQ(run({"eval", "--gt", path("s/gt.jsonl"), "--dets", path("ens.jsonl"), "--report",
                 path("r.json")}),
            kExitOk);

  auto load = [&](const std::string& name) {
    std::istringstream in(read_file(path(name)));
    return parse_detections_jsonl(in, fs::path(name).stem().string());
  };
  std::istringstream gt_in(read_file(path("s/gt.jsonl")));
  const GroundTruthSet gt = parse_ground_truth(gt_in);
  const DetectionSet merged =
      ensemble({load("s/a.jsonl"), load("s/b.jsonl"), load("s/c.jsonl")}, MergeConfig{});
  const EvalReport report = coco_map(merged, gt);
  EXPECT_EQ(read_file(path("r.json")), report_json(report));
}

}  // namespace
}  // namespace detfuse
