#include "detfuse/bbox.h"

#include <gtest/gtest.h>

#include <random>

#include "detfuse/errors.h"
#include "oracles.h"

namespace detfuse {
namespace {

BBox box(double x1, double y1, double x2, double y2, double score = 1.0,
         std::string category = "car") {
  BBox b;
  b.x1 = x1;
  b.y1 = y1;
  b.x2 = x2;
  b.y2 = y2;
  b.score = score;
  b.category = std::move(category);
  return b;
}

TEST(IouTest, IdenticalBoxesHaveIouOne) {
  EXPECT_DOUBLE_EQ(iou(box(0, 0, 10, 10), box(0, 0, 10, 10)), 1.0);
}

TEST(IouTest, DisjointBoxesHaveIouZero) {
  EXPECT_EQ(iou(box(0, 0, 10, 10), box(20, 20, 30, 30)), 0.0);
}

TEST(IouTest, TouchingEdgesDoNotOverlap) {
  EXPECT_EQ(iou(box(0, 0, 10, 10), box(10, 0, 20, 10)), 0.0);
}

TEST(IouTest, HalfShiftedBoxIsOneThird) {
  // intersection 50, union 150
  EXPECT_DOUBLE_EQ(iou(box(0, 0, 10, 10), box(5, 0, 15, 10)), 1.0 / 3.0);
}

TEST(IouTest, RandomPropertiesHold) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const BBox a = testing::random_box(rng, 60.0, 1.0, 50.0);
    const BBox b = testing::random_box(rng, 60.0, 1.0, 50.0);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    EXPECT_GE(ab, 0.0);
    const double bound = std::min(a.area(), b.area()) / std::max(a.area(), b.area());
    EXPECT_LE(ab, bound + 1e-12);
    EXPECT_NEAR(ab, testing::reference_iou(a, b), 1e-12);
  }
}

TEST(ValidateTest, RejectsDegenerateAndOutOfRange) {
  EXPECT_NO_THROW(validate(box(0, 0, 1, 1, 0.0)));
  EXPECT_NO_THROW(validate(box(0, 0, 1, 1, 1.0)));
  EXPECT_THROW(validate(box(0, 0, 0, 1)), InvariantViolation);
  EXPECT_THROW(validate(box(0, 2, 1, 1)), InvariantViolation);
  EXPECT_THROW(validate(box(0, 0, 1, 1, 1.5)), InvariantViolation);
  EXPECT_THROW(validate(box(0, 0, 1, 1, -0.1)), InvariantViolation);
  EXPECT_THROW(validate(box(0, 0, std::nan(""), 1)), InvariantViolation);
}

TEST(GroundTruthSetTest, ForcesScoreAndRejectsRepeatedTracks) {
  GroundTruthSet gt;
  BBox b = box(0, 0, 5, 5, 0.3);
  b.track_id = "t1";
  gt.add({"v", 0}, b);
  EXPECT_EQ(gt.frames.at({"v", 0}).front().score, 1.0);
  EXPECT_THROW(gt.add({"v", 0}, b), InvariantViolation);
  EXPECT_NO_THROW(gt.add({"v", 1}, b));
}

TEST(MapToSuperclassTest, CollapsesVehicleCategories) {
  CategoryMap cmap(std::map<std::string, std::string>{{"car", "vehicle"}, {"truck", "vehicle"}});
  DetectionSet dets;
  dets.add({"v", 0}, box(0, 0, 10, 10, 0.9, "car"));
  dets.add({"v", 0}, box(5, 5, 20, 20, 0.4, "truck"));
  const DetectionSet mapped = map_to_superclass(dets, cmap);
  ASSERT_EQ(mapped.box_count(), 2u);
  for (const BBox& b : mapped.frames.at({"v", 0}).boxes) EXPECT_EQ(b.category, "vehicle");
  EXPECT_EQ(mapped.frames.at({"v", 0}).boxes[0].x2, 10.0);
  EXPECT_EQ(mapped.frames.at({"v", 0}).boxes[0].score, 0.9);
}

TEST(MapToSuperclassTest, IdentityMapLeavesSetUnchanged) {
  CategoryMap cmap(std::map<std::string, std::string>{{"vehicle", "vehicle"}});
  DetectionSet dets;
  dets.add({"v", 3}, box(0, 0, 10, 10, 0.9, "vehicle"));
  const DetectionSet mapped = map_to_superclass(dets, cmap);
  EXPECT_EQ(mapped.frames.at({"v", 3}).boxes, dets.frames.at({"v", 3}).boxes);
}

TEST(MapToSuperclassTest, DropSentinelEmptiesFrame) {
  CategoryMap cmap(std::map<std::string, std::string>{{"person", CategoryMap::kDropCategory}});
  DetectionSet dets;
  dets.add({"v", 0}, box(0, 0, 10, 10, 0.9, "person"));
  const DetectionSet mapped = map_to_superclass(dets, cmap);
  ASSERT_EQ(mapped.frames.count({"v", 0}), 1u);
  EXPECT_TRUE(mapped.frames.at({"v", 0}).boxes.empty());
}

TEST(MapToSuperclassTest, UnmappedCategoryIsAnError) {
  CategoryMap cmap(std::map<std::string, std::string>{{"car", "vehicle"}});
  DetectionSet dets;
  dets.add({"v", 0}, box(0, 0, 10, 10, 0.9, "bicycle"));
  try {
    map_to_superclass(dets, cmap);
    FAIL() << "expected UnmappedCategory";
  } catch (const UnmappedCategory& e) {
    EXPECT_EQ(e.category(), "bicycle");
  }
}

TEST(MapToSuperclassTest, PreservesCountWithoutDrops) {
  std::mt19937_64 rng(3);
  CategoryMap cmap(std::map<std::string, std::string>{{"car", "vehicle"}, {"bus", "vehicle"}, {"van", "vehicle"}});
  const char* cats[] = {"car", "bus", "van"};
  DetectionSet dets;
  for (int i = 0; i < 200; ++i) {
    BBox b = testing::random_box(rng);
    b.category = cats[i % 3];
    dets.add({"v", i % 7}, b);
  }
  EXPECT_EQ(map_to_superclass(dets, cmap).box_count(), dets.box_count());
}

}  // namespace
}  // namespace detfuse
