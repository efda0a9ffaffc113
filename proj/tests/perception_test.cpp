#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "butler/perception.hpp"
#include "butler/synthetic.hpp"
#include "oracles.hpp"

namespace butler {
namespace {

constexpr double kHfov60 = std::numbers::pi / 3.0;

DetectionMask pixels(const std::string& label, int w, int h, const std::vector<std::pair<int, int>>& px) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  for (auto [u, v] : px) bits[static_cast<std::size_t>(v) * w + u] = 1;
  return DetectionMask::from_bitmap(label, w, h, std::move(bits));
}

TEST(MaskDepth, MeanOfValidPixels) {
  DepthImage depth(4, 1, 0.0);
  depth.at(0, 0) = 1.0;
  depth.at(1, 0) = 2.0;
  depth.at(2, 0) = 3.0;
  EXPECT_DOUBLE_EQ(mask_mean_depth(pixels("a", 4, 1, {{0, 0}, {1, 0}, {2, 0}}), depth), 2.0);
  depth.at(2, 0) = 0.0;
  EXPECT_DOUBLE_EQ(mask_mean_depth(pixels("a", 4, 1, {{0, 0}, {1, 0}, {2, 0}}), depth), 1.5);
  depth.at(2, 0) = NAN;
  EXPECT_DOUBLE_EQ(mask_mean_depth(pixels("a", 4, 1, {{0, 0}, {1, 0}, {2, 0}}), depth), 1.5);
  EXPECT_THROW(mask_mean_depth(pixels("a", 4, 1, {{2, 0}, {3, 0}}), depth), NoValidDepth);
  EXPECT_THROW(mask_mean_depth(pixels("a", 3, 1, {{0, 0}}), depth), InvalidArgument);
}

TEST(Bearing, PinholeExamples) {
  const CameraModel cam{640, 480, kHfov60};
  EXPECT_NEAR(pixel_bearing(cam, 320), 0.0, 1e-15);
  EXPECT_NEAR(pixel_bearing(cam, 0), std::numbers::pi / 6.0, 1e-12);
  EXPECT_NEAR(pixel_bearing(cam, 0), 0.5236, 5e-5);
  EXPECT_NEAR(pixel_bearing(cam, 480), std::atan(-160.0 / 554.256), 1e-6);
  EXPECT_NEAR(pixel_bearing(cam, 480), -0.28103, 5e-6);
  EXPECT_THROW(pixel_bearing(cam, -1), InvalidArgument);
  EXPECT_THROW(pixel_bearing(cam, 641), InvalidArgument);
}

TEST(Bearing, OddSymmetryAboutCentre) {
  for (int w : {64, 160, 640, 641}) {
    const CameraModel cam{w, 100, kDefaultHfov};
    for (double k = 0.0; k <= w / 2.0; k += 0.5)
      EXPECT_NEAR(pixel_bearing(cam, cam.cx() + k), -pixel_bearing(cam, cam.cx() - k), 1e-15);
  }
}

TEST(Project, Examples) {
  auto p = project_to_world({0, 0, 0}, 0.0, 2.0);
  EXPECT_NEAR(p.x, 2.0, 1e-15);
  EXPECT_NEAR(p.y, 0.0, 1e-15);
  p = project_to_world({1, 1, std::numbers::pi / 2}, 0.0, 1.0);
  EXPECT_NEAR(p.x, 1.0, 1e-15);
  EXPECT_NEAR(p.y, 2.0, 1e-15);
  p = project_to_world({0, 0, 0}, std::numbers::pi / 6, 2.0);
  EXPECT_NEAR(p.x, std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(p.y, 1.0, 1e-15);
  EXPECT_THROW(project_to_world({0, 0, 0}, 0.0, -0.1), InvalidArgument);
}

TEST(Project, PreservesRange) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const RobotPose2D pose(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-7, 7));
    const double d = rng.uniform(0.0, 10.0);
    const auto p = project_to_world(pose, rng.uniform(-1, 1), d);
    EXPECT_NEAR(std::hypot(p.x - pose.x, p.y - pose.y), d, 1e-12);
  }
}

TEST(Pose, ThetaIsNormalized) {
  EXPECT_DOUBLE_EQ(RobotPose2D(0, 0, std::numbers::pi).theta, std::numbers::pi);
  EXPECT_DOUBLE_EQ(RobotPose2D(0, 0, -std::numbers::pi).theta, std::numbers::pi);
  EXPECT_NEAR(RobotPose2D(0, 0, 3 * std::numbers::pi / 2).theta, -std::numbers::pi / 2, 1e-15);
}

TEST(Localize, CentredObjectAtTwoMetres) {
  PerceptionFrame f;
  f.camera = {161, 20, kDefaultHfov};
  f.depth = DepthImage(161, 20, 8.0);
  f.detections.push_back(DetectionMask::rectangle("bag", 161, 20, {75, 5, 11, 6}));
  for (int v = 5; v < 11; ++v)
    for (int u = 75; u < 86; ++u) f.depth.at(u, v) = 2.0;
  auto out = localize_objects(f);
  ASSERT_EQ(out.objects.size(), 1u);
  // Centroid column 80 is half a pixel left of cx = 80.5.
  const double bearing = std::atan(0.5 / f.camera.focal());
  EXPECT_NEAR(out.objects[0].x, 2.0 * std::cos(bearing), 1e-9);
  EXPECT_NEAR(out.objects[0].y, 2.0 * std::sin(bearing), 1e-9);

  f.camera.width = 160;
  f.depth = DepthImage(160, 20, 8.0);
  f.detections = {DetectionMask::rectangle("bag", 160, 20, {75, 5, 11, 6})};
  for (int v = 5; v < 11; ++v)
    for (int u = 75; u < 86; ++u) f.depth.at(u, v) = 2.0;
  out = localize_objects(f);
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_NEAR(out.objects[0].x, 2.0, 1e-9);
  EXPECT_NEAR(out.objects[0].y, 0.0, 1e-9);
  EXPECT_EQ(out.objects[0].label, "bag");
}

TEST(Localize, InvalidDepthIsSkippedAndCounted) {
  PerceptionFrame f;
  f.camera = {40, 10, kDefaultHfov};
  f.depth = DepthImage(40, 10, 3.0);
  f.detections.push_back(DetectionMask::rectangle("chair", 40, 10, {2, 2, 4, 4}));
  f.detections.push_back(DetectionMask::rectangle("bag", 40, 10, {20, 2, 4, 4}));
  for (int v = 2; v < 6; ++v)
    for (int u = 20; u < 24; ++u) f.depth.at(u, v) = 0.0;
  const auto out = localize_objects(f);
  ASSERT_EQ(out.objects.size(), 1u);
  EXPECT_EQ(out.objects[0].label, "chair");
  EXPECT_EQ(out.skipped_no_depth, 1u);
}

TEST(Localize, RandomScenesMatchGroundTruth) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = generate_scene(seed);
    const auto out = localize_objects(f);
    ASSERT_EQ(out.objects.size(), f.ground_truth.size());
    for (std::size_t i = 0; i < out.objects.size(); ++i) {
      EXPECT_EQ(out.objects[i].label, f.ground_truth[i].label);
      EXPECT_LT(std::hypot(out.objects[i].x - f.ground_truth[i].x, out.objects[i].y - f.ground_truth[i].y), 1e-6)
          << "seed " << seed;
    }
  }
}

TEST(Occupancy, Examples) {
  const auto chair = DetectionMask::rectangle("chair", 20, 20, {0, 0, 10, 10});
  const std::vector<DetectionMask> chairs{chair};
  EXPECT_EQ(chair_occupancy(chairs, std::vector<DetectionMask>{chair})[0].status, ChairStatus::taken);
  EXPECT_EQ(chair_occupancy(chairs, std::vector<DetectionMask>{chair})[0].overlap, 1.0);
  const auto far = DetectionMask::rectangle("person", 20, 20, {12, 12, 5, 5});
  EXPECT_EQ(chair_occupancy(chairs, std::vector<DetectionMask>{far})[0].status, ChairStatus::free);
  // 25 of the chair's 100 pixels are covered.
  const auto quarter = DetectionMask::rectangle("person", 20, 20, {5, 5, 10, 10});
  const auto occ = chair_occupancy(chairs, std::vector<DetectionMask>{quarter}, 0.2);
  EXPECT_DOUBLE_EQ(occ[0].overlap, 0.25);
  EXPECT_EQ(occ[0].status, ChairStatus::taken);
  EXPECT_EQ(chair_occupancy(chairs, std::vector<DetectionMask>{quarter}, 0.3)[0].status, ChairStatus::free);
  EXPECT_EQ(chair_occupancy(chairs, std::vector<DetectionMask>{}, 0.2)[0].status, ChairStatus::free);
  EXPECT_THROW(chair_occupancy(chairs, std::vector<DetectionMask>{}, 1.5), InvalidArgument);
}

DetectionMask random_mask(const std::string& label, int w, int h, Rng& rng, double density) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
  bits[static_cast<std::size_t>(y0) * w + x0] = 1;
  for (auto& b : bits)
    if (rng.uniform() < density) b = 1;
  return DetectionMask::from_bitmap(label, w, h, std::move(bits));
}

TEST(Occupancy, PixelCountOracleAndMonotone) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto chair = random_mask("chair", 16, 12, rng, rng.uniform(0.05, 0.6));
    std::vector<DetectionMask> persons{random_mask("person", 16, 12, rng, rng.uniform(0.0, 0.6))};
    const double thr = rng.uniform(0.0, 1.0);
    const std::vector<DetectionMask> chairs{chair};
    const auto occ = chair_occupancy(chairs, persons, thr)[0];
    const double expect = oracle::overlap_by_count(chair, persons);
    EXPECT_EQ(occ.overlap, expect);
    EXPECT_EQ(occ.status, expect >= thr ? ChairStatus::taken : ChairStatus::free);

    auto grown = persons[0];
    for (auto& b : grown.mask)
      if (rng.uniform() < 0.3) b = 1;
    grown.bbox = DetectionMask::tight_bbox(16, 12, grown.mask);
    persons.push_back(DetectionMask::rectangle("person", 16, 12, {0, 0, 1, 1}));
    const auto after = chair_occupancy(chairs, std::vector<DetectionMask>{grown, persons[1]}, thr)[0];
    if (occ.status == ChairStatus::taken) {
      EXPECT_EQ(after.status, ChairStatus::taken);
    }
    EXPECT_GE(after.overlap, occ.overlap);
  }
}

PersonKeypoints arm(char side, double wrist_v, double elbow_v, double shoulder_v, double c = 0.9) {
  PersonKeypoints kp;
  const std::string s(1, side);
  kp.points["wrist_" + s] = {10, wrist_v, c};
  kp.points["elbow_" + s] = {10, elbow_v, c};
  kp.points["shoulder_" + s] = {10, shoulder_v, c};
  return kp;
}

TEST(Waving, Examples) {
  EXPECT_TRUE(detect_waving(arm('r', 100, 200, 150), 0.3).right);
  EXPECT_TRUE(detect_waving(arm('r', 100, 200, 150), 0.3).any());
  EXPECT_FALSE(detect_waving(arm('r', 100, 200, 150), 0.3).left);
  EXPECT_FALSE(detect_waving(arm('r', 300, 200, 150), 0.3).any());
  auto no_wrist = arm('r', 100, 200, 150);
  no_wrist.points["wrist_r"].confidence = 0.0;
  EXPECT_FALSE(detect_waving(no_wrist, 0.3).any());
  // Between shoulder and elbow: above the elbow suffices.
  EXPECT_TRUE(detect_waving(arm('l', 180, 200, 150), 0.3).left);
  EXPECT_FALSE(detect_waving(PersonKeypoints{}, 0.3).any());
}

TEST(Waving, GeneratedPeople) {
  for (char side : {'l', 'r'}) {
    const auto up = detect_waving(make_person_keypoints(50, 10, 1.0, true, side));
    EXPECT_EQ(up.left, side == 'l');
    EXPECT_EQ(up.right, side == 'r');
    EXPECT_FALSE(detect_waving(make_person_keypoints(50, 10, 1.0, false, side)).any());
  }
}

TEST(Waving, MatchesRuleAndIgnoresOtherKeypoints) {
  const std::vector<double> rows{0, 50, 100, 150};
  const std::vector<double> confs{0.0, 0.3, 0.9};
  for (double wv : rows)
    for (double ev : rows)
      for (double sv : rows)
        for (double wc : confs)
          for (double ec : confs)
            for (double sc : confs) {
              PersonKeypoints kp;
              kp.points["wrist_l"] = {1, wv, wc};
              kp.points["elbow_l"] = {1, ev, ec};
              kp.points["shoulder_l"] = {1, sv, sc};
              const bool expect = oracle::waving_rule(wv, wc, ev, ec, sv, sc, 0.3);
              EXPECT_EQ(detect_waving(kp, 0.3).left, expect);
              kp.points["nose"] = {5, 0, 1.0};
              kp.points["wrist_r"] = {0, 500, 0.1};
              kp.points["hip_l"] = {3, -20, 0.99};
              EXPECT_EQ(detect_waving(kp, 0.3).left, expect);
              EXPECT_FALSE(detect_waving(kp, 0.3).right);
            }
}

TEST(Noise, SigmaCalibration) {
  EXPECT_NEAR(depth_noise_sigma(1.0), 0.02036, 1e-15);
  EXPECT_NEAR(depth_noise_sigma(3.0), 0.07915, 1e-15);
  EXPECT_NEAR(depth_noise_sigma(2.0), 0.049755, 1e-15);
  EXPECT_DOUBLE_EQ(depth_noise_sigma(0.1), depth_noise_sigma(0.4));
  EXPECT_GT(depth_noise_sigma(0.4), 0.0);
}

TEST(Noise, EmpiricalStdAndDeterminism) {
  for (double d : {1.0, 3.0}) {
    const DepthImage flat(400, 250, d);
    const auto noisy = apply_depth_noise(flat, 99);
    double sum = 0.0, sq = 0.0;
    for (double v : noisy.depth) {
      sum += v - d;
      sq += (v - d) * (v - d);
    }
    const double n = static_cast<double>(noisy.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_NEAR(sd / depth_noise_sigma(d), 1.0, 0.02);
    EXPECT_EQ(apply_depth_noise(flat, 99).depth, noisy.depth);
    EXPECT_NE(apply_depth_noise(flat, 100).depth, noisy.depth);
  }
}

TEST(Noise, InvalidPixelsStayInvalidAndDrawsArePerPixel) {
  DepthImage img(10, 10, 2.0);
  img.at(3, 3) = 0.0;
  img.at(4, 4) = NAN;
  const auto noisy = apply_depth_noise(img, 5);
  EXPECT_EQ(noisy.at(3, 3), 0.0);
  EXPECT_TRUE(std::isnan(noisy.at(4, 4)));
  // Changing one pixel's input does not move any other pixel's noise.
  DepthImage other = img;
  other.at(0, 0) = 1.0;
  const auto noisy2 = apply_depth_noise(other, 5);
  for (std::size_t i = 1; i < img.size(); ++i)
    if (DepthImage::valid(img.depth[i])) {
      EXPECT_EQ(noisy2.depth[i], noisy.depth[i]);
    }
}

TEST(AnalyzeFrame, ChairsAndWaving) {
  PerceptionFrame f;
  f.camera = {60, 40, kDefaultHfov};
  f.depth = DepthImage(60, 40, 5.0);
  f.detections.push_back(DetectionMask::rectangle("chair", 60, 40, {2, 20, 10, 10}));
  f.detections.push_back(DetectionMask::rectangle("chair", 60, 40, {40, 20, 10, 10}));
  f.detections.push_back(DetectionMask::rectangle("person", 60, 40, {3, 5, 8, 20}));
  f.persons.push_back({make_person_keypoints(7, 5, 0.3, true)});
  const auto rep = analyze_frame(f);
  ASSERT_EQ(rep.chairs.size(), 2u);
  EXPECT_EQ(rep.chairs[0].occupancy.status, ChairStatus::taken);
  EXPECT_EQ(rep.chairs[1].occupancy.status, ChairStatus::free);
  EXPECT_TRUE(rep.chairs[1].location.has_value());
  EXPECT_EQ(rep.chairs[1].detection_index, 1u);
  EXPECT_TRUE(rep.any_waving);
  EXPECT_EQ(rep.localization.objects.size(), 3u);
}

}  // namespace
}  // namespace butler
