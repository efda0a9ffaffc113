#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "butler/frame_io.hpp"
#include "butler/random.hpp"
#include "butler/synthetic.hpp"

namespace butler {
namespace {

namespace fs = std::filesystem;

std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

TEST(Base64, KnownVectors) {
  // RFC 4648 test vectors.
  const std::vector<std::pair<std::string, std::string>> cases{
      {"", ""}, {"f", "Zg=="}, {"fo", "Zm8="}, {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
      {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, enc] : cases) {
    EXPECT_EQ(detail::base64_encode(bytes(plain)), enc);
    EXPECT_EQ(detail::base64_decode(enc), bytes(plain));
  }
}

TEST(Base64, RandomRoundTripAndBadInput) {
  Rng rng(4);
  for (int n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(n));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(256));
    EXPECT_EQ(detail::base64_decode(detail::base64_encode(b)), b);
  }
  EXPECT_THROW(detail::base64_decode("Zm9"), FormatError);
  EXPECT_THROW(detail::base64_decode("Zm9v!A=="), FormatError);
  EXPECT_THROW(detail::base64_decode("Z=9v"), FormatError);
  EXPECT_THROW(detail::base64_decode("Zg==Zm9v"), FormatError);
}

TEST(Rle, RoundTripAndLayout) {
  const std::vector<std::uint8_t> mask{1, 1, 0, 0, 0, 1};
  EXPECT_EQ(encode_rle(mask), (std::vector<std::uint32_t>{0, 2, 3, 1}));
  EXPECT_EQ(decode_rle(std::vector<std::uint32_t>{0, 2, 3, 1}, 6), mask);
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> m(1 + rng.below(300));
    for (auto& b : m) b = rng.uniform() < 0.3 ? 1 : 0;
    EXPECT_EQ(decode_rle(encode_rle(m), m.size()), m);
  }
  EXPECT_THROW(decode_rle(std::vector<std::uint32_t>{3, 4}, 6), FormatError);
  EXPECT_THROW(decode_rle(std::vector<std::uint32_t>{1, 1}, 6), FormatError);
}

TEST(DepthPayload, FloatValuesSurviveExactly) {
  DepthImage img(3, 2, 0.0);
  img.depth = {0.0, 1.5, static_cast<float>(2.123456789), NAN, 7.25, static_cast<float>(0.1)};
  const auto back = decode_depth_f32le(3, 2, encode_depth_f32le(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (std::isnan(img.depth[i])) EXPECT_TRUE(std::isnan(back.depth[i]));
    else EXPECT_EQ(back.depth[i], img.depth[i]);
  }
  // Little-endian layout: 1.5f is 0x3FC00000.
  DepthImage one(1, 1, 1.5);
  EXPECT_EQ(detail::base64_decode(encode_depth_f32le(one)), (std::vector<std::uint8_t>{0x00, 0x00, 0xC0, 0x3F}));
  EXPECT_THROW(decode_depth_f32le(2, 2, encode_depth_f32le(img)), FormatError);
  DepthImage neg(1, 1, -1.0);
  EXPECT_THROW(decode_depth_f32le(1, 1, encode_depth_f32le(neg)), FormatError);
}

TEST(FrameFile, SyntheticSceneRoundTrip) {
  const auto dir = fs::temp_directory_path() / "butler_frame_io";
  fs::create_directories(dir);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto f = generate_scene(seed);
    f.timestamp = 1.25 * static_cast<double>(seed);
    f.persons.push_back({make_person_keypoints(40, 10, 0.7, seed % 2 == 0)});
    save_frame(f, dir / "f.json");
    const auto back = load_frame(dir / "f.json");
    EXPECT_EQ(back.camera.width, f.camera.width);
    EXPECT_EQ(back.camera.hfov, f.camera.hfov);
    EXPECT_EQ(back.pose.x, f.pose.x);
    EXPECT_EQ(back.pose.theta, f.pose.theta);
    EXPECT_EQ(back.timestamp, f.timestamp);
    EXPECT_EQ(back.depth.depth, f.depth.depth);
    ASSERT_EQ(back.detections.size(), f.detections.size());
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      EXPECT_EQ(back.detections[i].mask, f.detections[i].mask);
      EXPECT_EQ(back.detections[i].bbox, f.detections[i].bbox);
      EXPECT_EQ(back.detections[i].label, f.detections[i].label);
      EXPECT_EQ(back.detections[i].confidence, f.detections[i].confidence);
    }
    ASSERT_EQ(back.persons.size(), 1u);
    EXPECT_EQ(back.persons[0].keypoints.get("wrist_r").v, f.persons[0].keypoints.get("wrist_r").v);
    ASSERT_EQ(back.ground_truth.size(), f.ground_truth.size());
    EXPECT_EQ(back.ground_truth[0].x, f.ground_truth[0].x);

    const auto a = localize_objects(f), b = localize_objects(back);
    for (std::size_t i = 0; i < a.objects.size(); ++i) EXPECT_EQ(a.objects[i].x, b.objects[i].x);
  }
  fs::remove_all(dir);
}

TEST(FrameFile, MalformedFramesAreRejected) {
  const auto good = frame_to_json(generate_scene(1));
  EXPECT_NO_THROW(frame_from_json(good));
  auto no_pose = good;
  no_pose.erase("pose");
  EXPECT_THROW(frame_from_json(no_pose), FormatError);
  auto bad_size = good;
  bad_size["depth"]["width"] = 10;
  EXPECT_THROW(frame_from_json(bad_size), FormatError);
  auto bad_bbox = good;
  bad_bbox["detections"][0]["bbox"] = {0, 0, 1};
  EXPECT_THROW(frame_from_json(bad_bbox), FormatError);
  auto bbox_misses = good;
  bbox_misses["detections"][0]["bbox"] = {0, 0, 1, 1};
  EXPECT_THROW(frame_from_json(bbox_misses), FormatError);
  auto bad_hfov = good;
  bad_hfov["camera"]["hfov"] = 4.0;
  EXPECT_THROW(frame_from_json(bad_hfov), FormatError);
  auto bad_kp = good;
  bad_kp["persons"] = {{{"keypoints", {{"wrist_l", {1.0, 2.0}}}}}};
  EXPECT_THROW(frame_from_json(bad_kp), FormatError);

  const auto path = fs::temp_directory_path() / "butler_bad_frame.json";
  std::ofstream(path) << "[1, 2";
  EXPECT_THROW(load_frame(path), FormatError);
  fs::remove(path);
  EXPECT_THROW(load_frame(fs::temp_directory_path() / "butler_no_such_frame.json"), IoError);
}

}  // namespace
}  // namespace butler
