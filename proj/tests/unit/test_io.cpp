#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "stereopick/rng.hpp"
#include "stereopick/serial.hpp"

using namespace stereopick;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("stereopick_io_" + name);
}

Mat3 random_rotation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  Eigen::Quaterniond q(a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2),
                       b * std::sin(2 * M_PI * u3), b * std::cos(2 * M_PI * u3));
  return q.normalized().toRotationMatrix();
}

}  // namespace

TEST_CASE("pfm round trip") {
  Rng rng(7);
  Image<double> img(37, 21);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img(x, y) = rng.uniform(-50.0, 200.0);
  const auto path = temp_file("roundtrip.pfm");
  write_pfm(path.string(), img);
  const Image<double> back = read_pfm(path.string());
  REQUIRE(back.width() == img.width());
  REQUIRE(back.height() == img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      REQUIRE(back(x, y) == static_cast<double>(static_cast<float>(img(x, y))));
  fs::remove(path);
}

TEST_CASE("pfm disparity validity convention") {
  DisparityMap map(8, 4);
  map.set(2, 1, 17.25);
  map.set(5, 3, 62.0);
  const auto path = temp_file("disp.pfm");
  write_pfm(path.string(), map);
  const DisparityMap back = read_pfm_disparity(path.string());
  REQUIRE(back.count_valid() == 2);
  REQUIRE(back.values(2, 1) == 17.25);
  REQUIRE(!back.is_valid(0, 0));
  fs::remove(path);
}

TEST_CASE("png round trips") {
  SECTION("8-bit rgb") {
    Rng rng(8);
    ImageRgb img(23, 17);
    for (int y = 0; y < 17; ++y)
      for (int x = 0; x < 23; ++x)
        img(x, y) = {rng.uniform_int(0, 255) / 255.0f, rng.uniform_int(0, 255) / 255.0f,
                     rng.uniform_int(0, 255) / 255.0f};
    const auto path = temp_file("rgb.png");
    write_png_rgb8(path.string(), img);
    const ImageRgb back = read_png_rgb(path.string());
    REQUIRE(back == img);
    fs::remove(path);
  }
  SECTION("8-bit gray") {
    Rng rng(9);
    Image<uint8_t> img(31, 9);
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 31; ++x) img(x, y) = static_cast<uint8_t>(rng.uniform_int(0, 255));
    const auto path = temp_file("gray.png");
    write_png_gray8(path.string(), img);
    REQUIRE(read_png_gray8(path.string()) == img);
    fs::remove(path);
  }
  SECTION("16-bit disparity with the 1/256 quantization") {
    DisparityMap map(12, 6);
    map.set(3, 2, 60.0);
    map.set(7, 4, 17.5);
    map.set(0, 0, 200.25);
    const auto path = temp_file("disp16.png");
    write_png_disparity16(path.string(), map);
    const DisparityMap back = read_png_disparity16(path.string());
    REQUIRE(back.count_valid() == 3);
    REQUIRE(back.values(3, 2) == 60.0);
    REQUIRE(back.values(7, 4) == 17.5);
    REQUIRE(back.values(0, 0) == 200.25);
    REQUIRE(!back.is_valid(1, 1));  // zero means invalid
    fs::remove(path);
  }
  SECTION("deterministic bytes") {
    Image<uint8_t> img(16, 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) img(x, y) = static_cast<uint8_t>(x * 16 + y);
    const auto p1 = temp_file("det1.png");
    const auto p2 = temp_file("det2.png");
    write_png_gray8(p1.string(), img);
    write_png_gray8(p2.string(), img);
    REQUIRE(file_crc32(p1.string()) == file_crc32(p2.string()));
    fs::remove(p1);
    fs::remove(p2);
  }
}

TEST_CASE("json round trips") {
  Rng rng(10);
  SECTION("detections") {
    std::vector<Detection> dets;
    for (int i = 0; i < 4; ++i) {
      Detection d;
      d.box.t = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2));
      d.box.half_extents = Vec3(rng.uniform(0.01, 0.2), rng.uniform(0.01, 0.2),
                                rng.uniform(0.01, 0.2));
      d.box.R = random_rotation(rng);
      d.confidence = rng.uniform(0.0, 1.0);
      dets.push_back(d);
    }
    const std::vector<Detection> back = detections_from_json(detections_to_json(dets));
    REQUIRE(back.size() == dets.size());
    for (size_t i = 0; i < dets.size(); ++i) {
      REQUIRE((back[i].box.t - dets[i].box.t).norm() == 0.0);
      REQUIRE((back[i].box.R - dets[i].box.R).norm() == 0.0);
      REQUIRE(back[i].confidence == dets[i].confidence);
    }
  }
  SECTION("keypoints") {
    KeypointSet kps;
    kps["sleeve"] = {{10.5, 20.25, 0.9}, {100.0, 50.0, 0.4}};
    kps["neck"] = {{60.0, 60.0, 1.0}};
    const KeypointSet back = keypoints_from_json(to_json(kps));
    REQUIRE(back.size() == 2);
    REQUIRE(back.at("sleeve").size() == 2);
    REQUIRE(back.at("sleeve")[0].u == 10.5);
    REQUIRE(back.at("neck")[0].score == 1.0);
  }
  SECTION("rig") {
    StereoRig rig;
    rig.intrinsics = {501.25, 499.75, 480.5, 255.5, 960, 512};
    rig.baseline = 0.12;
    const StereoRig back = rig_from_json(to_json(rig));
    REQUIRE(back.intrinsics.fx == rig.intrinsics.fx);
    REQUIRE(back.intrinsics.width == rig.intrinsics.width);
    REQUIRE(back.baseline == rig.baseline);
  }
}

TEST_CASE("head tensor directory round trip") {
  HeadTensors t = make_head_tensors(64, 48, {"sleeve"});
  Rng rng(12);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      t.seg(x, y) = static_cast<uint8_t>(rng.uniform_int(0, 2));
      t.inst_heatmap(x, y) = rng.uniform();
      t.kp_heatmaps[0](x, y) = rng.uniform();
      if (rng.uniform() < 0.8) t.disparity_full.set(x, y, rng.uniform(0.5, 90.0));
    }
  for (int i = 0; i < 6; ++i)
    for (int y = 0; y < t.grid_height(); ++y)
      for (int x = 0; x < t.grid_width(); ++x) {
        t.vertex_offsets(i, y, x) = rng.uniform(-30.0, 30.0);
        t.covariance(i, y, x) = rng.uniform(-0.01, 0.01);
        t.z_centroid(x, y) = rng.uniform(0.3, 2.0);
      }

  const fs::path dir = fs::temp_directory_path() / "stereopick_io_tensors";
  fs::remove_all(dir);
  save_head_tensors(dir.string(), t);
  const HeadTensors back = load_head_tensors(dir.string());
  REQUIRE(back.width == t.width);
  REQUIRE(back.seg == t.seg);
  REQUIRE(back.kp_classes == t.kp_classes);
  // Real channels go through float32 storage.
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      REQUIRE(back.inst_heatmap(x, y) == Approx(t.inst_heatmap(x, y)).margin(1e-6));
      REQUIRE(back.kp_heatmaps[0](x, y) == Approx(t.kp_heatmaps[0](x, y)).margin(1e-6));
    }
  for (int i = 0; i < 6; ++i)
    for (int y = 0; y < t.grid_height(); ++y)
      for (int x = 0; x < t.grid_width(); ++x)
        REQUIRE(back.vertex_offsets(i, y, x) == Approx(t.vertex_offsets(i, y, x)).margin(1e-4));
  REQUIRE(back.disparity_full.count_valid() == t.disparity_full.count_valid());
  fs::remove_all(dir);
}

TEST_CASE("pr curve svg") {
  PrCurve curve;
  curve.points = {{0.0, 1.0}, {0.5, 1.0}, {1.0, 0.6}};
  curve.ap = 0.8;
  const auto path = temp_file("pr.svg");
  svg_pr_curve(curve, path.string());
  std::ifstream in(path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(content.find("<svg") != std::string::npos);
  REQUIRE(content.find("polyline") != std::string::npos);
  fs::remove(path);
}
