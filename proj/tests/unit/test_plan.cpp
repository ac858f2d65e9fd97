#include <catch2/catch_amalgamated.hpp>

#include "stereopick/heads.hpp"
#include "stereopick/plan.hpp"
#include "stereopick/rng.hpp"

using namespace stereopick;
using Catch::Approx;

namespace {

Mat3 random_rotation(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  Eigen::Quaterniond q(a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2),
                       b * std::sin(2 * M_PI * u3), b * std::cos(2 * M_PI * u3));
  return q.normalized().toRotationMatrix();
}

StereoRig test_rig() {
  StereoRig rig;
  rig.intrinsics = {400.0, 400.0, 160.0, 120.0, 320, 240};
  rig.baseline = 0.12;
  return rig;
}

}  // namespace

TEST_CASE("grasp planning exemplars") {
  GraspConfig cfg;  // up = +z, robot at the origin

  SECTION("upright bottle gets a horizontal side grasp") {
    Obb bottle;
    bottle.half_extents = Vec3(0.03, 0.03, 0.12);
    bottle.t = Vec3(0.45, 0.25, 0.12);
    const GraspPlan plan = plan_grasp(bottle, cfg);
    REQUIRE(plan.style == GraspStyle::side);
    REQUIRE(std::abs(plan.jaw_axis.dot(Vec3(0, 0, 1))) < 1e-9);       // horizontal jaws
    REQUIRE(std::abs(plan.approach.dot(plan.jaw_axis)) < 1e-6);       // orthogonal frame
    REQUIRE(plan.width == Approx(0.06 + cfg.clearance).margin(1e-9));
  }

  SECTION("flat stapler gets a top grasp aligned with its long axis") {
    Obb stapler;
    stapler.half_extents = Vec3(0.10, 0.02, 0.015);
    stapler.t = Vec3(0.4, 0.1, 0.015);
    const GraspPlan plan = plan_grasp(stapler, cfg);
    REQUIRE(plan.style == GraspStyle::top);
    REQUIRE(plan.approach.isApprox(Vec3(0, 0, -1), 1e-9));
    REQUIRE(std::abs(plan.jaw_axis.dot(Vec3(1, 0, 0))) < 1e-9);  // jaws across the 0.20 axis
    REQUIRE(plan.width == Approx(0.04 + cfg.clearance).margin(1e-9));
  }

  SECTION("cube gets a side grasp at the face nearest the robot") {
    Obb cube;
    cube.half_extents = Vec3(0.03, 0.03, 0.03);
    cube.t = Vec3(0.5, 0.0, 0.03);
    const GraspPlan plan = plan_grasp(cube, cfg);
    REQUIRE(plan.style == GraspStyle::side);
    // Nearest point of the box to the origin lies on the x = 0.47 face.
    REQUIRE(plan.point.x() == Approx(0.47).margin(1e-9));
    REQUIRE(std::abs(plan.approach.dot(plan.jaw_axis)) < 1e-6);
  }

  SECTION("oversized object is ungraspable") {
    Obb crate;
    crate.half_extents = Vec3(0.2, 0.2, 0.2);
    crate.t = Vec3(0.5, 0.0, 0.2);
    REQUIRE_THROWS_AS(plan_grasp(crate, cfg), Ungraspable);
  }

  SECTION("falls back to a thinner jaw axis when the preferred one is too wide") {
    // Upright box whose first minor-axis candidate (x, extent 0.16) exceeds
    // the opening while the second (y, extent 0.04) fits.
    Obb box;
    box.half_extents = Vec3(0.08, 0.02, 0.15);
    box.t = Vec3(0.0, 0.5, 0.15);  // approach along +y ties the tilt break to x first
    const GraspPlan plan = plan_grasp(box, cfg);
    REQUIRE(plan.style == GraspStyle::side);
    REQUIRE(plan.width == Approx(0.04 + cfg.clearance).margin(1e-9));
    REQUIRE(std::abs(plan.jaw_axis.dot(Vec3(0, 1, 0))) == Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("grasp planning invariances") {
  GraspConfig cfg;
  Rng rng(61);

  SECTION("axis relabeling leaves the plan unchanged up to jaw sign") {
    for (int trial = 0; trial < 200; ++trial) {
      Obb box;
      // Small enough that every support direction fits the gripper.
      box.half_extents = Vec3(rng.uniform(0.01, 0.025), rng.uniform(0.01, 0.025),
                              rng.uniform(0.01, 0.025));
      box.R = random_rotation(rng);
      box.t = Vec3(rng.uniform(0.2, 0.6), rng.uniform(-0.4, 0.4), rng.uniform(0.05, 0.3));
      const GraspPlan base = plan_grasp(box, cfg);

      // Swap two axis labels (columns) while keeping det = +1.
      Obb relabeled = box;
      relabeled.R.col(0) = box.R.col(1);
      relabeled.R.col(1) = box.R.col(0);
      relabeled.R.col(2) = -box.R.col(2);
      relabeled.half_extents = Vec3(box.half_extents.y(), box.half_extents.x(),
                                    box.half_extents.z());
      const GraspPlan swapped = plan_grasp(relabeled, cfg);
      REQUIRE(swapped.style == base.style);
      REQUIRE(swapped.width == Approx(base.width).margin(1e-9));
      REQUIRE((swapped.point - base.point).norm() < 1e-9);
      REQUIRE(std::abs(swapped.jaw_axis.dot(base.jaw_axis)) == Approx(1.0).margin(1e-9));
    }
  }

  SECTION("style is scale covariant") {
    for (int trial = 0; trial < 100; ++trial) {
      Obb box;
      box.half_extents = Vec3(rng.uniform(0.008, 0.018), rng.uniform(0.008, 0.018),
                              rng.uniform(0.008, 0.018));
      box.R = random_rotation(rng);
      box.t = Vec3(rng.uniform(0.2, 0.6), rng.uniform(-0.4, 0.4), rng.uniform(0.05, 0.3));
      const GraspPlan base = plan_grasp(box, cfg);
      Obb scaled = box;
      scaled.half_extents *= rng.uniform(0.5, 1.4);
      REQUIRE(plan_grasp(scaled, cfg).style == base.style);
    }
  }
}

TEST_CASE("table plane fitting") {
  const StereoRig rig = test_rig();
  const CameraIntrinsics& cam = rig.intrinsics;

  auto plane_fixture = [&](double z0, double outlier_fraction, uint64_t seed) {
    DisparityMap disparity(cam.width, cam.height);
    ImageMask seg(cam.width, cam.height, static_cast<uint8_t>(SegClass::background));
    Rng rng(seed);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        if ((x + y) % 3) continue;  // subsample for speed
        seg(x, y) = static_cast<uint8_t>(SegClass::surface);
        double z = z0;
        if (outlier_fraction > 0.0 && rng.uniform() < outlier_fraction)
          z = rng.uniform(0.3, 3.0);
        disparity.set(x, y, cam.fx * rig.baseline / z);
      }
    return std::pair{disparity, seg};
  };

  SECTION("noiseless fronto-parallel plane is exact") {
    const auto [disparity, seg] = plane_fixture(1.0, 0.0, 1);
    const Plane plane = fit_table_plane(disparity, seg, rig);
    REQUIRE(plane.n.isApprox(Vec3(0, 0, -1), 1e-6));
    REQUIRE(plane.d == Approx(1.0).margin(1e-6));
  }

  SECTION("robust to 20% gross outliers") {
    const auto [disparity, seg] = plane_fixture(1.0, 0.2, 2);
    const Plane plane = fit_table_plane(disparity, seg, rig);
    REQUIRE(std::acos(std::clamp(-plane.n.z(), -1.0, 1.0)) * 180.0 / M_PI < 0.5);
    REQUIRE(plane.d == Approx(1.0).margin(0.002));
  }

  SECTION("slanted plane is recovered") {
    DisparityMap disparity(cam.width, cam.height);
    ImageMask seg(cam.width, cam.height, static_cast<uint8_t>(SegClass::surface));
    const Vec3 n = Vec3(0.2, -0.3, -1.0).normalized();
    const double d = 0.9;
    for (int y = 0; y < cam.height; y += 2)
      for (int x = 0; x < cam.width; x += 2) {
        const Vec3 ray = cam.ray(x, y);
        const double s = -d / n.dot(ray);
        if (s <= 0) continue;
        disparity.set(x, y, cam.fx * rig.baseline / (s * ray.z()));
      }
    const Plane plane = fit_table_plane(disparity, seg, rig);
    REQUIRE(std::abs(plane.n.dot(n)) == Approx(1.0).margin(1e-9));
    REQUIRE(std::abs(plane.d) == Approx(d).margin(1e-6));
  }

  SECTION("no surface pixels fails") {
    DisparityMap disparity(cam.width, cam.height, 30.0, true);
    ImageMask seg(cam.width, cam.height, static_cast<uint8_t>(SegClass::background));
    REQUIRE_THROWS_AS(fit_table_plane(disparity, seg, rig), PlaneFitError);
  }

  SECTION("majority outliers fail the inlier-ratio gate") {
    const auto [disparity, seg] = plane_fixture(1.0, 0.7, 3);
    REQUIRE_THROWS_AS(fit_table_plane(disparity, seg, rig), PlaneFitError);
  }
}

TEST_CASE("keypoint lifting") {
  const StereoRig rig = test_rig();
  const CameraIntrinsics& cam = rig.intrinsics;
  Plane plane;
  plane.n = Vec3(0, 0, -1);
  plane.d = 1.0;

  SECTION("principal-point ray hits straight ahead") {
    const Vec3 p = lift_keypoint(cam.cx, cam.cy, plane, cam);
    REQUIRE(p.isApprox(Vec3(0, 0, 1), 1e-12));
  }
  SECTION("project-then-lift is the identity on the plane") {
    Rng rng(91);
    Plane tilted;
    tilted.n = Vec3(0.15, -0.2, -1.0).normalized();
    tilted.d = 0.8;
    for (int i = 0; i < 100; ++i) {
      // Random point on the plane in front of the camera.
      const double x = rng.uniform(-0.3, 0.3), y = rng.uniform(-0.2, 0.2);
      const double z = (tilted.d + tilted.n.x() * x + tilted.n.y() * y) / -tilted.n.z();
      const Vec3 p(x, y, z);
      REQUIRE(z > 0);
      const Vec2 px = cam.project(p);
      const Vec3 lifted = lift_keypoint(px.x(), px.y(), tilted, cam);
      REQUIRE((lifted - p).norm() < 1e-9);
    }
  }
  SECTION("parallel ray has no intersection") {
    Plane vertical;
    vertical.n = Vec3(0, 1, 0);
    vertical.d = -0.5;
    REQUIRE_THROWS_AS(lift_keypoint(cam.cx, cam.cy, vertical, cam), NoIntersection);
  }
  SECTION("plane behind the camera has no intersection") {
    Plane behind;
    behind.n = Vec3(0, 0, -1);
    behind.d = -1.0;
    REQUIRE_THROWS_AS(lift_keypoint(cam.cx, cam.cy, behind, cam), NoIntersection);
  }
}

TEST_CASE("fold planning") {
  Plane table;
  table.n = Vec3(0, 0, -1);
  table.d = 0.8;
  const double z = 0.8;

  // The four canonical states of the sideways-column sequence.
  Keypoints3d flat;
  flat["sleeve"] = {Vec3(-0.30, 0.0, z), Vec3(0.30, 0.0, z)};
  flat["neck"] = {Vec3(0.0, -0.20, z)};
  flat["bottom_corner"] = {Vec3(-0.22, 0.25, z), Vec3(0.22, 0.25, z)};

  Keypoints3d after1;
  after1["sleeve"] = {Vec3(0.28, 0.02, z)};
  after1["neck"] = {Vec3(0.10, -0.20, z)};
  after1["bottom_corner"] = {Vec3(-0.05, 0.25, z), Vec3(0.25, 0.25, z)};

  Keypoints3d after2;
  after2["sleeve"] = {Vec3(0.24, -0.05, z), Vec3(0.24, 0.12, z)};
  after2["neck"] = {Vec3(0.10, -0.20, z)};
  after2["bottom_corner"] = {Vec3(0.10, 0.05, z)};

  Keypoints3d after3;
  after3["neck"] = {Vec3(0.10, -0.20, z)};
  after3["bottom_corner"] = {Vec3(0.10, 0.05, z)};

  SECTION("flat shirt plans sleeve-to-sleeve") {
    const FoldStep step = plan_fold_step(flat);
    REQUIRE(step.step == 1);
    REQUIRE(step.pick.isApprox(Vec3(-0.30, 0.0, z), 1e-12));
    REQUIRE(step.place.isApprox(Vec3(0.30, 0.0, z), 1e-12));
  }
  SECTION("after the bottom fold the sleeves move to the neck line") {
    const FoldStep step = plan_fold_step(after2);
    REQUIRE(step.step == 3);
    REQUIRE(step.anchors.size() == 2);
    REQUIRE(step.anchors[0].isApprox(after2["sleeve"][0], 1e-12));
    REQUIRE(step.anchors[1].isApprox(after2["sleeve"][1], 1e-12));
    REQUIRE(step.place.x() == Approx(0.10).margin(1e-12));  // aligned with the neck
  }
  SECTION("missing classes are named") {
    Keypoints3d only_neck;
    only_neck["neck"] = {Vec3(0, 0, z)};
    try {
      plan_fold_step(only_neck);
      FAIL("expected IncompleteState");
    } catch (const IncompleteState& e) {
      REQUIRE(e.missing == std::vector<std::string>{"sleeve", "bottom_corner"});
    }
  }
  SECTION("the four canonical states chain into the full sequence") {
    const FoldPlan plan = plan_fold_sequence({flat, after1, after2, after3});
    REQUIRE(plan.steps.size() == 4);
    REQUIRE(plan.steps[0].name == "sleeve_to_sleeve");
    REQUIRE(plan.steps[1].name == "bottom_to_bottom");
    REQUIRE(plan.steps[2].name == "sleeves_to_neck");
    REQUIRE(plan.steps[3].name == "bottom_over_top");
    plan.validate(table, 0.005);  // every point on the fitted plane
  }
  SECTION("out-of-order states are rejected") {
    REQUIRE_THROWS_AS(plan_fold_sequence({after1, flat, after2, after3}), Error);
  }
}
