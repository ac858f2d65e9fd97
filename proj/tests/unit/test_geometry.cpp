#include <catch2/catch_amalgamated.hpp>

#include "stereopick/geometry.hpp"
#include "stereopick/rng.hpp"

using namespace stereopick;
using Catch::Approx;

namespace {

StereoRig test_rig(double fx = 500.0, double baseline = 0.12) {
  StereoRig rig;
  rig.intrinsics = {fx, fx, 480.0, 256.0, 960, 512};
  rig.baseline = baseline;
  return rig;
}

Mat3 random_rotation(Rng& rng) {
  // Uniform rotation via random quaternion.
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  Eigen::Quaterniond q(a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2),
                       b * std::sin(2 * M_PI * u3), b * std::cos(2 * M_PI * u3));
  return q.normalized().toRotationMatrix();
}

}  // namespace

TEST_CASE("disparity/depth conversion") {
  const StereoRig rig = test_rig();

  SECTION("direct value") {
    REQUIRE(disparity_to_depth(60.0, rig) == Approx(1.0).epsilon(1e-12));
  }
  SECTION("zero disparity is degenerate") {
    REQUIRE_THROWS_AS(disparity_to_depth(0.0, rig), DegenerateDisparity);
    REQUIRE_THROWS_AS(disparity_to_depth(-3.0, rig), DegenerateDisparity);
  }
  SECTION("round trip over integer disparities") {
    for (int d = 1; d <= 128; ++d) {
      const double back = depth_to_disparity(disparity_to_depth(d, rig), rig);
      REQUIRE(back == Approx(static_cast<double>(d)).epsilon(1e-9));
    }
  }
  SECTION("round trip over the full range") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const double d = rng.uniform(0.1, 256.0);
      REQUIRE(depth_to_disparity(disparity_to_depth(d, rig), rig) ==
              Approx(d).epsilon(1e-9));
    }
  }
  SECTION("monotone decreasing in disparity") {
    REQUIRE(disparity_to_depth(10.0, rig) > disparity_to_depth(20.0, rig));
  }
}

TEST_CASE("obb vertex projection") {
  CameraIntrinsics cam{100.0, 100.0, 0.0, 0.0, 960, 512};

  SECTION("axis-aligned box, hand-projected corners") {
    // cx = cy = 0 is outside the image contract but fine for projection math.
    Obb box;
    box.t = Vec3(0, 0, 2);
    box.half_extents = Vec3(0.5, 0.5, 0.5);
    const auto verts = project_obb_vertices(box, cam);
    for (int k = 0; k < 8; ++k) {
      const Vec3 s = corner_signs(k);
      const double z = 2.0 + 0.5 * s.z();
      REQUIRE(verts[k].x() == Approx(100.0 * 0.5 * s.x() / z).margin(1e-9));
      REQUIRE(verts[k].y() == Approx(100.0 * 0.5 * s.y() / z).margin(1e-9));
      const double expected = z == 1.5 ? 100.0 * 0.5 / 1.5 : 20.0;
      REQUIRE(std::abs(verts[k].x()) == Approx(expected).margin(1e-9));
    }
  }
  SECTION("vanishing box collapses to the principal point") {
    CameraIntrinsics c2{100.0, 100.0, 48.0, 32.0, 96, 64};
    Obb box;
    box.t = Vec3(0, 0, 1);
    box.half_extents = Vec3(1e-12, 1e-12, 1e-12);
    for (const Vec2& v : project_obb_vertices(box, c2)) {
      REQUIRE(v.x() == Approx(48.0).margin(1e-8));
      REQUIRE(v.y() == Approx(32.0).margin(1e-8));
    }
  }
  SECTION("corner order follows the sign enumeration") {
    REQUIRE(corner_signs(0).isApprox(Vec3(-1, -1, -1)));
    REQUIRE(corner_signs(1).isApprox(Vec3(1, -1, -1)));
    REQUIRE(corner_signs(2).isApprox(Vec3(-1, 1, -1)));
    REQUIRE(corner_signs(7).isApprox(Vec3(1, 1, 1)));
  }
  SECTION("corner behind the camera") {
    Obb box;
    box.t = Vec3(0, 0, 0.3);
    box.half_extents = Vec3(0.5, 0.5, 0.5);
    REQUIRE_THROWS_AS(project_obb_vertices(box, cam), BehindCamera);
  }
}

TEST_CASE("3d iou") {
  SECTION("identical boxes") {
    Obb box;
    box.t = Vec3(0.1, -0.2, 1.0);
    box.half_extents = Vec3(0.2, 0.3, 0.1);
    REQUIRE(obb_iou_3d(box, box) == 1.0);
  }
  SECTION("identical rotated boxes are exact in sampling mode too") {
    Rng rng(5);
    Obb box;
    box.t = Vec3(0.1, 0.2, 0.3);
    box.half_extents = Vec3(0.2, 0.15, 0.1);
    box.R = random_rotation(rng);
    REQUIRE(obb_iou_3d(box, box, 20000) == 1.0);
  }
  SECTION("unit cubes offset by half an edge") {
    Obb a, b;
    a.half_extents = b.half_extents = Vec3(0.5, 0.5, 0.5);
    b.t = Vec3(0.5, 0, 0);
    REQUIRE(obb_iou_3d(a, b) == Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SECTION("disjoint boxes") {
    Obb a, b;
    a.half_extents = b.half_extents = Vec3(0.1, 0.1, 0.1);
    b.t = Vec3(5, 0, 0);
    REQUIRE(obb_iou_3d(a, b) == 0.0);
    Rng rng(6);
    b.R = random_rotation(rng);
    REQUIRE(obb_iou_3d(a, b, 20000) == 0.0);
  }
  SECTION("symmetry") {
    Rng rng(7);
    for (int i = 0; i < 5; ++i) {
      Obb a, b;
      a.half_extents = Vec3(rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3));
      b.half_extents = Vec3(rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3));
      a.R = random_rotation(rng);
      b.R = random_rotation(rng);
      b.t = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
      REQUIRE(obb_iou_3d(a, b, 50000, 99) == obb_iou_3d(b, a, 50000, 99));
    }
  }
  SECTION("sampling estimate against a dense oracle") {
    Rng rng(8);
    for (int i = 0; i < 3; ++i) {
      Obb a, b;
      a.half_extents = Vec3(0.2, 0.25, 0.3);
      b.half_extents = Vec3(0.22, 0.18, 0.28);
      a.R = random_rotation(rng);
      b.R = random_rotation(rng);
      b.t = Vec3(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15));
      const double estimate = obb_iou_3d(a, b, 200000, 1234);
      const double oracle = obb_iou_3d(a, b, 10000000, 777);
      REQUIRE(estimate == Approx(oracle).margin(0.01));
    }
  }
}

TEST_CASE("rotation from covariance") {
  SECTION("sorted diagonal maps to identity") {
    const Mat3 R = rotation_from_covariance(Vec3(4, 2, 1).asDiagonal());
    REQUIRE((R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("ascending diagonal yields the z-aligned permutation") {
    const Mat3 R = rotation_from_covariance(Vec3(1, 2, 4).asDiagonal());
    Mat3 expected;
    expected << 0, 0, -1, 0, 1, 0, 1, 0, 0;
    REQUIRE((R - expected).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(R.determinant() == Approx(1.0).epsilon(1e-12));
  }
  SECTION("isotropic covariance maps to identity") {
    const Mat3 R = rotation_from_covariance(Mat3::Identity());
    REQUIRE((R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("recovers a random frame up to sign flips") {
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
      const Mat3 r0 = random_rotation(rng);
      const Mat3 sigma = r0 * Vec3(4, 2, 1).asDiagonal() * r0.transpose();
      const Mat3 rec = rotation_from_covariance(sigma);
      for (int c = 0; c < 3; ++c)
        REQUIRE(std::abs(rec.col(c).dot(r0.col(c))) == Approx(1.0).margin(1e-8));
      REQUIRE(rec.determinant() == Approx(1.0).margin(1e-9));
      // Recomposition reproduces the covariance.
      const Mat3 recomposed = rec * Vec3(4, 2, 1).asDiagonal() * rec.transpose();
      REQUIRE((recomposed - sigma).norm() < 1e-6);
    }
  }
  SECTION("orthonormal output for random PSD inputs") {
    Rng rng(22);
    for (int i = 0; i < 50; ++i) {
      const Mat3 r0 = random_rotation(rng);
      const Vec3 evals(rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0));
      const Mat3 R = rotation_from_covariance(r0 * evals.asDiagonal() * r0.transpose());
      REQUIRE((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6);
      REQUIRE(R.determinant() == Approx(1.0).margin(1e-6));
    }
  }
  SECTION("asymmetric input is rejected") {
    Mat3 bad = Mat3::Identity();
    bad(0, 1) = 0.5;
    REQUIRE_THROWS_AS(rotation_from_covariance(bad), InvalidCovariance);
  }
  SECTION("negative-definite input is rejected") {
    REQUIRE_THROWS_AS(rotation_from_covariance(Vec3(-1, -2, -3).asDiagonal().toDenseMatrix()),
                      InvalidCovariance);
  }
}

TEST_CASE("canonical frame agreement between boxes and surface covariance") {
  Rng rng(31);
  for (int i = 0; i < 30; ++i) {
    Obb box;
    // Distinct extents so eigenvalue order is unambiguous.
    box.half_extents = Vec3(0.05, 0.09, 0.16);
    box.R = random_rotation(rng);
    box.t = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5));
    const Obb canon = canonicalize_obb(box);
    const Mat3 sigma = obb_surface_covariance(box);
    const Mat3 rec = rotation_from_covariance(sigma);
    REQUIRE(rotation_geodesic_deg(rec, canon.R) < 1e-4);
    canon.validate(1e-9);
    REQUIRE(canon.half_extents.x() >= canon.half_extents.y());
    REQUIRE(canon.half_extents.y() >= canon.half_extents.z());
    // Same physical box.
    REQUIRE(obb_iou_3d(box, canon, 20000) == 1.0);
  }
}

TEST_CASE("box surface covariance structure") {
  Obb box;
  box.half_extents = Vec3(0.2, 0.1, 0.05);
  const Mat3 sigma = obb_surface_covariance(box);
  // Identity frame: covariance is diagonal with entries ordered like extents.
  REQUIRE(std::abs(sigma(0, 1)) < 1e-12);
  REQUIRE(std::abs(sigma(0, 2)) < 1e-12);
  REQUIRE(std::abs(sigma(1, 2)) < 1e-12);
  REQUIRE(sigma(0, 0) > sigma(1, 1));
  REQUIRE(sigma(1, 1) > sigma(2, 2));
}

TEST_CASE("rotation distance helpers") {
  Rng rng(41);
  const Mat3 R = random_rotation(rng);
  REQUIRE(rotation_geodesic_deg(R, R) == Approx(0.0).margin(1e-9));
  const Mat3 flipped = R * Vec3(1, -1, -1).asDiagonal();
  REQUIRE(rotation_geodesic_deg(R, flipped) == Approx(180.0).margin(1e-9));
  REQUIRE(rotation_geodesic_mod_flips_deg(R, flipped) == Approx(0.0).margin(1e-9));
}

TEST_CASE("plane signed distance") {
  Plane plane;
  plane.n = Vec3(0, 0, -1);
  plane.d = 1.0;
  REQUIRE(plane.signed_distance(Vec3(0, 0, 1)) == Approx(0.0).margin(1e-15));
  REQUIRE(plane.signed_distance(Vec3(0, 0, 0)) == Approx(1.0));
}
