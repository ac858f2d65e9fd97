#include <catch2/catch_amalgamated.hpp>

#include "stereopick/rng.hpp"
#include "stereopick/stereo.hpp"

using namespace stereopick;
using Catch::Approx;

namespace {

ImageRgb quantized_noise_image(int w, int h, uint64_t seed) {
  Rng rng(seed);
  ImageRgb img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // Power-of-two denominator keeps the x1.5 gain exact in float, so the
      // rank-invariance check is free of rounding at equality boundaries.
      const float v = rng.uniform_int(0, 255) / 256.0f;
      img(x, y) = {v, v, v};
    }
  return img;
}

FeatureVolume random_unit_features(int channels, int h, int w, uint64_t seed) {
  Rng rng(seed);
  FeatureVolume out;
  out.data = Tensor3(channels, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double norm2 = 0.0;
      for (int c = 0; c < channels; ++c) {
        out.data(c, y, x) = rng.uniform(-1.0, 1.0);
        norm2 += sqr(out.data(c, y, x));
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (int c = 0; c < channels; ++c) out.data(c, y, x) *= inv;
    }
  return out;
}

/// Reference triple-loop implementation of the shifted-dot-product volume.
CostVolume brute_force_cost_volume(const FeatureVolume& l, const FeatureVolume& r, int slices,
                                   int stride) {
  CostVolume vol;
  vol.disparity_stride = stride;
  vol.data = Tensor3(slices, l.height(), l.width(), 0.0);
  for (int i = 0; i < slices; ++i)
    for (int y = 0; y < l.height(); ++y)
      for (int x = i; x < l.width(); ++x) {
        double sum = 0.0;
        for (int c = 0; c < l.channels(); ++c) sum += l.data(c, y, x) * r.data(c, y, x - i);
        vol.data(i, y, x) = sum;
      }
  return vol;
}

}  // namespace

TEST_CASE("feature extraction") {
  SECTION("dimensions must divide by four") {
    REQUIRE_THROWS_AS(extract_features(ImageRgb(30, 16)), ShapeError);
  }
  SECTION("constant image gives zero descriptors") {
    ImageRgb img(32, 16, Rgb{0.5f, 0.5f, 0.5f});
    const FeatureVolume f = extract_features(img);
    for (int c = 0; c < f.channels(); ++c)
      for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) REQUIRE(f.data(c, y, x) == 0.0);
  }
  SECTION("census channels are photometric-gain invariant") {
    const ImageRgb img = quantized_noise_image(64, 32, 3);
    ImageRgb scaled = img;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < 3; ++c) scaled(x, y)[c] = img(x, y)[c] * 1.5f;
    FeatureConfig cfg;
    cfg.normalize = false;
    const FeatureVolume a = extract_features(img, cfg);
    const FeatureVolume b = extract_features(scaled, cfg);
    const int census_channels = 48;
    for (int c = 0; c < census_channels; ++c)
      for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) REQUIRE(a.data(c, y, x) == b.data(c, y, x));
  }
  SECTION("quarter-resolution output shape") {
    const FeatureVolume f = extract_features(ImageRgb(960, 512, Rgb{0.1f, 0.2f, 0.3f}));
    REQUIRE(f.width() == 240);
    REQUIRE(f.height() == 128);
    REQUIRE(f.channels() == 48 + 25);
  }
}

TEST_CASE("cost volume construction") {
  SECTION("matches the brute-force oracle bit for bit") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const int c = rng.uniform_int(1, 4);
      const int h = rng.uniform_int(2, 8);
      const int w = rng.uniform_int(4, 8);
      const int slices = rng.uniform_int(1, 6);
      FeatureVolume l, r;
      l.data = Tensor3(c, h, w);
      r.data = Tensor3(c, h, w);
      for (int i = 0; i < c; ++i)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            l.data(i, y, x) = rng.uniform(-2.0, 2.0);
            r.data(i, y, x) = rng.uniform(-2.0, 2.0);
          }
      for (int threads : {1, 4}) {
        const CostVolume fast = build_cost_volume(l, r, slices, 2, threads);
        const CostVolume slow = brute_force_cost_volume(l, r, slices, 2);
        REQUIRE(fast.data == slow.data);
      }
    }
  }
  SECTION("self-match with unit descriptors gives ones at zero shift") {
    const FeatureVolume f = random_unit_features(8, 4, 12, 5);
    const CostVolume vol = build_cost_volume(f, f, 4);
    for (int y = 0; y < vol.height(); ++y)
      for (int x = 0; x < vol.width(); ++x)
        REQUIRE(vol.data(0, y, x) == Approx(1.0).epsilon(1e-12));
  }
  SECTION("shifted features peak at the shift slice") {
    const int k = 3;
    const FeatureVolume l = random_unit_features(6, 3, 20, 9);
    FeatureVolume r;
    r.data = Tensor3(6, 3, 20, 0.0);
    for (int c = 0; c < 6; ++c)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x + k < 20; ++x) r.data(c, y, x) = l.data(c, y, x + k);
    const CostVolume vol = build_cost_volume(l, r, 6, 1);
    for (int y = 0; y < 3; ++y)
      for (int x = k; x < 20; ++x) {
        int best = 0;
        for (int i = 1; i < 6; ++i)
          if (vol.data(i, y, x) > vol.data(best, y, x)) best = i;
        REQUIRE(best == k);
      }
  }
  SECTION("single-slice volume is the zero-shift correlation") {
    const FeatureVolume l = random_unit_features(4, 3, 8, 13);
    const FeatureVolume r = random_unit_features(4, 3, 8, 14);
    const CostVolume vol = build_cost_volume(l, r, 1);
    const CostVolume oracle = brute_force_cost_volume(l, r, 1, 2);
    REQUIRE(vol.data == oracle.data);
  }
  SECTION("shape mismatch is rejected") {
    FeatureVolume a, b;
    a.data = Tensor3(2, 4, 4);
    b.data = Tensor3(2, 4, 5);
    REQUIRE_THROWS_AS(build_cost_volume(a, b, 3), ShapeError);
  }
  SECTION("zero-padding invariant") {
    const FeatureVolume l = random_unit_features(3, 4, 10, 23);
    const FeatureVolume r = random_unit_features(3, 4, 10, 24);
    const CostVolume vol = build_cost_volume(l, r, 6);
    const CostVolume smoothed = aggregate_cost(vol, {AggregationConfig::Kernel::box, 3, 1.0});
    for (int i = 0; i < 6; ++i)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < std::min(i, 10); ++x) {
          REQUIRE(vol.data(i, y, x) == 0.0);
          REQUIRE(smoothed.data(i, y, x) == 0.0);
        }
  }
}

TEST_CASE("cost aggregation") {
  SECTION("kernel size one is the identity") {
    const FeatureVolume l = random_unit_features(3, 4, 8, 31);
    const CostVolume vol = build_cost_volume(l, l, 3);
    const CostVolume out = aggregate_cost(vol, {AggregationConfig::Kernel::box, 1, 1.0});
    REQUIRE(out.data == vol.data);
  }
  SECTION("constant slices are fixed points") {
    CostVolume vol;
    vol.data = Tensor3(1, 6, 6, 3.25);
    const CostVolume out = aggregate_cost(vol, {AggregationConfig::Kernel::box, 3, 1.0});
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) REQUIRE(out.data(0, y, x) == Approx(3.25).epsilon(1e-12));
  }
  SECTION("interior impulse spreads uniformly over the window") {
    CostVolume vol;
    vol.data = Tensor3(1, 7, 7, 0.0);
    vol.data(0, 3, 3) = 1.0;
    const CostVolume out = aggregate_cost(vol, {AggregationConfig::Kernel::box, 3, 1.0});
    for (int y = 2; y <= 4; ++y)
      for (int x = 2; x <= 4; ++x) REQUIRE(out.data(0, y, x) == Approx(1.0 / 9.0).epsilon(1e-12));
    REQUIRE(out.data(0, 0, 0) == 0.0);
  }
}

TEST_CASE("soft argmin") {
  SECTION("one-hot scores at vanishing temperature") {
    CostVolume vol;
    vol.disparity_stride = 2;
    vol.data = Tensor3(8, 1, 1, 0.0);
    vol.data(5, 0, 0) = 1.0;
    const DisparityMap d = soft_argmin(vol, 1e-4, {false, 1.2});
    REQUIRE(d.values(0, 0) == 10.0);
  }
  SECTION("uniform scores give the slice mean") {
    CostVolume vol;
    vol.disparity_stride = 2;
    vol.data = Tensor3(33, 1, 1, 0.7);
    const DisparityMap d = soft_argmin(vol, 1.0, {false, 1.2});
    REQUIRE(d.values(0, 0) == Approx(32.0).epsilon(1e-9));
  }
  SECTION("two equal peaks land midway and are flagged") {
    CostVolume vol;
    vol.disparity_stride = 2;
    vol.data = Tensor3(8, 1, 1, 0.0);
    vol.data(3, 0, 0) = 1.0;
    vol.data(5, 0, 0) = 1.0;
    const DisparityMap d = soft_argmin(vol, 1e-3);
    REQUIRE(d.values(0, 0) == Approx(8.0).epsilon(1e-9));
    REQUIRE(!d.is_valid(0, 0));  // ratio test: best / second-best = 1
  }
  SECTION("output stays inside the representable range") {
    Rng rng(77);
    CostVolume vol;
    vol.disparity_stride = 2;
    vol.data = Tensor3(9, 4, 6);
    for (int i = 0; i < 9; ++i)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) vol.data(i, y, x) = rng.uniform(-3.0, 3.0);
    const DisparityMap d = soft_argmin(vol, 0.5, {false, 1.2});
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) {
        REQUIRE(d.values(x, y) >= 0.0);
        REQUIRE(d.values(x, y) <= 16.0);
      }
  }
  SECTION("temperature must be positive") {
    CostVolume vol;
    vol.data = Tensor3(2, 1, 1);
    REQUIRE_THROWS_AS(soft_argmin(vol, 0.0), Error);
  }
}

TEST_CASE("huber disparity loss") {
  DisparityMap pred(1, 1), target(1, 1);
  SECTION("zero residual") {
    pred.set(0, 0, 4.0);
    target.set(0, 0, 4.0);
    REQUIRE(huber_disparity_loss(pred, target, 1.0) == 0.0);
  }
  SECTION("quadratic branch") {
    pred.set(0, 0, 4.5);
    target.set(0, 0, 4.0);
    REQUIRE(huber_disparity_loss(pred, target, 1.0) == Approx(0.125).epsilon(1e-12));
  }
  SECTION("linear branch") {
    pred.set(0, 0, 7.0);
    target.set(0, 0, 4.0);
    REQUIRE(huber_disparity_loss(pred, target, 1.0) == Approx(2.5).epsilon(1e-12));
  }
  SECTION("empty target mask") {
    pred.set(0, 0, 1.0);
    REQUIRE_THROWS_AS(huber_disparity_loss(pred, target, 1.0), EmptyTarget);
  }
  SECTION("non-negative, zero only at zero residuals") {
    Rng rng(51);
    DisparityMap p(6, 4), t(6, 4);
    bool any_residual = false;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) {
        p.set(x, y, rng.uniform(0.0, 10.0));
        if (rng.uniform() < 0.7) {
          t.set(x, y, rng.uniform(0.0, 10.0));
          any_residual = any_residual || p.values(x, y) != t.values(x, y);
        }
      }
    const double loss = huber_disparity_loss(p, t, 1.0);
    REQUIRE(loss >= 0.0);
    REQUIRE((loss > 0.0) == any_residual);
  }
}

TEST_CASE("disparity downsampling") {
  SECTION("constant field stays constant") {
    DisparityMap full(16, 8, 8.0, true);
    const DisparityMap low = downsample_disparity(full, 4);
    REQUIRE(low.width() == 4);
    REQUIRE(low.height() == 2);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 4; ++x) REQUIRE(low.values(x, y) == 8.0);
  }
  SECTION("factor one is the identity") {
    DisparityMap full(4, 4, 3.0, true);
    const DisparityMap low = downsample_disparity(full, 1);
    REQUIRE(low.values == full.values);
  }
  SECTION("median rejects a gross outlier") {
    DisparityMap full(4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) full.set(x, y, 8.0);
    full.set(0, 0, 7.0);
    full.set(3, 3, 9.0);
    full.set(2, 1, 100.0);
    const DisparityMap low = downsample_disparity(full, 4);
    REQUIRE(low.values(0, 0) == 8.0);
  }
  SECTION("invalid pixels are ignored, empty blocks stay invalid") {
    DisparityMap full(8, 4);
    for (int y = 0; y < 4; ++y) full.set(4, y, 5.0);  // only right block has data
    const DisparityMap low = downsample_disparity(full, 4);
    REQUIRE(!low.is_valid(0, 0));
    REQUIRE(low.is_valid(1, 0));
    REQUIRE(low.values(1, 0) == 5.0);
  }
  SECTION("non-dividing factor is rejected") {
    DisparityMap full(10, 4);
    REQUIRE_THROWS_AS(downsample_disparity(full, 4), ShapeError);
  }
}

TEST_CASE("loss gradient") {
  SECTION("zero at an exact prediction") {
    CostVolume vol;
    vol.disparity_stride = 2;
    vol.data = Tensor3(5, 1, 1, 0.3);  // uniform -> prediction = 4
    DisparityMap target(1, 1);
    target.set(0, 0, 4.0);
    const Tensor3 grad = loss_gradient(vol, target, 1.0, 1.0);
    for (int i = 0; i < 5; ++i) REQUIRE(grad(i, 0, 0) == Approx(0.0).margin(1e-15));
  }
  SECTION("matches central finite differences") {
    Rng rng(91);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int slices = 5, h = 4, w = 4;
      CostVolume vol;
      vol.disparity_stride = 2;
      vol.data = Tensor3(slices, h, w);
      for (int i = 0; i < slices; ++i)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) vol.data(i, y, x) = rng.uniform(-1.0, 1.0);
      DisparityMap target(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (rng.uniform() < 0.85) target.set(x, y, rng.uniform(0.0, 8.0));
      const double temp = rng.uniform(0.3, 2.0);
      const double delta = 1.0;
      auto loss = [&](const CostVolume& v) {
        return huber_disparity_loss(soft_argmin(v, temp, {false, 1.2}), target, delta);
      };
      const Tensor3 grad = loss_gradient(vol, target, temp, delta);
      const double h_step = 1e-4;
      for (int i = 0; i < slices; ++i)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            CostVolume plus = vol, minus = vol;
            plus.data(i, y, x) += h_step;
            minus.data(i, y, x) -= h_step;
            const double fd = (loss(plus) - loss(minus)) / (2.0 * h_step);
            worst = std::max(worst, std::abs(fd - grad(i, y, x)));
          }
    }
    REQUIRE(worst < 1e-5);
  }
  SECTION("per-pixel gradient columns sum to zero") {
    Rng rng(92);
    CostVolume vol;
    vol.disparity_stride = 2;
    vol.data = Tensor3(6, 2, 3);
    for (int i = 0; i < 6; ++i)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) vol.data(i, y, x) = rng.uniform(-1.0, 1.0);
    // Include the uniform-weight case explicitly.
    for (int i = 0; i < 6; ++i) vol.data(i, 0, 0) = 0.4;
    DisparityMap target(3, 2, 2.0, true);
    const Tensor3 grad = loss_gradient(vol, target, 0.7, 1.0);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) {
        double sum = 0.0;
        for (int i = 0; i < 6; ++i) sum += grad(i, y, x);
        REQUIRE(sum == Approx(0.0).margin(1e-12));
      }
  }
}

TEST_CASE("occlusion mask from geometric disparity") {
  DisparityMap disp(12, 1);
  for (int x = 0; x < 12; ++x) disp.set(x, 0, 2.0);
  for (int x = 6; x <= 9; ++x) disp.values(x, 0) = 6.0;
  const ImageMask occ = occlusion_mask(disp);
  // Background pixels landing on right-image columns claimed by the closer
  // surface are occluded.
  for (int x = 2; x <= 5; ++x) REQUIRE(occ(x, 0) == 1);
  REQUIRE(occ(6, 0) == 0);
  REQUIRE(occ(10, 0) == 0);
}
