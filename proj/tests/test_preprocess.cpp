#include <doctest.h>

#include <cmath>

#include "ctx/core/error.hpp"
#include "ctx/modelzoo/registry.hpp"
#include "ctx/preprocess/preprocess.hpp"
#include "test_util.hpp"

using namespace ctx;

namespace {

GrayImage constant_image(int w, int h, float v) {
  GrayImage img(w, h, 1, v);
  return img;
}

GrayImage ramp_image(int w, int h) {
  GrayImage img(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(0, y, x) =
          static_cast<float>((y * w + x) % 256) / 255.0f;
    }
  }
  return img;
}

AugmentationConfig geometry_only_config() {
  AugmentationConfig cfg;
  cfg.crop_scale_range = {1.0, 1.0};
  cfg.blur_probability = 0.0;
  cfg.noise_std_range = {0.0, 0.0};
  cfg.brightness_delta = 0.0;
  cfg.contrast_factor_range = {1.0, 1.0};
  cfg.hflip_probability = 0.5;
  return cfg;
}

} // namespace

TEST_CASE("canvas_embed: exact-fit input is returned unchanged") {
  GrayImage img = ramp_image(349, 253);
  CanvasSpec spec{349, 253, 0.0f};
  ContentRect content;
  GrayImage out = canvas_embed(img, spec, &content);
  CHECK(out.width == 349);
  CHECK(out.height == 253);
  CHECK(content.x == 0);
  CHECK(content.y == 0);
  CHECK(content.width == 349);
  CHECK(content.height == 253);
  CHECK(out.data == img.data);
}

TEST_CASE("canvas_embed: 100x100 square into 349x253") {
  GrayImage img = constant_image(100, 100, 0.5f);
  CanvasSpec spec{349, 253, 0.0f};
  ContentRect content;
  GrayImage out = canvas_embed(img, spec, &content);
  // s = min(3.49, 2.53) = 2.53 -> 253x253 content, pads 48/48, 0 vertical.
  CHECK(content.width == 253);
  CHECK(content.height == 253);
  CHECK(content.x == 48);
  CHECK(content.y == 0);
}

TEST_CASE("canvas_embed: 512x416 into 349x253") {
  GrayImage img = constant_image(512, 416, 1.0f);
  CanvasSpec spec{349, 253, 0.0f};
  ContentRect content;
  GrayImage out = canvas_embed(img, spec, &content);
  // s ~ 0.6082 -> 311x253, pads 19 left.
  CHECK(content.width == 311);
  CHECK(content.height == 253);
  CHECK(content.x == 19);
  CHECK(content.y == 0);
}

TEST_CASE("canvas_embed: pad pixels equal pad value exactly") {
  GrayImage img = constant_image(10, 100, 0.75f);
  CanvasSpec spec{64, 64, 0.25f};
  ContentRect content;
  GrayImage out = canvas_embed(img, spec, &content);
  CHECK(out.width == 64);
  CHECK(out.height == 64);
  int pad_pixels = 0;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const bool inside = x >= content.x && x < content.x + content.width &&
                          y >= content.y && y < content.y + content.height;
      if (!inside) {
        CHECK(out.at(0, y, x) == 0.25f);
        ++pad_pixels;
      }
    }
  }
  CHECK(pad_pixels ==
        out.width * out.height - content.width * content.height);
}

TEST_CASE("canvas_embed property: dims, pads and aspect over random sizes") {
  std::mt19937 engine(7);
  std::uniform_int_distribution<int> dim(1, 800);
  const auto& registry = model_registry();
  for (int trial = 0; trial < 60; ++trial) {
    const int w = dim(engine), h = dim(engine);
    GrayImage img = constant_image(w, h, 0.6f);
    const auto& spec = registry[trial % registry.size()].custom_input;
    ContentRect content;
    GrayImage out = canvas_embed(img, spec, &content);
    REQUIRE(out.width == spec.width);
    REQUIRE(out.height == spec.height);
    REQUIRE(content.width >= 1);
    REQUIRE(content.height >= 1);
    // Aspect preserved within rounding.
    const double in_aspect = static_cast<double>(w) / h;
    const double content_aspect =
        static_cast<double>(content.width) / content.height;
    const double tol =
        2.0 / std::min(content.width, content.height);
    if (content.width > 2 && content.height > 2) {
      CHECK(std::abs(content_aspect - in_aspect) <=
            tol * std::max(1.0, in_aspect));
    }
  }
}

TEST_CASE("canvas_embed handles 1x1 input") {
  GrayImage img = constant_image(1, 1, 1.0f);
  CanvasSpec spec{349, 253, 0.0f};
  GrayImage out = canvas_embed(img, spec);
  CHECK(out.width == 349);
  CHECK(out.height == 253);
}

TEST_CASE("replicate_channels copies the plane three times") {
  GrayImage img = ramp_image(7, 5);
  img.at(0, 2, 3) = 0.7f;
  RgbImage rgb = replicate_channels(img);
  CHECK(rgb.channels == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(rgb.at(c, 2, 3) == 0.7f);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 7; ++x) {
        CHECK(rgb.at(c, y, x) == img.at(0, y, x));
      }
    }
  }

  GrayImage zeros = constant_image(3, 3, 0.0f);
  RgbImage z = replicate_channels(zeros);
  for (float v : z.data) CHECK(v == 0.0f);
}

TEST_CASE("normalize centers means and matches hand arithmetic") {
  NormalizationStats stats = imagenet_stats();
  RgbImage img(2, 2, 3);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 4; ++i) {
      img.data[c * 4 + i] = static_cast<float>(stats.mean[c]);
    }
  }
  Tensor3 t = normalize(img, stats);
  for (double v : t.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));

  RgbImage ones(1, 1, 3, 1.0f);
  Tensor3 t2 = normalize(ones, stats);
  CHECK(t2.at(0, 0, 0) == doctest::Approx((1.0 - 0.485) / 0.229).epsilon(1e-6));
  CHECK(t2.at(0, 0, 0) == doctest::Approx(2.2489).epsilon(1e-4));
}

TEST_CASE("normalize then denormalize is identity to 1e-6") {
  NormalizationStats stats = imagenet_stats();
  GrayImage gray = ramp_image(13, 9);
  RgbImage img = replicate_channels(gray);
  RgbImage back = denormalize(normalize(img, stats), stats);
  REQUIRE(back.data.size() == img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("augment disabled is the identity") {
  AugmentationConfig cfg;
  cfg.enabled = false;
  Rng rng(1);
  RgbImage img = replicate_channels(ramp_image(20, 15));
  RgbImage out = augment(img, cfg, rng);
  CHECK(out.data == img.data);
}

TEST_CASE("augment with a fixed seed is reproducible bit-for-bit") {
  AugmentationConfig cfg;
  RgbImage img = replicate_channels(ramp_image(24, 18));
  Rng rng1(99), rng2(99);
  RgbImage a = augment(img, cfg, rng1);
  RgbImage b = augment(img, cfg, rng2);
  CHECK(a.data == b.data);
}

TEST_CASE("augment blur fires with the configured probability") {
  AugmentationConfig cfg;
  cfg.crop_scale_range = {1.0, 1.0};
  cfg.noise_std_range = {0.0, 0.0};
  cfg.brightness_delta = 0.0;
  cfg.contrast_factor_range = {1.0, 1.0};
  cfg.hflip_probability = 0.0;
  cfg.blur_probability = 0.25;

  // One-hot image: any blur spreads mass off the hot pixel.
  GrayImage img(9, 9, 1, 0.0f);
  img.at(0, 4, 4) = 1.0f;

  int blurred = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    Rng rng(1000 + i);
    GrayImage out = augment(img, cfg, rng);
    if (out.at(0, 4, 4) < 0.999f) ++blurred;
  }
  // Binomial(10000, 0.25): 3 sigma ~ 130.
  CHECK(blurred > 2350);
  CHECK(blurred < 2650);
}

TEST_CASE("augment never rotates: one-hot maps to itself or its mirror") {
  AugmentationConfig cfg = geometry_only_config();
  GrayImage img(11, 7, 1, 0.0f);
  img.at(0, 2, 3) = 1.0f;

  GrayImage mirrored(11, 7, 1, 0.0f);
  mirrored.at(0, 2, 11 - 1 - 3) = 1.0f;

  for (int i = 0; i < 200; ++i) {
    Rng rng(i);
    GrayImage out = augment(img, cfg, rng);
    const bool is_identity = out.data == img.data;
    const bool is_mirror = out.data == mirrored.data;
    CHECK((is_identity || is_mirror));
  }
}

TEST_CASE("augment output stays in [0,1]") {
  AugmentationConfig cfg;
  cfg.noise_std_range = {0.2, 0.4};
  cfg.brightness_delta = 0.5;
  RgbImage img = replicate_channels(ramp_image(16, 16));
  for (int i = 0; i < 50; ++i) {
    Rng rng(i);
    RgbImage out = augment(img, cfg, rng);
    for (float v : out.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("augmentation config validation rejects bad ranges") {
  AugmentationConfig cfg;
  cfg.blur_probability = 1.5;
  CHECK_THROWS_AS(cfg.validate(), CtxError);
  cfg = AugmentationConfig{};
  cfg.crop_scale_range = {0.9, 0.5};
  CHECK_THROWS_AS(cfg.validate(), CtxError);
}

TEST_CASE("preprocess error paths") {
  CHECK_THROWS_AS(canvas_embed(GrayImage{}, CanvasSpec{8, 8, 0.0f}),
                  CtxError);
  GrayImage gray = constant_image(4, 4, 0.5f);
  CHECK_THROWS_AS(normalize(gray, imagenet_stats()), CtxError);
  RgbImage rgb = replicate_channels(gray);
  CHECK_THROWS_AS(replicate_channels(rgb), CtxError);
}
