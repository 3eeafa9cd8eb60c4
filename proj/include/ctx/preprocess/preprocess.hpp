#pragma once

#include <array>

#include "ctx/core/image.hpp"
#include "ctx/core/rng.hpp"

namespace ctx {

// Fixed-size canvas an input is embedded into without changing its aspect
// ratio; leftover area takes pad_value.
struct CanvasSpec {
  int width = 0;
  int height = 0;
  float pad_value = 0.0f;
};

// Content rectangle produced by canvas_embed (pads are everything outside).
struct ContentRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

// Uniformly rescales by s = min(spec.w/w, spec.h/h) with bilinear
// interpolation (nearest-integer output dims, minimum 1), centers the result
// on the canvas, extra pad pixel going right/bottom. Works on 1- or
// 3-channel images.
Image canvas_embed(const Image& image, const CanvasSpec& spec,
                   ContentRect* content = nullptr);

// 1 channel -> 3 identical channels.
RgbImage replicate_channels(const GrayImage& image);

struct NormalizationStats {
  std::array<double, 3> mean;
  std::array<double, 3> std;
};

// Standard ImageNet channel statistics.
NormalizationStats imagenet_stats();

// out[c] = (in[c] - mean[c]) / std[c], layout CHW.
Tensor3 normalize(const RgbImage& image, const NormalizationStats& stats);
RgbImage denormalize(const Tensor3& tensor, const NormalizationStats& stats);

// Training-time augmentation. Rotation and shear are intentionally
// unrepresentable: the only geometric ops are axis-aligned crop/resize and
// horizontal flip.
struct AugmentationConfig {
  bool enabled = true;
  std::array<double, 2> crop_scale_range = {0.8, 1.0}; // area fractions
  double blur_probability = 0.25;
  std::array<double, 2> blur_sigma_range = {0.5, 1.5};
  std::array<double, 2> noise_std_range = {0.0, 0.05};
  double brightness_delta = 0.1;
  std::array<double, 2> contrast_factor_range = {0.8, 1.2};
  double hflip_probability = 0.5;

  void validate() const; // throws CtxError(config) on bad ranges
};

// Applies, in order: area crop + resize back, blur (with probability),
// additive Gaussian noise, brightness shift, contrast scale around the image
// mean, horizontal flip. Output clamped to [0,1]. Identity when disabled.
Image augment(const Image& image, const AugmentationConfig& cfg, Rng& rng);

} // namespace ctx
