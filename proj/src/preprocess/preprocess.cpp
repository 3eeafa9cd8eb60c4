#include "ctx/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "ctx/core/error.hpp"

namespace ctx {

namespace {

// cv::Mat header over one plane of an Image (no copy).
cv::Mat plane_view(Image& img, int c) {
  return cv::Mat(img.height, img.width, CV_32F,
                 img.data.data() + c * img.plane_size());
}

cv::Mat plane_view(const Image& img, int c) {
  return cv::Mat(img.height, img.width, CV_32F,
                 const_cast<float*>(img.data.data()) + c * img.plane_size());
}

Image resize_bilinear(const Image& src, int out_w, int out_h) {
  if (out_w == src.width && out_h == src.height) return src;
  Image dst(out_w, out_h, src.channels);
  for (int c = 0; c < src.channels; ++c) {
    cv::Mat s = plane_view(src, c);
    cv::Mat d = plane_view(dst, c);
    cv::resize(s, d, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
  }
  return dst;
}

void clamp01(Image& img) {
  for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

} // namespace

Image canvas_embed(const Image& image, const CanvasSpec& spec,
                   ContentRect* content) {
  if (image.empty()) {
    throw CtxError(ErrorKind::data, "canvas_embed: empty image");
  }
  const double s = std::min(static_cast<double>(spec.width) / image.width,
                            static_cast<double>(spec.height) / image.height);
  const int new_w =
      std::max(1, static_cast<int>(std::lround(image.width * s)));
  const int new_h =
      std::max(1, static_cast<int>(std::lround(image.height * s)));

  Image scaled = resize_bilinear(image, new_w, new_h);

  const int pad_left = (spec.width - new_w) / 2;
  const int pad_top = (spec.height - new_h) / 2;

  Image out(spec.width, spec.height, image.channels, spec.pad_value);
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < new_h; ++y) {
      const float* src_row = &scaled.at(c, y, 0);
      float* dst_row = &out.at(c, y + pad_top, pad_left);
      std::copy(src_row, src_row + new_w, dst_row);
    }
  }
  if (content) {
    *content = {pad_left, pad_top, new_w, new_h};
  }
  return out;
}

RgbImage replicate_channels(const GrayImage& image) {
  if (image.channels != 1) {
    throw CtxError(ErrorKind::data, "replicate_channels: expected 1 channel");
  }
  RgbImage out(image.width, image.height, 3);
  for (int c = 0; c < 3; ++c) {
    std::copy(image.data.begin(), image.data.end(),
              out.data.begin() + c * out.plane_size());
  }
  return out;
}

NormalizationStats imagenet_stats() {
  return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
}

Tensor3 normalize(const RgbImage& image, const NormalizationStats& stats) {
  if (image.channels != 3) {
    throw CtxError(ErrorKind::data, "normalize: expected 3 channels");
  }
  Tensor3 out(3, image.height, image.width);
  const size_t plane = image.plane_size();
  for (int c = 0; c < 3; ++c) {
    const double mean = stats.mean[c];
    const double inv_std = 1.0 / stats.std[c];
    for (size_t i = 0; i < plane; ++i) {
      out.data[c * plane + i] = (image.data[c * plane + i] - mean) * inv_std;
    }
  }
  return out;
}

RgbImage denormalize(const Tensor3& tensor, const NormalizationStats& stats) {
  RgbImage out(tensor.width, tensor.height, 3);
  const size_t plane = static_cast<size_t>(tensor.width) * tensor.height;
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < plane; ++i) {
      out.data[c * plane + i] = static_cast<float>(
          tensor.data[c * plane + i] * stats.std[c] + stats.mean[c]);
    }
  }
  return out;
}

void AugmentationConfig::validate() const {
  auto check_prob = [](double p, const char* name) {
    if (p < 0.0 || p > 1.0) {
      throw CtxError(ErrorKind::config,
                     std::string(name) + " must be in [0,1]");
    }
  };
  auto check_range = [](const std::array<double, 2>& r, const char* name) {
    if (r[0] > r[1]) {
      throw CtxError(ErrorKind::config,
                     std::string(name) + " low exceeds high");
    }
  };
  check_prob(blur_probability, "blur_probability");
  check_prob(hflip_probability, "hflip_probability");
  check_range(crop_scale_range, "crop_scale_range");
  check_range(blur_sigma_range, "blur_sigma_range");
  check_range(noise_std_range, "noise_std_range");
  check_range(contrast_factor_range, "contrast_factor_range");
  if (crop_scale_range[0] <= 0.0 || crop_scale_range[1] > 1.0) {
    throw CtxError(ErrorKind::config, "crop_scale_range must be in (0,1]");
  }
  if (brightness_delta < 0.0) {
    throw CtxError(ErrorKind::config, "brightness_delta must be >= 0");
  }
}

Image augment(const Image& image, const AugmentationConfig& cfg, Rng& rng) {
  if (!cfg.enabled) return image;
  cfg.validate();

  Image out = image;

  // Area crop, aspect ratio kept, then resize back.
  const double area = rng.uniform(cfg.crop_scale_range[0],
                                  cfg.crop_scale_range[1]);
  const double side = std::sqrt(area);
  const int crop_w =
      std::max(1, static_cast<int>(std::lround(image.width * side)));
  const int crop_h =
      std::max(1, static_cast<int>(std::lround(image.height * side)));
  if (crop_w < image.width || crop_h < image.height) {
    const int x0 = rng.uniform_int(0, image.width - crop_w);
    const int y0 = rng.uniform_int(0, image.height - crop_h);
    Image crop(crop_w, crop_h, image.channels);
    for (int c = 0; c < image.channels; ++c) {
      for (int y = 0; y < crop_h; ++y) {
        const float* src = &out.at(c, y + y0, x0);
        std::copy(src, src + crop_w, &crop.at(c, y, 0));
      }
    }
    out = resize_bilinear(crop, image.width, image.height);
  }

  if (rng.bernoulli(cfg.blur_probability)) {
    const double sigma =
        rng.uniform(cfg.blur_sigma_range[0], cfg.blur_sigma_range[1]);
    if (sigma > 0.0) {
      for (int c = 0; c < out.channels; ++c) {
        cv::Mat p(out.height, out.width, CV_32F,
                  out.data.data() + c * out.plane_size());
        cv::GaussianBlur(p, p, cv::Size(0, 0), sigma, sigma,
                         cv::BORDER_REFLECT);
      }
    }
  }

  const double noise_std =
      rng.uniform(cfg.noise_std_range[0], cfg.noise_std_range[1]);
  if (noise_std > 0.0) {
    // Same noise field on every channel: channels stay identical for
    // replicated grayscale inputs.
    const size_t plane = out.plane_size();
    std::vector<float> field(plane);
    for (float& v : field) {
      v = static_cast<float>(rng.normal(0.0, noise_std));
    }
    for (int c = 0; c < out.channels; ++c) {
      for (size_t i = 0; i < plane; ++i) out.data[c * plane + i] += field[i];
    }
  }

  const double brightness =
      rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
  for (float& v : out.data) v += static_cast<float>(brightness);

  const double contrast =
      rng.uniform(cfg.contrast_factor_range[0], cfg.contrast_factor_range[1]);
  double mean = 0.0;
  for (float v : out.data) mean += v;
  mean /= static_cast<double>(out.data.size());
  for (float& v : out.data) {
    v = static_cast<float>((v - mean) * contrast + mean);
  }

  if (rng.bernoulli(cfg.hflip_probability)) {
    for (int c = 0; c < out.channels; ++c) {
      for (int y = 0; y < out.height; ++y) {
        float* row = &out.at(c, y, 0);
        std::reverse(row, row + out.width);
      }
    }
  }

  clamp01(out);
  return out;
}

} // namespace ctx
