#include "ctx/explain/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <opencv2/imgproc.hpp>

#include "ctx/core/error.hpp"

namespace ctx {

SaliencyMap grad_cam(ClassifierModel& model, const Tensor3& input,
                     const std::string& target_layer) {
  nn::Tensor batch({1, input.channels, input.height, input.width});
  std::copy(input.data.begin(), input.data.end(), batch.data.begin());

  model.logits_recorded(batch, /*train=*/false);

  // d(logit)/d(activation) for the positive-class logit.
  nn::Tensor seed({1, 1});
  seed.data[0] = 1.0;
  nn::Tensor grad_feats = model.head().backward(seed);
  nn::Tensor grads =
      model.backbone().backward_to_output_of(target_layer, grad_feats);
  const nn::Tensor& acts = model.backbone().activation(target_layer);

  if (acts.shape.size() != 4 || acts.dim(2) < 1 || acts.dim(3) < 1) {
    throw CtxError(ErrorKind::evaluation,
                   "grad_cam: target layer has no spatial activation: " +
                       target_layer);
  }
  const int channels = acts.dim(1), gh = acts.dim(2), gw = acts.dim(3);
  const size_t plane = static_cast<size_t>(gh) * gw;

  SaliencyMap map;
  map.grid_height = gh;
  map.grid_width = gw;
  map.values.assign(plane, 0.0);

  for (int k = 0; k < channels; ++k) {
    const double* g = &grads.data[static_cast<size_t>(k) * plane];
    const double* a = &acts.data[static_cast<size_t>(k) * plane];
    double alpha = 0.0;
    for (size_t i = 0; i < plane; ++i) alpha += g[i];
    alpha /= static_cast<double>(plane);
    for (size_t i = 0; i < plane; ++i) map.values[i] += alpha * a[i];
  }
  for (double& v : map.values) v = std::max(v, 0.0);

  const double max_v = *std::max_element(map.values.begin(), map.values.end());
  if (max_v > 0.0) {
    const double min_v =
        *std::min_element(map.values.begin(), map.values.end());
    const double range = max_v - min_v;
    if (range > 0.0) {
      for (double& v : map.values) v = (v - min_v) / range;
    } else {
      for (double& v : map.values) v = 1.0;
    }
  }

  cv::Mat grid(gh, gw, CV_32F);
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) {
      grid.at<float>(y, x) = static_cast<float>(map.values[y * gw + x]);
    }
  }
  cv::Mat up;
  cv::resize(grid, up, cv::Size(input.width, input.height), 0, 0,
             cv::INTER_LINEAR);
  map.upsampled = GrayImage(input.width, input.height, 1);
  for (int y = 0; y < input.height; ++y) {
    for (int x = 0; x < input.width; ++x) {
      map.upsampled.at(0, y, x) =
          std::clamp(up.at<float>(y, x), 0.0f, 1.0f);
    }
  }
  return map;
}

RgbImage overlay(const SaliencyMap& map, const RgbImage& image, double alpha) {
  if (map.upsampled.width != image.width ||
      map.upsampled.height != image.height) {
    throw CtxError(ErrorKind::evaluation,
                   "overlay: map " + std::to_string(map.upsampled.width) +
                       "x" + std::to_string(map.upsampled.height) +
                       " vs image " + std::to_string(image.width) + "x" +
                       std::to_string(image.height));
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw CtxError(ErrorKind::evaluation, "overlay: alpha outside [0,1]");
  }

  // Perceptually uniform heat colors via the inferno colormap.
  cv::Mat gray8(image.height, image.width, CV_8U);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      gray8.at<uint8_t>(y, x) = static_cast<uint8_t>(
          std::lround(std::clamp(map.upsampled.at(0, y, x), 0.0f, 1.0f) *
                      255.0));
    }
  }
  cv::Mat heat_bgr;
  cv::applyColorMap(gray8, heat_bgr, cv::COLORMAP_INFERNO);

  RgbImage out(image.width, image.height, 3);
  const double a = alpha;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const cv::Vec3b& bgr = heat_bgr.at<cv::Vec3b>(y, x);
      const double heat[3] = {bgr[2] / 255.0, bgr[1] / 255.0, bgr[0] / 255.0};
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - a) * image.at(c, y, x) + a * heat[c];
        out.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

void write_map_csv(const SaliencyMap& map, const std::string& path,
                   const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CtxError(ErrorKind::io, "cannot write saliency map: " + path);
  }
  out << "# config " << config_hash << "\n";
  char buf[32];
  for (int y = 0; y < map.grid_height; ++y) {
    for (int x = 0; x < map.grid_width; ++x) {
      std::snprintf(buf, sizeof(buf), "%.9g", map.values[y * map.grid_width + x]);
      out << buf << (x + 1 == map.grid_width ? "\n" : ",");
    }
  }
}

} // namespace ctx
