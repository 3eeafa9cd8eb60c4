#pragma once

#include <string>
#include <vector>

#include "ctx/core/image.hpp"
#include "ctx/modelzoo/model.hpp"

namespace ctx {

// Min-max-normalized localization map for the positive class: `values` at
// the target layer's spatial resolution, `upsampled` at canvas resolution.
struct SaliencyMap {
  int grid_height = 0;
  int grid_width = 0;
  std::vector<double> values;    // H' x W', in [0,1]
  GrayImage upsampled;           // canvas resolution, in [0,1]
  std::string target_class = "COVID";
};

// Weighted-activation rule: channel weights are the spatial means of the
// logit gradient at `target_layer`; the rectified weighted sum is min-max
// normalized (all-zero stays all-zero) and bilinearly upsampled.
SaliencyMap grad_cam(ClassifierModel& model, const Tensor3& input,
                     const std::string& target_layer);

// Heat-colormap blend: out = (1-alpha)*image + alpha*colormap(map).
RgbImage overlay(const SaliencyMap& map, const RgbImage& image, double alpha);

void write_map_csv(const SaliencyMap& map, const std::string& path,
                   const std::string& config_hash);

} // namespace ctx
