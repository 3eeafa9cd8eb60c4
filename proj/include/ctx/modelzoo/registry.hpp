#pragma once

#include <string>
#include <vector>

#include "ctx/preprocess/preprocess.hpp"

namespace ctx {

// One architecture entry: input geometry, penultimate feature width, and
// descriptive metadata for the published network it stands for.
struct ModelSpec {
  std::string name;
  CanvasSpec default_input;  // square size the architecture was designed for
  CanvasSpec custom_input;   // the size used by this pipeline
  int feature_dim = 0;       // penultimate (pooled) feature width
  double param_count_m = 0;  // published trainable parameters, millions
  int layer_count = 0;       // published depth
  std::string gradcam_layer; // last conv feature producer in the backbone
};

// All registry entries, fixed order.
const std::vector<ModelSpec>& model_registry();

// Case-insensitive lookup; throws CtxError(config) listing valid names.
const ModelSpec& registry_lookup(const std::string& name);

// Entry with the smallest published parameter count.
const ModelSpec& smallest_registry_entry();

} // namespace ctx
