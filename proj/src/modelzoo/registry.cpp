#include "ctx/modelzoo/registry.hpp"

#include <algorithm>
#include <cctype>

#include "ctx/core/error.hpp"

namespace ctx {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

CanvasSpec canvas(int w, int h) { return {w, h, 0.0f}; }

std::vector<ModelSpec> make_registry() {
  // Input sizes, parameter counts and depths follow the published
  // characteristics of each architecture; feature_dim is the width of the
  // pooled penultimate activation in the published definition.
  const std::string tap = "features.relu";
  return {
      {"SqueezeNet", canvas(227, 227), canvas(335, 255), 512, 0.73, 18, tap},
      {"ShuffleNet", canvas(224, 224), canvas(321, 225), 1024, 0.34, 51, tap},
      {"ResNet18", canvas(224, 224), canvas(349, 253), 512, 11.17, 18, tap},
      {"ResNet50", canvas(224, 224), canvas(349, 253), 2048, 23.51, 50, tap},
      {"ResNet101", canvas(224, 224), canvas(349, 253), 2048, 42.50, 101,
       tap},
      {"ResNeXt50", canvas(224, 224), canvas(349, 253), 2048, 22.98, 50, tap},
      {"ResNeXt101", canvas(224, 224), canvas(349, 253), 2048, 86.74, 101,
       tap},
      {"InceptionV3", canvas(299, 299), canvas(331, 267), 2048, 21.79, 48,
       tap},
      {"Xception", canvas(299, 299), canvas(327, 231), 2048, 20.81, 37, tap},
      {"DenseNet121", canvas(224, 224), canvas(349, 253), 1024, 6.95, 121,
       tap},
      {"DenseNet169", canvas(224, 224), canvas(349, 253), 1664, 12.48, 169,
       tap},
      {"DenseNet201", canvas(224, 224), canvas(349, 253), 1920, 18.09, 201,
       tap},
  };
}

} // namespace

const std::vector<ModelSpec>& model_registry() {
  static const std::vector<ModelSpec> registry = make_registry();
  return registry;
}

const ModelSpec& registry_lookup(const std::string& name) {
  const std::string key = lower(name);
  for (const auto& spec : model_registry()) {
    if (lower(spec.name) == key) return spec;
  }
  std::string valid;
  for (const auto& spec : model_registry()) {
    valid += (valid.empty() ? "" : ", ") + spec.name;
  }
  throw CtxError(ErrorKind::config,
                 "unknown architecture: " + name + " (valid: " + valid + ")");
}

const ModelSpec& smallest_registry_entry() {
  const auto& reg = model_registry();
  const ModelSpec* best = &reg.front();
  for (const auto& spec : reg) {
    if (spec.param_count_m < best->param_count_m) best = &spec;
  }
  return *best;
}

} // namespace ctx
