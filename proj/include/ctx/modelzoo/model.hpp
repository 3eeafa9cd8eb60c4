#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "ctx/modelzoo/registry.hpp"
#include "ctx/nn/network.hpp"

namespace ctx {

using FeatureMatrix = nn::Tensor; // (N, feature_dim)

// Backbone feature extractor plus a single-logit binary head. The backbone
// ends with a global average pool producing spec.feature_dim features; the
// head is a fresh affine map, so the whole stack is fine-tuned.
class ClassifierModel {
public:
  ClassifierModel(ModelSpec spec, std::unique_ptr<nn::Network> backbone,
                  std::unique_ptr<nn::Linear> head);

  const ModelSpec& spec() const { return spec_; }

  // (N,3,H,W) shaped to spec.custom_input -> (N,1) logits, eval mode.
  nn::Tensor logits(const nn::Tensor& batch);

  // Recorded pass for training (train=true) or explanation (train=false).
  nn::Tensor logits_recorded(const nn::Tensor& batch, bool train);

  // Backward from d(loss)/d(logits); call after logits_recorded.
  void backward(const nn::Tensor& grad_logits);

  // Penultimate activations (post-pooling, pre-head), eval mode, no
  // gradient bookkeeping. Throws on input shape mismatch.
  FeatureMatrix extract_features(const nn::Tensor& batch);

  nn::Network& backbone() { return *backbone_; }
  nn::Linear& head() { return *head_; }

  std::vector<nn::Param*> params();  // trainable: backbone + head
  std::vector<nn::Param*> buffers(); // BN running stats
  void zero_grads();

  // Name -> tensor snapshot of params + buffers (checkpoint payload).
  std::map<std::string, nn::Tensor> state() const;
  // strict=true requires exactly matching key sets (checkpoint restore);
  // strict=false loads backbone params/buffers only, ignoring head entries
  // (pretrained backbone initialization).
  void load_state(const std::map<std::string, nn::Tensor>& state,
                  bool strict);

  void check_input(const nn::Tensor& batch) const;

private:
  ModelSpec spec_;
  std::unique_ptr<nn::Network> backbone_;
  std::unique_ptr<nn::Linear> head_;
};

struct WeightCache; // see weights.hpp

// Builds the architecture from its registry spec. pretrained=false gives a
// seeded random initialization (deterministic per seed). pretrained=true
// additionally loads backbone weights through the cache, which must be able
// to resolve them (local hit or fetch).
std::unique_ptr<ClassifierModel> build_model(const ModelSpec& spec,
                                             bool pretrained, uint64_t seed,
                                             const WeightCache* cache = nullptr);

} // namespace ctx
