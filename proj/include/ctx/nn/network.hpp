#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ctx/nn/layers.hpp"

namespace ctx::nn {

// Ordered stack of named layers. A recorded forward keeps every
// intermediate activation so backward() can run and so Grad-CAM can read
// the gradient arriving at a named layer's output.
class Network {
public:
  void add(const std::string& name, std::unique_ptr<Layer> layer);

  bool has_layer(const std::string& name) const;
  std::vector<std::string> layer_names() const;

  // Inference only; nothing cached.
  Tensor forward(const Tensor& x);

  // Caches activations; train selects BatchNorm batch statistics.
  Tensor forward_recorded(const Tensor& x, bool train);

  // Full reverse pass from grad at the network output. Returns grad at the
  // network input. Parameter grads accumulate into Param::grad.
  Tensor backward(const Tensor& grad_out);

  // Reverse pass that stops once the gradient w.r.t. `layer_name`'s output
  // has been computed, returning it. No parameter grads are accumulated
  // past the stop point (they are accumulated for downstream layers, which
  // callers doing explanation-only passes simply ignore).
  Tensor backward_to_output_of(const std::string& layer_name,
                               const Tensor& grad_out);

  // Activation recorded for `layer_name`'s output by the last
  // forward_recorded.
  const Tensor& activation(const std::string& layer_name) const;

  std::vector<Param*> params();
  std::vector<Param*> buffers();

  void init(Rng& rng);
  void zero_grads();

  size_t layer_count() const { return layers_.size(); }

private:
  int index_of(const std::string& name) const; // -1 if absent

  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> acts_; // acts_[i] = output of layer i (recorded)
  bool recorded_ = false;
};

} // namespace ctx::nn
