#include "ctx/nn/network.hpp"

#include <sstream>

#include "ctx/core/error.hpp"

namespace ctx::nn {

std::string Tensor::shape_str() const {
  std::ostringstream ss;
  ss << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) ss << ',';
    ss << shape[i];
  }
  ss << ')';
  return ss.str();
}

void Network::add(const std::string& name, std::unique_ptr<Layer> layer) {
  if (index_of(name) >= 0) {
    throw CtxError(ErrorKind::training, "duplicate layer name: " + name);
  }
  names_.push_back(name);
  layers_.push_back(std::move(layer));
}

int Network::index_of(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool Network::has_layer(const std::string& name) const {
  return index_of(name) >= 0;
}

std::vector<std::string> Network::layer_names() const { return names_; }

Tensor Network::forward(const Tensor& x) {
  Tensor cur = x;
  for (auto& layer : layers_) {
    cur = layer->forward(cur, /*train=*/false);
  }
  recorded_ = false;
  return cur;
}

Tensor Network::forward_recorded(const Tensor& x, bool train) {
  acts_.clear();
  acts_.reserve(layers_.size());
  Tensor cur = x;
  for (auto& layer : layers_) {
    cur = layer->forward(cur, train);
    acts_.push_back(cur);
  }
  recorded_ = true;
  return cur;
}

Tensor Network::backward(const Tensor& grad_out) {
  if (!recorded_) {
    throw CtxError(ErrorKind::training,
                   "backward requires a recorded forward pass");
  }
  Tensor grad = grad_out;
  for (size_t i = layers_.size(); i-- > 0;) {
    grad = layers_[i]->backward(grad);
  }
  return grad;
}

Tensor Network::backward_to_output_of(const std::string& layer_name,
                                      const Tensor& grad_out) {
  if (!recorded_) {
    throw CtxError(ErrorKind::training,
                   "backward requires a recorded forward pass");
  }
  const int stop = index_of(layer_name);
  if (stop < 0) {
    std::string known;
    for (const auto& n : names_) known += (known.empty() ? "" : ", ") + n;
    throw CtxError(ErrorKind::evaluation,
                   "layer not found: " + layer_name + " (taps: " + known +
                       ")");
  }
  Tensor grad = grad_out;
  for (size_t i = layers_.size(); i-- > static_cast<size_t>(stop) + 1;) {
    grad = layers_[i]->backward(grad);
  }
  return grad; // gradient w.r.t. output of layers_[stop]
}

const Tensor& Network::activation(const std::string& layer_name) const {
  const int idx = index_of(layer_name);
  if (idx < 0 || !recorded_) {
    throw CtxError(ErrorKind::evaluation,
                   "no recorded activation for layer: " + layer_name);
  }
  return acts_[idx];
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_) {
    for (Param* p : layer->params()) out.push_back(p);
  }
  return out;
}

std::vector<Param*> Network::buffers() {
  std::vector<Param*> out;
  for (auto& layer : layers_) {
    for (Param* p : layer->buffers()) out.push_back(p);
  }
  return out;
}

void Network::init(Rng& rng) {
  for (auto& layer : layers_) layer->init(rng);
}

void Network::zero_grads() {
  for (Param* p : params()) p->grad.zero();
}

} // namespace ctx::nn
