#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ctx/core/rng.hpp"
#include "ctx/nn/tensor.hpp"

namespace ctx::nn {

class Layer {
public:
  virtual ~Layer() = default;

  // train=true caches whatever backward needs and switches BatchNorm to
  // batch statistics. Recording for Grad-CAM uses train=false together with
  // Network::forward_recorded.
  virtual Tensor forward(const Tensor& x, bool train) = 0;

  // Gradient w.r.t. this layer's input; accumulates parameter grads.
  // Valid after a recorded forward.
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<Param*> params() { return {}; }

  // Non-trainable state that still belongs in a checkpoint (BN running
  // stats).
  virtual std::vector<Param*> buffers() { return {}; }

  virtual void init(Rng& /*rng*/) {}
};

class Conv2d : public Layer {
public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride,
         int pad);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  void init(Rng& rng) override;

private:
  int in_ch_, out_ch_, kernel_, stride_, pad_;
  Param weight_; // (out, in, k, k)
  Param bias_;   // (out)
  Tensor input_;
  std::vector<double> col_; // im2col scratch, reused by backward
};

class BatchNorm2d : public Layer {
public:
  BatchNorm2d(std::string name, int channels, double eps = 1e-5,
              double momentum = 0.1);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param*> buffers() override {
    return {&running_mean_, &running_var_, &batches_tracked_};
  }
  void init(Rng& rng) override;

private:
  int channels_;
  double eps_, momentum_;
  bool last_train_ = false;
  Param gamma_, beta_;
  // Running stats warm-start from the first batch (batches_tracked_ == 0),
  // then follow the usual exponential moving average.
  Param running_mean_, running_var_, batches_tracked_;
  Tensor xhat_;                     // cached normalized input
  std::vector<double> batch_mean_, batch_inv_std_;
};

class ReLU : public Layer {
public:
  explicit ReLU(std::string name) : name_(std::move(name)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

private:
  std::string name_;
  std::vector<char> mask_;
};

class MaxPool2d : public Layer {
public:
  MaxPool2d(std::string name, int kernel, int stride, int pad);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

private:
  int kernel_, stride_, pad_;
  std::vector<int> in_shape_;
  std::vector<size_t> argmax_;
};

// (N,C,H,W) -> (N,C)
class GlobalAvgPool : public Layer {
public:
  explicit GlobalAvgPool(const std::string&) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;

private:
  std::vector<int> in_shape_;
};

class Linear : public Layer {
public:
  Linear(std::string name, int in_features, int out_features);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  void init(Rng& rng) override;

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

private:
  int in_features_, out_features_;
  Param weight_; // (out, in)
  Param bias_;   // (out)
  Tensor input_;
};

} // namespace ctx::nn
