#include "ctx/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ctx/core/error.hpp"

namespace ctx::nn {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

namespace {

int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

void require_rank4(const Tensor& x, const char* who) {
  if (x.shape.size() != 4) {
    throw CtxError(ErrorKind::training,
                   std::string(who) + ": expected NCHW input, got rank " +
                       std::to_string(x.shape.size()));
  }
}

} // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel,
               int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride),
      pad_(pad), weight_(name + ".weight", {out_ch, in_ch, kernel, kernel}),
      bias_(name + ".bias", {out_ch}) {}

void Conv2d::init(Rng& rng) {
  // He-normal, fan_in = in_ch * k * k.
  const double stddev =
      std::sqrt(2.0 / (static_cast<double>(in_ch_) * kernel_ * kernel_));
  for (double& v : weight_.value.data) v = rng.normal(0.0, stddev);
  weight_.grad.zero();
  bias_.value.zero();
  bias_.grad.zero();
}

Tensor Conv2d::forward(const Tensor& x, bool /*train*/) {
  require_rank4(x, "Conv2d");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  if (x.dim(1) != in_ch_) {
    throw CtxError(ErrorKind::training,
                   weight_.name + ": channel mismatch, expected " +
                       std::to_string(in_ch_) + " got " +
                       std::to_string(x.dim(1)));
  }
  const int oh = conv_out_dim(h, kernel_, stride_, pad_);
  const int ow = conv_out_dim(w, kernel_, stride_, pad_);
  const int k_rows = in_ch_ * kernel_ * kernel_;
  const int spatial = oh * ow;

  input_ = x;
  Tensor out({n, out_ch_, oh, ow});
  col_.assign(static_cast<size_t>(k_rows) * spatial, 0.0);

  ConstMapMat wmat(weight_.value.data.data(), out_ch_, k_rows);
  for (int s = 0; s < n; ++s) {
    const double* src = &x.data[static_cast<size_t>(s) * in_ch_ * h * w];
    // im2col
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const int row = (c * kernel_ + ky) * kernel_ + kx;
          double* dst = &col_[static_cast<size_t>(row) * spatial];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              std::fill(dst + oy * ow, dst + (oy + 1) * ow, 0.0);
              continue;
            }
            const double* in_row = src + (static_cast<size_t>(c) * h + iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              dst[oy * ow + ox] = (ix >= 0 && ix < w) ? in_row[ix] : 0.0;
            }
          }
        }
      }
    }
    ConstMapMat cmat(col_.data(), k_rows, spatial);
    MapMat omat(&out.data[static_cast<size_t>(s) * out_ch_ * spatial],
                out_ch_, spatial);
    omat.noalias() = wmat * cmat;
    for (int oc = 0; oc < out_ch_; ++oc) {
      omat.row(oc).array() += bias_.value.data[oc];
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const int oh = grad_out.dim(2), ow = grad_out.dim(3);
  const int k_rows = in_ch_ * kernel_ * kernel_;
  const int spatial = oh * ow;

  Tensor grad_in(input_.shape);
  MapMat dwmat(weight_.grad.data.data(), out_ch_, k_rows);
  ConstMapMat wmat(weight_.value.data.data(), out_ch_, k_rows);
  std::vector<double> dcol(static_cast<size_t>(k_rows) * spatial);

  for (int s = 0; s < n; ++s) {
    // Rebuild this sample's im2col (cheaper than caching it for the batch).
    const double* src = &input_.data[static_cast<size_t>(s) * in_ch_ * h * w];
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const int row = (c * kernel_ + ky) * kernel_ + kx;
          double* dst = &col_[static_cast<size_t>(row) * spatial];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              std::fill(dst + oy * ow, dst + (oy + 1) * ow, 0.0);
              continue;
            }
            const double* in_row = src + (static_cast<size_t>(c) * h + iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              dst[oy * ow + ox] = (ix >= 0 && ix < w) ? in_row[ix] : 0.0;
            }
          }
        }
      }
    }
    ConstMapMat cmat(col_.data(), k_rows, spatial);
    ConstMapMat gmat(&grad_out.data[static_cast<size_t>(s) * out_ch_ * spatial],
                     out_ch_, spatial);
    dwmat.noalias() += gmat * cmat.transpose();
    for (int oc = 0; oc < out_ch_; ++oc) {
      bias_.grad.data[oc] += gmat.row(oc).sum();
    }
    MapMat dcmat(dcol.data(), k_rows, spatial);
    dcmat.noalias() = wmat.transpose() * gmat;

    // col2im scatter-add
    double* dx = &grad_in.data[static_cast<size_t>(s) * in_ch_ * h * w];
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const int row = (c * kernel_ + ky) * kernel_ + kx;
          const double* g = &dcol[static_cast<size_t>(row) * spatial];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            double* dx_row = dx + (static_cast<size_t>(c) * h + iy) * w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) dx_row[ix] += g[oy * ow + ox];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double eps,
                         double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum),
      gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
      running_mean_(name + ".running_mean", {channels}),
      running_var_(name + ".running_var", {channels}),
      batches_tracked_(name + ".batches_tracked", {1}) {
  std::fill(gamma_.value.data.begin(), gamma_.value.data.end(), 1.0);
  std::fill(running_var_.value.data.begin(), running_var_.value.data.end(),
            1.0);
}

void BatchNorm2d::init(Rng&) {
  std::fill(gamma_.value.data.begin(), gamma_.value.data.end(), 1.0);
  beta_.value.zero();
  running_mean_.value.zero();
  std::fill(running_var_.value.data.begin(), running_var_.value.data.end(),
            1.0);
  batches_tracked_.value.zero();
  gamma_.grad.zero();
  beta_.grad.zero();
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  require_rank4(x, "BatchNorm2d");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t plane = static_cast<size_t>(h) * w;
  const double count = static_cast<double>(n) * plane;

  last_train_ = train;
  batch_mean_.assign(c, 0.0);
  batch_inv_std_.assign(c, 0.0);
  const bool first_batch = train && batches_tracked_.value.data[0] == 0.0;
  if (train) batches_tracked_.value.data[0] += 1.0;

  Tensor out(x.shape);
  xhat_ = Tensor(x.shape);

  for (int ch = 0; ch < c; ++ch) {
    double mean, var;
    if (train) {
      double sum = 0.0, sq = 0.0;
      for (int s = 0; s < n; ++s) {
        const double* p =
            &x.data[(static_cast<size_t>(s) * c + ch) * plane];
        for (size_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      mean = sum / count;
      var = std::max(0.0, sq / count - mean * mean);
      // Unbiased variance feeds the running estimate.
      const double unbiased =
          count > 1.0 ? var * count / (count - 1.0) : var;
      const double blend = first_batch ? 1.0 : momentum_;
      running_mean_.value.data[ch] =
          (1.0 - blend) * running_mean_.value.data[ch] + blend * mean;
      running_var_.value.data[ch] =
          (1.0 - blend) * running_var_.value.data[ch] + blend * unbiased;
    } else {
      mean = running_mean_.value.data[ch];
      var = running_var_.value.data[ch];
    }
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    batch_mean_[ch] = mean;
    batch_inv_std_[ch] = inv_std;
    const double g = gamma_.value.data[ch];
    const double b = beta_.value.data[ch];
    for (int s = 0; s < n; ++s) {
      const size_t base = (static_cast<size_t>(s) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) {
        const double xh = (x.data[base + i] - mean) * inv_std;
        xhat_.data[base + i] = xh;
        out.data[base + i] = g * xh + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const int n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2),
            w = grad_out.dim(3);
  const size_t plane = static_cast<size_t>(h) * w;
  const double count = static_cast<double>(n) * plane;

  Tensor grad_in(grad_out.shape);
  for (int ch = 0; ch < c; ++ch) {
    const double g = gamma_.value.data[ch];
    const double inv_std = batch_inv_std_[ch];

    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int s = 0; s < n; ++s) {
      const size_t base = (static_cast<size_t>(s) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) {
        sum_dy += grad_out.data[base + i];
        sum_dy_xhat += grad_out.data[base + i] * xhat_.data[base + i];
      }
    }
    gamma_.grad.data[ch] += sum_dy_xhat;
    beta_.grad.data[ch] += sum_dy;

    if (last_train_) {
      for (int s = 0; s < n; ++s) {
        const size_t base = (static_cast<size_t>(s) * c + ch) * plane;
        for (size_t i = 0; i < plane; ++i) {
          const double dy = grad_out.data[base + i];
          grad_in.data[base + i] =
              g * inv_std *
              (dy - sum_dy / count - xhat_.data[base + i] * sum_dy_xhat / count);
        }
      }
    } else {
      // Running statistics are constants in eval mode.
      for (int s = 0; s < n; ++s) {
        const size_t base = (static_cast<size_t>(s) * c + ch) * plane;
        for (size_t i = 0; i < plane; ++i) {
          grad_in.data[base + i] = g * inv_std * grad_out.data[base + i];
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
  Tensor out = x;
  mask_.assign(x.numel(), 0);
  for (size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] > 0.0) {
      mask_[i] = 1;
    } else {
      out.data[i] = 0.0;
    }
  }
  return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  for (size_t i = 0; i < grad_in.data.size(); ++i) {
    if (!mask_[i]) grad_in.data[i] = 0.0;
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(std::string, int kernel, int stride, int pad)
    : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  require_rank4(x, "MaxPool2d");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_dim(h, kernel_, stride_, pad_);
  const int ow = conv_out_dim(w, kernel_, stride_, pad_);
  in_shape_ = x.shape;

  Tensor out({n, c, oh, ow});
  argmax_.assign(out.numel(), 0);
  size_t oi = 0;
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const double* src =
          &x.data[(static_cast<size_t>(s) * c + ch) * h * w];
      const size_t src_off = (static_cast<size_t>(s) * c + ch) * h * w;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          size_t best_idx = 0;
          bool found = false;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= w) continue;
              const double v = src[static_cast<size_t>(iy) * w + ix];
              if (!found || v > best) {
                best = v;
                best_idx = src_off + static_cast<size_t>(iy) * w + ix;
                found = true;
              }
            }
          }
          out.data[oi] = found ? best : 0.0;
          argmax_[oi] = found ? best_idx : SIZE_MAX;
        }
      }
    }
  }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  for (size_t i = 0; i < grad_out.data.size(); ++i) {
    if (argmax_[i] != SIZE_MAX) grad_in.data[argmax_[i]] += grad_out.data[i];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  require_rank4(x, "GlobalAvgPool");
  const int n = x.dim(0), c = x.dim(1);
  const size_t plane = static_cast<size_t>(x.dim(2)) * x.dim(3);
  in_shape_ = x.shape;

  Tensor out({n, c});
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const double* p = &x.data[(static_cast<size_t>(s) * c + ch) * plane];
      double sum = 0.0;
      for (size_t i = 0; i < plane; ++i) sum += p[i];
      out.at2(s, ch) = sum / static_cast<double>(plane);
    }
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  const int n = in_shape_[0], c = in_shape_[1];
  const size_t plane = static_cast<size_t>(in_shape_[2]) * in_shape_[3];
  const double inv = 1.0 / static_cast<double>(plane);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const double g = grad_out.at2(s, ch) * inv;
      double* p = &grad_in.data[(static_cast<size_t>(s) * c + ch) * plane];
      for (size_t i = 0; i < plane; ++i) p[i] = g;
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::string name, int in_features, int out_features)
    : in_features_(in_features), out_features_(out_features),
      weight_(name + ".weight", {out_features, in_features}),
      bias_(name + ".bias", {out_features}) {}

void Linear::init(Rng& rng) {
  const double stddev = std::sqrt(1.0 / in_features_);
  for (double& v : weight_.value.data) v = rng.normal(0.0, stddev);
  weight_.grad.zero();
  bias_.value.zero();
  bias_.grad.zero();
}

Tensor Linear::forward(const Tensor& x, bool) {
  if (x.shape.size() != 2 || x.dim(1) != in_features_) {
    throw CtxError(ErrorKind::training,
                   weight_.name + ": expected (N," +
                       std::to_string(in_features_) + ") input, got " +
                       x.shape_str());
  }
  input_ = x;
  const int n = x.dim(0);
  Tensor out({n, out_features_});
  ConstMapMat xm(x.data.data(), n, in_features_);
  ConstMapMat wm(weight_.value.data.data(), out_features_, in_features_);
  MapMat om(out.data.data(), n, out_features_);
  om.noalias() = xm * wm.transpose();
  for (int s = 0; s < n; ++s) {
    for (int o = 0; o < out_features_; ++o) {
      om(s, o) += bias_.value.data[o];
    }
  }
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int n = input_.dim(0);
  Tensor grad_in({n, in_features_});
  ConstMapMat gm(grad_out.data.data(), n, out_features_);
  ConstMapMat xm(input_.data.data(), n, in_features_);
  ConstMapMat wm(weight_.value.data.data(), out_features_, in_features_);
  MapMat dwm(weight_.grad.data.data(), out_features_, in_features_);
  MapMat dxm(grad_in.data.data(), n, in_features_);
  dwm.noalias() += gm.transpose() * xm;
  dxm.noalias() = gm * wm;
  for (int o = 0; o < out_features_; ++o) {
    bias_.grad.data[o] += gm.col(o).sum();
  }
  return grad_in;
}

} // namespace ctx::nn
