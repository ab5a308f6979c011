#include "fsf/layers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fsf {

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::ConvWeight: return "conv_weight";
    case ParamGroup::BnAffine: return "bn_affine";
    case ParamGroup::Classifier: return "classifier";
  }
  return "?";
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool bias, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias) {
  const int fan_in = in_ch * kernel * kernel;
  const double bound = std::sqrt(6.0 / fan_in);  // He-uniform
  std::uniform_real_distribution<double> dist(-bound, bound);
  weight_.group = ParamGroup::ConvWeight;
  weight_.value.resize(static_cast<Eigen::Index>(fan_in) * out_ch);
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value[i] = dist(rng);
  weight_.zero_grad();
  if (has_bias_) {
    bias_.group = ParamGroup::ConvWeight;
    bias_.value = Eigen::VectorXd::Zero(out_ch);
    bias_.zero_grad();
  }
}

void Conv2d::im2col(const Tensor4& x, int img, Eigen::MatrixXd& cols, int oh, int ow) const {
  // cols: (in*k*k) x (oh*ow)
  for (int c = 0; c < in_ch_; ++c) {
    const double* plane = x.plane(img, c);
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx) {
        const int row = (c * kernel_ + ky) * kernel_ + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride_ + ky - pad_;
          double* dst = cols.data() + row;  // column-major, stride cols.rows()
          if (iy < 0 || iy >= x.h) {
            for (int ox = 0; ox < ow; ++ox) cols(row, oy * ow + ox) = 0.0;
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * x.w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride_ + kx - pad_;
            cols(row, oy * ow + ox) = (ix < 0 || ix >= x.w) ? 0.0 : src[ix];
          }
          (void)dst;
        }
      }
    }
  }
}

Tensor4 Conv2d::forward(const Tensor4& x, bool /*train*/) {
  if (x.c != in_ch_) throw std::invalid_argument("Conv2d: channel mismatch");
  const int oh = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("Conv2d: input too small");
  input_ = x;
  Tensor4 out(x.n, out_ch_, oh, ow);

  const int ckk = in_ch_ * kernel_ * kernel_;
  Eigen::MatrixXd cols(ckk, oh * ow);
  Eigen::Map<const Eigen::MatrixXd> W(weight_.value.data(), ckk, out_ch_);
  for (int img = 0; img < x.n; ++img) {
    im2col(x, img, cols, oh, ow);
    Eigen::Map<Eigen::MatrixXd> O(out.plane(img, 0), oh * ow, 1);
    // out block for this image: (oh*ow) x out_ch laid out channel-major in the
    // tensor, i.e. channel c occupies a contiguous plane.
    Eigen::Map<Eigen::MatrixXd> Out(out.plane(img, 0), static_cast<Eigen::Index>(oh) * ow,
                                    out_ch_);
    Out.noalias() = cols.transpose() * W;
    if (has_bias_) Out.rowwise() += bias_.value.transpose();
    (void)O;
  }
  return out;
}

Tensor4 Conv2d::backward(const Tensor4& dy, bool need_input_grad) {
  const Tensor4& x = input_;
  const int oh = dy.h, ow = dy.w;
  const int ckk = in_ch_ * kernel_ * kernel_;
  Eigen::MatrixXd cols(ckk, oh * ow);
  Eigen::MatrixXd dcols(ckk, oh * ow);
  Eigen::Map<const Eigen::MatrixXd> W(weight_.value.data(), ckk, out_ch_);
  Eigen::Map<Eigen::MatrixXd> dW(weight_.grad.data(), ckk, out_ch_);

  Tensor4 dx;
  if (need_input_grad) dx = Tensor4(x.n, x.c, x.h, x.w);

  for (int img = 0; img < x.n; ++img) {
    Eigen::Map<const Eigen::MatrixXd> dOut(dy.plane(img, 0),
                                           static_cast<Eigen::Index>(oh) * ow, out_ch_);
    im2col(x, img, cols, oh, ow);
    dW.noalias() += cols * dOut;
    if (has_bias_) bias_.grad.noalias() += dOut.colwise().sum().transpose();
    if (!need_input_grad) continue;
    dcols.noalias() = W * dOut.transpose();
    // col2im accumulate
    for (int c = 0; c < in_ch_; ++c) {
      double* plane = dx.plane(img, c);
      for (int ky = 0; ky < kernel_; ++ky) {
        for (int kx = 0; kx < kernel_; ++kx) {
          const int row = (c * kernel_ + ky) * kernel_ + kx;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= x.h) continue;
            double* dst = plane + static_cast<std::size_t>(iy) * x.w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < x.w) dst[ix] += dcols(row, oy * ow + ox);
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  weight_.path = prefix + ".weight";
  out.push_back(&weight_);
  if (has_bias_) {
    bias_.path = prefix + ".bias";
    out.push_back(&bias_);
  }
}

std::unique_ptr<Layer> Conv2d::clone() const {
  auto c = std::make_unique<Conv2d>(*this);
  c->input_ = Tensor4();
  return c;
}

// ------------------------------------------------------------ BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels) : channels_(channels) {
  gamma_.group = ParamGroup::BnAffine;
  gamma_.value = Eigen::VectorXd::Ones(channels);
  gamma_.zero_grad();
  beta_.group = ParamGroup::BnAffine;
  beta_.value = Eigen::VectorXd::Zero(channels);
  beta_.zero_grad();
  running_mean_ = Eigen::VectorXd::Zero(channels);
  running_var_ = Eigen::VectorXd::Ones(channels);
}

Tensor4 BatchNorm2d::forward(const Tensor4& x, bool train) {
  if (x.c != channels_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  const double m = static_cast<double>(x.n) * hw;
  cached_train_ = train;
  inv_std_.resize(channels_);
  xhat_ = Tensor4(x.n, x.c, x.h, x.w);
  Tensor4 out(x.n, x.c, x.h, x.w);

  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (train) {
      double sum = 0, sq = 0;
      for (int img = 0; img < x.n; ++img) {
        const double* p = x.plane(img, c);
        for (std::size_t i = 0; i < hw; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      mean = sum / m;
      var = sq / m - mean * mean;
      if (var < 0) var = 0;
      if (update_running_stats_) {
        const double unbiased = (m > 1) ? var * m / (m - 1) : var;
        running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * unbiased;
      }
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    const double g = gamma_.value[c], b = beta_.value[c];
    for (int img = 0; img < x.n; ++img) {
      const double* p = x.plane(img, c);
      double* xh = xhat_.plane(img, c);
      double* o = out.plane(img, c);
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = (p[i] - mean) * inv;
        o[i] = g * xh[i] + b;
      }
    }
  }
  return out;
}

Tensor4 BatchNorm2d::backward(const Tensor4& dy, bool need_input_grad) {
  const std::size_t hw = static_cast<std::size_t>(dy.h) * dy.w;
  const double m = static_cast<double>(dy.n) * hw;
  Tensor4 dx;
  if (need_input_grad) dx = Tensor4(dy.n, dy.c, dy.h, dy.w);

  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int img = 0; img < dy.n; ++img) {
      const double* d = dy.plane(img, c);
      const double* xh = xhat_.plane(img, c);
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += d[i];
        sum_dy_xhat += d[i] * xh[i];
      }
    }
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    if (!need_input_grad) continue;
    const double g_inv = gamma_.value[c] * inv_std_[c];
    for (int img = 0; img < dy.n; ++img) {
      const double* d = dy.plane(img, c);
      const double* xh = xhat_.plane(img, c);
      double* o = dx.plane(img, c);
      if (cached_train_) {
        for (std::size_t i = 0; i < hw; ++i)
          o[i] = g_inv * (d[i] - sum_dy / m - xh[i] * sum_dy_xhat / m);
      } else {
        for (std::size_t i = 0; i < hw; ++i) o[i] = g_inv * d[i];
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  gamma_.path = prefix + ".gamma";
  beta_.path = prefix + ".beta";
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  out.emplace_back(prefix + ".running_mean", &running_mean_);
  out.emplace_back(prefix + ".running_var", &running_var_);
}

std::unique_ptr<Layer> BatchNorm2d::clone() const {
  auto c = std::make_unique<BatchNorm2d>(*this);
  c->xhat_ = Tensor4();
  return c;
}

// ----------------------------------------------------------------- ReLU

Tensor4 ReLU::forward(const Tensor4& x, bool /*train*/) {
  n_ = x.n; c_ = x.c; h_ = x.h; w_ = x.w;
  mask_.assign(x.size(), 0);
  Tensor4 out(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.v[i] > 0) {
      out.v[i] = x.v[i];
      mask_[i] = 1;
    }
  }
  return out;
}

Tensor4 ReLU::backward(const Tensor4& dy, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor4 dx(n_, c_, h_, w_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx.v[i] = mask_[i] ? dy.v[i] : 0.0;
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor4 MaxPool2d::forward(const Tensor4& x, bool /*train*/) {
  in_n_ = x.n; in_c_ = x.c; in_h_ = x.h; in_w_ = x.w;
  out_h_ = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
  out_w_ = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
  if (out_h_ <= 0 || out_w_ <= 0) throw std::invalid_argument("MaxPool2d: input too small");
  Tensor4 out(x.n, x.c, out_h_, out_w_);
  argmax_.assign(out.size(), 0);
  std::size_t oi = 0;
  for (int img = 0; img < x.n; ++img) {
    for (int c = 0; c < x.c; ++c) {
      const double* plane = x.plane(img, c);
      for (int oy = 0; oy < out_h_; ++oy) {
        for (int ox = 0; ox < out_w_; ++ox, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          int best_idx = 0;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix < 0 || ix >= x.w) continue;
              const int idx = iy * x.w + ix;
              if (plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          out.v[oi] = best;
          argmax_[oi] = best_idx;
        }
      }
    }
  }
  return out;
}

Tensor4 MaxPool2d::backward(const Tensor4& dy, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor4 dx(in_n_, in_c_, in_h_, in_w_);
  std::size_t oi = 0;
  for (int img = 0; img < in_n_; ++img)
    for (int c = 0; c < in_c_; ++c) {
      double* plane = dx.plane(img, c);
      for (int o = 0; o < out_h_ * out_w_; ++o, ++oi) plane[argmax_[oi]] += dy.v[oi];
    }
  return dx;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor4 GlobalAvgPool::forward(const Tensor4& x, bool /*train*/) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor4 out(x.n, x.c, 1, 1);
  const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
  for (int img = 0; img < x.n; ++img)
    for (int c = 0; c < x.c; ++c) {
      const double* p = x.plane(img, c);
      double s = 0;
      for (int i = 0; i < x.h * x.w; ++i) s += p[i];
      out.at(img, c, 0, 0) = s * inv;
    }
  return out;
}

Tensor4 GlobalAvgPool::backward(const Tensor4& dy, bool need_input_grad) {
  if (!need_input_grad) return {};
  Tensor4 dx(dy.n, dy.c, in_h_, in_w_);
  const double inv = 1.0 / (static_cast<double>(in_h_) * in_w_);
  for (int img = 0; img < dy.n; ++img)
    for (int c = 0; c < dy.c; ++c) {
      double* p = dx.plane(img, c);
      const double g = dy.at(img, c, 0, 0) * inv;
      for (int i = 0; i < in_h_ * in_w_; ++i) p[i] = g;
    }
  return dx;
}

// ------------------------------------------------------------ Sequential

Sequential::Sequential(const Sequential& o) : names_(o.names_) {
  layers_.reserve(o.layers_.size());
  for (const auto& l : o.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& o) {
  if (this == &o) return *this;
  names_ = o.names_;
  layers_.clear();
  layers_.reserve(o.layers_.size());
  for (const auto& l : o.layers_) layers_.push_back(l->clone());
  return *this;
}

void Sequential::add(std::unique_ptr<Layer> layer, std::string name) {
  layers_.push_back(std::move(layer));
  names_.push_back(std::move(name));
}

Tensor4 Sequential::forward(const Tensor4& x, bool train) {
  Tensor4 cur = x;
  for (auto& l : layers_) cur = l->forward(cur, train);
  return cur;
}

Tensor4 Sequential::backward(const Tensor4& dy, bool need_input_grad) {
  Tensor4 cur = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool need = need_input_grad || i > 0;
    cur = layers_[i]->backward(cur, need);
  }
  return cur;
}

void Sequential::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_params(prefix.empty() ? names_[i] : prefix + "." + names_[i], out);
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_buffers(prefix.empty() ? names_[i] : prefix + "." + names_[i], out);
}

// --------------------------------------------------------- ResidualBlock

Tensor4 ResidualBlock::forward(const Tensor4& x, bool train) {
  Tensor4 main_out = main_.forward(x, train);
  Tensor4 sc = projection_ ? shortcut_.forward(x, train) : x;
  if (!main_out.same_shape(sc))
    throw std::invalid_argument("ResidualBlock: branch shape mismatch");
  Tensor4 out(main_out.n, main_out.c, main_out.h, main_out.w);
  relu_mask_.assign(out.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = main_out.v[i] + sc.v[i];
    if (s > 0) {
      out.v[i] = s;
      relu_mask_[i] = 1;
    }
  }
  return out;
}

Tensor4 ResidualBlock::backward(const Tensor4& dy, bool need_input_grad) {
  Tensor4 dsum(dy.n, dy.c, dy.h, dy.w);
  for (std::size_t i = 0; i < dy.size(); ++i) dsum.v[i] = relu_mask_[i] ? dy.v[i] : 0.0;
  Tensor4 dmain = main_.backward(dsum, need_input_grad);
  if (!need_input_grad && !projection_) return {};
  if (projection_) {
    Tensor4 dsc = shortcut_.backward(dsum, need_input_grad);
    if (!need_input_grad) return {};
    for (std::size_t i = 0; i < dmain.size(); ++i) dmain.v[i] += dsc.v[i];
    return dmain;
  }
  for (std::size_t i = 0; i < dmain.size(); ++i) dmain.v[i] += dsum.v[i];
  return dmain;
}

void ResidualBlock::collect_params(const std::string& prefix, std::vector<Param*>& out) {
  main_.collect_params(prefix + ".main", out);
  if (projection_) shortcut_.collect_params(prefix + ".shortcut", out);
}

void ResidualBlock::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  main_.collect_buffers(prefix + ".main", out);
  if (projection_) shortcut_.collect_buffers(prefix + ".shortcut", out);
}

}  // namespace fsf
