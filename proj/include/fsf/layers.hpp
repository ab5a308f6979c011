#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fsf/rng.hpp"
#include "fsf/tensor.hpp"

namespace fsf {

enum class ParamGroup { ConvWeight, BnAffine, Classifier };

const char* param_group_name(ParamGroup g);

// One trainable parameter blob. `path` is the hierarchical layer name, used
// for checkpoints and regime selection diagnostics.
struct Param {
  std::string path;
  ParamGroup group = ParamGroup::ConvWeight;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;

  void zero_grad() { grad.setZero(value.size()); }
};

using BufferRef = std::pair<std::string, Eigen::VectorXd*>;

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor4 forward(const Tensor4& x, bool train) = 0;
  // Consumes the upstream gradient; accumulates into parameter grads. When
  // need_input_grad is false the returned tensor may be empty.
  virtual Tensor4 backward(const Tensor4& dy, bool need_input_grad) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<Param*>& out) {}
  virtual void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {}
  virtual void for_each_bn(const std::function<void(class BatchNorm2d&)>& fn) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool bias, Rng& rng);

  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  std::unique_ptr<Layer> clone() const override;

  int in_ch_, out_ch_, kernel_, stride_, pad_;
  bool has_bias_;
  Param weight_;  // (in*k*k) x out, column-major
  Param bias_;    // out

 private:
  Tensor4 input_;  // cached for backward
  void im2col(const Tensor4& x, int img, Eigen::MatrixXd& cols, int oh, int ow) const;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels);

  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  void for_each_bn(const std::function<void(BatchNorm2d&)>& fn) override { fn(*this); }
  std::unique_ptr<Layer> clone() const override;

  int channels_;
  double eps_ = 1e-5;
  double momentum_ = 0.1;
  bool update_running_stats_ = true;
  Param gamma_, beta_;
  Eigen::VectorXd running_mean_, running_var_;

 private:
  Tensor4 xhat_;
  Eigen::VectorXd inv_std_;  // of the statistics used in the cached forward
  bool cached_train_ = false;
};

class ReLU : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

 private:
  std::vector<char> mask_;
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int pad = 0)
      : kernel_(kernel), stride_(stride), pad_(pad) {}

  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

  int kernel_, stride_, pad_;

 private:
  std::vector<int> argmax_;
  int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

 private:
  int in_h_ = 0, in_w_ = 0;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  Sequential(const Sequential& o);
  Sequential& operator=(const Sequential& o);

  void add(std::unique_ptr<Layer> layer, std::string name);

  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  void for_each_bn(const std::function<void(BatchNorm2d&)>& fn) override {
    for (auto& l : layers_) l->for_each_bn(fn);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::string> names_;
};

// main(x) + shortcut(x), then ReLU. Shortcut may be empty (identity).
class ResidualBlock : public Layer {
 public:
  ResidualBlock(Sequential main, Sequential shortcut, bool projection)
      : main_(std::move(main)), shortcut_(std::move(shortcut)), projection_(projection) {}

  Tensor4 forward(const Tensor4& x, bool train) override;
  Tensor4 backward(const Tensor4& dy, bool need_input_grad) override;
  void collect_params(const std::string& prefix, std::vector<Param*>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;
  void for_each_bn(const std::function<void(BatchNorm2d&)>& fn) override {
    main_.for_each_bn(fn);
    shortcut_.for_each_bn(fn);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ResidualBlock>(*this); }

 private:
  Sequential main_, shortcut_;
  bool projection_;
  std::vector<char> relu_mask_;
};

}  // namespace fsf
