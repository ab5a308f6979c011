#include "fsf/backbone.hpp"

#include <map>
#include <stdexcept>

namespace fsf {

namespace {

Sequential conv_bn_relu_pool_block(int in_ch, int out_ch, Rng& rng) {
  Sequential s;
  s.add(std::make_unique<Conv2d>(in_ch, out_ch, 3, 1, 1, /*bias=*/false, rng), "conv");
  s.add(std::make_unique<BatchNorm2d>(out_ch), "bn");
  s.add(std::make_unique<ReLU>(), "relu");
  s.add(std::make_unique<MaxPool2d>(2, 2), "pool");
  return s;
}

Sequential build_reference_convnet(Rng& rng) {
  Sequential net;
  int in_ch = 3;
  for (int b = 0; b < 4; ++b) {
    net.add(std::make_unique<Sequential>(conv_bn_relu_pool_block(in_ch, 64, rng)),
            "block" + std::to_string(b + 1));
    in_ch = 64;
  }
  net.add(std::make_unique<GlobalAvgPool>(), "gap");
  return net;
}

std::unique_ptr<ResidualBlock> basic_block(int in_ch, int out_ch, int stride, Rng& rng) {
  Sequential main;
  main.add(std::make_unique<Conv2d>(in_ch, out_ch, 3, stride, 1, false, rng), "conv1");
  main.add(std::make_unique<BatchNorm2d>(out_ch), "bn1");
  main.add(std::make_unique<ReLU>(), "relu1");
  main.add(std::make_unique<Conv2d>(out_ch, out_ch, 3, 1, 1, false, rng), "conv2");
  main.add(std::make_unique<BatchNorm2d>(out_ch), "bn2");
  bool proj = stride != 1 || in_ch != out_ch;
  Sequential shortcut;
  if (proj) {
    shortcut.add(std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, false, rng), "conv");
    shortcut.add(std::make_unique<BatchNorm2d>(out_ch), "bn");
  }
  return std::make_unique<ResidualBlock>(std::move(main), std::move(shortcut), proj);
}

std::unique_ptr<ResidualBlock> bottleneck_block(int in_ch, int mid_ch, int stride, Rng& rng) {
  const int out_ch = mid_ch * 4;
  Sequential main;
  main.add(std::make_unique<Conv2d>(in_ch, mid_ch, 1, 1, 0, false, rng), "conv1");
  main.add(std::make_unique<BatchNorm2d>(mid_ch), "bn1");
  main.add(std::make_unique<ReLU>(), "relu1");
  main.add(std::make_unique<Conv2d>(mid_ch, mid_ch, 3, stride, 1, false, rng), "conv2");
  main.add(std::make_unique<BatchNorm2d>(mid_ch), "bn2");
  main.add(std::make_unique<ReLU>(), "relu2");
  main.add(std::make_unique<Conv2d>(mid_ch, out_ch, 1, 1, 0, false, rng), "conv3");
  main.add(std::make_unique<BatchNorm2d>(out_ch), "bn3");
  bool proj = stride != 1 || in_ch != out_ch;
  Sequential shortcut;
  if (proj) {
    shortcut.add(std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, false, rng), "conv");
    shortcut.add(std::make_unique<BatchNorm2d>(out_ch), "bn");
  }
  return std::make_unique<ResidualBlock>(std::move(main), std::move(shortcut), proj);
}

Sequential build_resnet(const std::vector<int>& blocks, bool bottleneck, Rng& rng) {
  Sequential net;
  net.add(std::make_unique<Conv2d>(3, 64, 7, 2, 3, false, rng), "stem_conv");
  net.add(std::make_unique<BatchNorm2d>(64), "stem_bn");
  net.add(std::make_unique<ReLU>(), "stem_relu");
  net.add(std::make_unique<MaxPool2d>(3, 2, 1), "stem_pool");
  const int widths[4] = {64, 128, 256, 512};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    for (int b = 0; b < blocks[stage]; ++b) {
      int stride = (b == 0 && stage > 0) ? 2 : 1;
      std::string name = "stage" + std::to_string(stage + 1) + ".block" + std::to_string(b + 1);
      if (bottleneck) {
        net.add(bottleneck_block(in_ch, widths[stage], stride, rng), name);
        in_ch = widths[stage] * 4;
      } else {
        net.add(basic_block(in_ch, widths[stage], stride, rng), name);
        in_ch = widths[stage];
      }
    }
  }
  net.add(std::make_unique<GlobalAvgPool>(), "gap");
  return net;
}

Sequential build_vgg16_gap(Rng& rng) {
  // Standard VGG-16 convolutional stack; the final max-pooling stage is a
  // global average pool so any input resolution maps to d=512. No BN.
  const std::vector<int> cfg = {64, 64, -1, 128, 128, -1, 256, 256, 256, -1,
                                512, 512, 512, -1, 512, 512, 512};
  Sequential net;
  int in_ch = 3, conv_i = 0, pool_i = 0;
  for (int v : cfg) {
    if (v == -1) {
      net.add(std::make_unique<MaxPool2d>(2, 2), "pool" + std::to_string(++pool_i));
    } else {
      ++conv_i;
      net.add(std::make_unique<Conv2d>(in_ch, v, 3, 1, 1, /*bias=*/true, rng),
              "conv" + std::to_string(conv_i));
      net.add(std::make_unique<ReLU>(), "relu" + std::to_string(conv_i));
      in_ch = v;
    }
  }
  net.add(std::make_unique<GlobalAvgPool>(), "gap");
  return net;
}

}  // namespace

Backbone build_backbone(const BackboneSpec& spec, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  BackboneSpec out = spec;
  Sequential net;
  const std::string& a = spec.architecture;
  if (a == "reference-convnet") {
    net = build_reference_convnet(rng);
    out.feature_dim = 64;
  } else if (a == "resnet-18") {
    net = build_resnet({2, 2, 2, 2}, false, rng);
    out.feature_dim = 512;
  } else if (a == "resnet-34") {
    net = build_resnet({3, 4, 6, 3}, false, rng);
    out.feature_dim = 512;
  } else if (a == "resnet-50") {
    net = build_resnet({3, 4, 6, 3}, true, rng);
    out.feature_dim = 2048;
  } else if (a == "resnet-101") {
    net = build_resnet({3, 4, 23, 3}, true, rng);
    out.feature_dim = 2048;
  } else if (a == "resnet-152") {
    net = build_resnet({3, 8, 36, 3}, true, rng);
    out.feature_dim = 2048;
  } else if (a == "vgg16-gap") {
    net = build_vgg16_gap(rng);
    out.feature_dim = 512;
  } else {
    throw std::invalid_argument("unknown architecture: " + a);
  }
  return Backbone(std::move(out), std::move(net));
}

Eigen::MatrixXd Backbone::extract_features(const Tensor4& batch, bool train) {
  Tensor4 out = net_.forward(batch, train);
  if (out.h != 1 || out.w != 1 || out.c != spec_.feature_dim)
    throw std::runtime_error("backbone produced unexpected feature shape");
  cached_batch_ = out.n;
  Eigen::MatrixXd feats(out.n, out.c);
  for (int i = 0; i < out.n; ++i)
    for (int c = 0; c < out.c; ++c) feats(i, c) = out.at(i, c, 0, 0);
  return feats;
}

void Backbone::backward(const Eigen::MatrixXd& dfeatures, bool need_param_grads) {
  if (!need_param_grads) return;
  if (dfeatures.rows() != cached_batch_ || dfeatures.cols() != spec_.feature_dim)
    throw std::invalid_argument("backbone backward: gradient shape mismatch");
  Tensor4 dy(static_cast<int>(dfeatures.rows()), spec_.feature_dim, 1, 1);
  for (int i = 0; i < dy.n; ++i)
    for (int c = 0; c < dy.c; ++c) dy.at(i, c, 0, 0) = dfeatures(i, c);
  net_.backward(dy, /*need_input_grad=*/false);
}

std::vector<Param*> Backbone::parameters() {
  std::vector<Param*> out;
  net_.collect_params("backbone", out);
  return out;
}

std::vector<BufferRef> Backbone::buffers() {
  std::vector<BufferRef> out;
  net_.collect_buffers("backbone", out);
  return out;
}

bool Backbone::has_batch_norm() {
  for (const Param* p : parameters())
    if (p->group == ParamGroup::BnAffine) return true;
  return false;
}

void Backbone::set_bn_update_running_stats(bool update) {
  net_.for_each_bn([update](BatchNorm2d& bn) { bn.update_running_stats_ = update; });
}

}  // namespace fsf
