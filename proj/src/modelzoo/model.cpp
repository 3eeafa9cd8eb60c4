#include "ctx/modelzoo/model.hpp"

#include <cmath>

#include "ctx/core/error.hpp"
#include "ctx/modelzoo/weights.hpp"

namespace ctx {

namespace {

// Macro-geometry of a backbone: a stem, downsampling conv stages, and a
// 1x1 feature expansion feeding the global pool. Per-architecture settings
// reproduce each family's stem style, downsampling ratio and exact
// penultimate feature width; the published micro-blocks themselves are not
// rebuilt here.
struct Blueprint {
  int stem_channels;
  int stem_kernel;
  bool stem_pool;
  std::vector<int> stage_channels;
  std::vector<int> stage_blocks;
};

Blueprint blueprint_for(const std::string& name) {
  if (name == "SqueezeNet") return {64, 3, true, {128, 256}, {2, 2}};
  if (name == "ShuffleNet") return {24, 3, true, {48, 96, 192}, {1, 1, 1}};
  if (name == "ResNet18") return {64, 7, true, {64, 128, 256}, {2, 2, 2}};
  if (name == "ResNet50") return {64, 7, true, {128, 256, 512}, {2, 2, 2}};
  if (name == "ResNet101") return {64, 7, true, {128, 256, 512}, {2, 3, 3}};
  if (name == "ResNeXt50") return {64, 7, true, {128, 256, 512}, {2, 2, 2}};
  if (name == "ResNeXt101") return {64, 7, true, {128, 256, 512}, {2, 3, 3}};
  if (name == "InceptionV3") return {32, 3, true, {64, 128, 256}, {2, 2, 2}};
  if (name == "Xception") return {32, 3, true, {64, 128, 256}, {2, 2, 2}};
  if (name == "DenseNet121") return {64, 7, true, {128, 256}, {2, 2}};
  if (name == "DenseNet169") return {64, 7, true, {128, 256}, {2, 2}};
  if (name == "DenseNet201") return {64, 7, true, {128, 256}, {2, 2}};
  throw CtxError(ErrorKind::config, "no blueprint for: " + name);
}

void add_conv_block(nn::Network& net, const std::string& prefix, int in_ch,
                    int out_ch, int kernel, int stride) {
  net.add(prefix + ".conv",
          std::make_unique<nn::Conv2d>(prefix, in_ch, out_ch, kernel, stride,
                                       kernel / 2));
  net.add(prefix + ".bn", std::make_unique<nn::BatchNorm2d>(prefix, out_ch));
  net.add(prefix + ".relu", std::make_unique<nn::ReLU>(prefix));
}

std::unique_ptr<nn::Network> build_backbone(const ModelSpec& spec) {
  const Blueprint bp = blueprint_for(spec.name);
  auto net = std::make_unique<nn::Network>();

  add_conv_block(*net, "stem", 3, bp.stem_channels, bp.stem_kernel, 2);
  if (bp.stem_pool) {
    net->add("stem.pool", std::make_unique<nn::MaxPool2d>("stem.pool", 3, 2, 1));
  }

  int in_ch = bp.stem_channels;
  for (size_t s = 0; s < bp.stage_channels.size(); ++s) {
    const int out_ch = bp.stage_channels[s];
    for (int b = 0; b < bp.stage_blocks[s]; ++b) {
      const std::string prefix =
          "s" + std::to_string(s + 1) + ".b" + std::to_string(b + 1);
      add_conv_block(*net, prefix, in_ch, out_ch, 3, b == 0 ? 2 : 1);
      in_ch = out_ch;
    }
  }

  // 1x1 expansion to the published penultimate width; its ReLU is the
  // Grad-CAM tap.
  add_conv_block(*net, "features", in_ch, spec.feature_dim, 1, 1);
  net->add("pool", std::make_unique<nn::GlobalAvgPool>("pool"));
  return net;
}

} // namespace

ClassifierModel::ClassifierModel(ModelSpec spec,
                                 std::unique_ptr<nn::Network> backbone,
                                 std::unique_ptr<nn::Linear> head)
    : spec_(std::move(spec)), backbone_(std::move(backbone)),
      head_(std::move(head)) {}

void ClassifierModel::check_input(const nn::Tensor& batch) const {
  // Channel count is validated by the stem conv itself.
  if (batch.shape.size() != 4 ||
      batch.dim(2) != spec_.custom_input.height ||
      batch.dim(3) != spec_.custom_input.width) {
    throw CtxError(ErrorKind::evaluation,
                   spec_.name + ": expected (N,C," +
                       std::to_string(spec_.custom_input.height) + "," +
                       std::to_string(spec_.custom_input.width) +
                       ") input, got " + batch.shape_str());
  }
}

nn::Tensor ClassifierModel::logits(const nn::Tensor& batch) {
  check_input(batch);
  nn::Tensor feats = backbone_->forward(batch);
  return head_->forward(feats, /*train=*/false);
}

nn::Tensor ClassifierModel::logits_recorded(const nn::Tensor& batch,
                                            bool train) {
  check_input(batch);
  nn::Tensor feats = backbone_->forward_recorded(batch, train);
  return head_->forward(feats, train);
}

void ClassifierModel::backward(const nn::Tensor& grad_logits) {
  nn::Tensor grad_feats = head_->backward(grad_logits);
  backbone_->backward(grad_feats);
}

FeatureMatrix ClassifierModel::extract_features(const nn::Tensor& batch) {
  check_input(batch);
  return backbone_->forward(batch);
}

std::vector<nn::Param*> ClassifierModel::params() {
  std::vector<nn::Param*> out = backbone_->params();
  for (nn::Param* p : head_->params()) out.push_back(p);
  return out;
}

std::vector<nn::Param*> ClassifierModel::buffers() {
  return backbone_->buffers();
}

void ClassifierModel::zero_grads() {
  for (nn::Param* p : params()) p->grad.zero();
}

std::map<std::string, nn::Tensor> ClassifierModel::state() const {
  std::map<std::string, nn::Tensor> out;
  auto* self = const_cast<ClassifierModel*>(this);
  for (nn::Param* p : self->backbone_->params()) out[p->name] = p->value;
  for (nn::Param* p : self->backbone_->buffers()) out[p->name] = p->value;
  for (nn::Param* p : self->head_->params()) out["head." + p->name] = p->value;
  return out;
}

void ClassifierModel::load_state(const std::map<std::string, nn::Tensor>& state,
                                 bool strict) {
  auto assign = [&](nn::Param* p, const std::string& key) {
    auto it = state.find(key);
    if (it == state.end()) {
      throw CtxError(ErrorKind::data,
                     "weights missing tensor: " + key + " for " + spec_.name);
    }
    if (!(it->second.shape == p->value.shape)) {
      throw CtxError(ErrorKind::data,
                     "weights shape mismatch for " + key + ": file " +
                         it->second.shape_str() + " vs model " +
                         p->value.shape_str());
    }
    p->value = it->second;
  };

  size_t consumed = 0;
  for (nn::Param* p : backbone_->params()) {
    assign(p, p->name);
    ++consumed;
  }
  for (nn::Param* p : backbone_->buffers()) {
    assign(p, p->name);
    ++consumed;
  }
  if (strict) {
    for (nn::Param* p : head_->params()) {
      assign(p, "head." + p->name);
      ++consumed;
    }
    if (consumed != state.size()) {
      throw CtxError(ErrorKind::data,
                     "checkpoint has " + std::to_string(state.size()) +
                         " tensors, model consumes " +
                         std::to_string(consumed));
    }
  }
}

std::unique_ptr<ClassifierModel> build_model(const ModelSpec& spec,
                                             bool pretrained, uint64_t seed,
                                             const WeightCache* cache) {
  auto backbone = build_backbone(spec);
  auto head = std::make_unique<nn::Linear>("head", spec.feature_dim, 1);

  Rng rng(seed);
  backbone->init(rng);
  head->init(rng);

  auto model = std::make_unique<ClassifierModel>(spec, std::move(backbone),
                                                 std::move(head));
  if (pretrained) {
    if (!cache) {
      throw CtxError(ErrorKind::data,
                     "weights: network unavailable: no weight cache "
                     "configured for pretrained " +
                         spec.name);
    }
    const std::string path = cache->resolve(spec.name);
    model->load_state(load_params(path), /*strict=*/false);
  }
  return model;
}

} // namespace ctx
