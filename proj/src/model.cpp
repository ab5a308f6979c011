#include "fsf/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fsf {

using nlohmann::json;

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "normalized") return HeadKind::Normalized;
  if (s == "simple") return HeadKind::Simple;
  throw std::invalid_argument("unknown head kind: " + s);
}

const char* head_kind_to_string(HeadKind k) {
  return k == HeadKind::Normalized ? "normalized" : "simple";
}

NormalizedClassifier& Model::normalized_head() {
  if (kind_ != HeadKind::Normalized) throw std::logic_error("model has no normalized head");
  return normalized_;
}

SimpleClassifier& Model::simple_head() {
  if (kind_ != HeadKind::Simple) throw std::logic_error("model has no simple head");
  return simple_;
}

int Model::num_classes() const {
  return kind_ == HeadKind::Normalized ? normalized_.num_classes() : simple_.num_classes();
}

const std::vector<std::string>& Model::class_ids() const {
  return kind_ == HeadKind::Normalized ? normalized_.class_ids() : simple_.class_ids();
}

Eigen::MatrixXd Model::forward_logits(const Tensor4& batch, bool train) {
  Eigen::MatrixXd feats = backbone_.extract_features(batch, train);
  return kind_ == HeadKind::Normalized ? normalized_.forward(feats) : simple_.forward(feats);
}

void Model::backward(const Eigen::MatrixXd& dlogits, bool need_backbone_grads) {
  Eigen::MatrixXd dz =
      kind_ == HeadKind::Normalized ? normalized_.backward(dlogits) : simple_.backward(dlogits);
  backbone_.backward(dz, need_backbone_grads);
}

std::vector<Param*> Model::parameters() {
  std::vector<Param*> out = backbone_.parameters();
  auto head = kind_ == HeadKind::Normalized ? normalized_.parameters() : simple_.parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

void Model::zero_grads() {
  for (Param* p : parameters()) p->zero_grad();
}

void Model::project_head() {
  if (kind_ == HeadKind::Normalized) normalized_.renormalize_columns();
}

Model build_model(const BackboneSpec& spec, HeadKind kind, std::vector<std::string> class_ids,
                  std::uint64_t seed, double initial_scale, bool scale_trainable) {
  Backbone bb = build_backbone(spec, seed);
  Rng head_rng(splitmix64(seed ^ 0xC1A55ULL));
  if (kind == HeadKind::Normalized) {
    NormalizedClassifier head(bb.feature_dim(), std::move(class_ids), head_rng, initial_scale);
    head.scale_trainable = scale_trainable;
    return Model(std::move(bb), std::move(head));
  }
  SimpleClassifier head(bb.feature_dim(), std::move(class_ids), head_rng);
  return Model(std::move(bb), std::move(head));
}

void reset_head_for_novel(Model& model, const Episode& episode, const PreprocessConfig& pcfg,
                          double svm_c) {
  // Support features, eval-mode preprocessing and inference.
  std::vector<Tensor4> items;
  items.reserve(episode.support.size());
  for (const auto& ex : episode.support) items.push_back(preprocess_eval(*ex.image, pcfg));
  Tensor4 batch = stack_batch(items);
  Eigen::MatrixXd feats = model.backbone().extract_features(batch, /*train=*/false);

  if (model.head_kind() == HeadKind::Normalized) {
    std::map<std::string, std::vector<Eigen::VectorXd>> per_class;
    for (std::size_t i = 0; i < episode.support.size(); ++i)
      per_class[episode.classes[episode.support[i].label]].push_back(
          feats.row(static_cast<Eigen::Index>(i)).transpose());
    // Column order must follow episode label order, not map order.
    ImprintResult imprint;
    imprint.columns.resize(feats.cols(), static_cast<Eigen::Index>(episode.classes.size()));
    for (std::size_t c = 0; c < episode.classes.size(); ++c) {
      std::map<std::string, std::vector<Eigen::VectorXd>> one;
      one[episode.classes[c]] = per_class.at(episode.classes[c]);
      ImprintResult r = imprint_weights(one);
      imprint.columns.col(static_cast<Eigen::Index>(c)) = r.columns.col(0);
      imprint.class_ids.push_back(episode.classes[c]);
    }
    bool scale_trainable = model.normalized_head().scale_trainable;
    NormalizedClassifier head(imprint, model.normalized_head().scale());
    head.scale_trainable = scale_trainable;
    model = Model(std::move(model.backbone()), std::move(head));
  } else {
    std::vector<int> labels;
    labels.reserve(episode.support.size());
    for (const auto& ex : episode.support) labels.push_back(ex.label);
    SvmInitResult svm = init_simple_svm(feats, labels,
                                        static_cast<int>(episode.classes.size()), svm_c);
    SimpleClassifier head(svm.weight, svm.bias, episode.classes);
    model = Model(std::move(model.backbone()), std::move(head));
  }
}

LossResult softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  const Eigen::Index B = logits.rows(), C = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != B)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  LossResult res;
  res.dlogits.resize(B, C);
  for (Eigen::Index i = 0; i < B; ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::VectorXd e = (logits.row(i).array() - mx).exp();
    const double Z = e.sum();
    Eigen::VectorXd p = e / Z;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= C) throw std::invalid_argument("softmax_cross_entropy: bad label");
    res.loss += -std::log(std::max(p[y], 1e-300));
    res.dlogits.row(i) = p.transpose() / static_cast<double>(B);
    res.dlogits(i, y) -= 1.0 / static_cast<double>(B);
    if (predict(logits.row(i).transpose()) == y) ++res.correct;
  }
  res.loss /= static_cast<double>(B);
  return res;
}

// ------------------------------------------------------------ checkpoints

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

void Model::save_checkpoint(const std::filesystem::path& path,
                            const std::string& config_echo) const {
  json j;
  j["format_version"] = 1;
  j["backbone"] = {{"architecture", backbone_.spec().architecture},
                   {"input_resolution", backbone_.spec().input_resolution},
                   {"feature_dim", backbone_.spec().feature_dim}};
  j["head"] = {{"kind", head_kind_to_string(kind_)},
               {"class_ids", class_ids()}};
  if (kind_ == HeadKind::Normalized)
    j["head"]["scale_trainable"] = normalized_.scale_trainable;

  Model& self = const_cast<Model&>(*this);
  json params = json::object();
  for (Param* p : self.parameters()) params[p->path] = vec_to_json(p->value);
  j["params"] = std::move(params);
  json buffers = json::object();
  for (auto& [name, buf] : self.backbone_.buffers()) buffers[name] = vec_to_json(*buf);
  j["buffers"] = std::move(buffers);
  if (!config_echo.empty()) j["config_echo"] = config_echo;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump();
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Model Model::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  json j;
  in >> j;
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("unsupported checkpoint version in " + path.string());

  BackboneSpec spec;
  spec.architecture = j["backbone"]["architecture"].get<std::string>();
  spec.input_resolution = j["backbone"]["input_resolution"].get<int>();
  spec.feature_dim = j["backbone"]["feature_dim"].get<int>();
  HeadKind kind = head_kind_from_string(j["head"]["kind"].get<std::string>());
  std::vector<std::string> class_ids = j["head"]["class_ids"].get<std::vector<std::string>>();

  Model model = build_model(spec, kind, class_ids, /*seed=*/0);
  if (kind == HeadKind::Normalized)
    model.normalized_.scale_trainable = j["head"].value("scale_trainable", true);

  const json& params = j["params"];
  for (Param* p : model.parameters()) {
    auto it = params.find(p->path);
    if (it == params.end())
      throw std::runtime_error("checkpoint missing parameter: " + p->path);
    Eigen::VectorXd v = vec_from_json(*it);
    if (v.size() != p->value.size())
      throw std::runtime_error("checkpoint size mismatch for " + p->path);
    p->value = std::move(v);
    p->zero_grad();
  }
  const json& buffers = j["buffers"];
  for (auto& [name, buf] : model.backbone_.buffers()) {
    auto it = buffers.find(name);
    if (it == buffers.end()) throw std::runtime_error("checkpoint missing buffer: " + name);
    Eigen::VectorXd v = vec_from_json(*it);
    if (v.size() != buf->size())
      throw std::runtime_error("checkpoint size mismatch for " + name);
    *buf = std::move(v);
  }
  return model;
}

}  // namespace fsf
