#include "fsf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fsf {

UpdateRegime regime_from_string(const std::string& s) {
  if (s == "all") return UpdateRegime::All;
  if (s == "bn_fc" || s == "bn_and_fc") return UpdateRegime::BnAndFc;
  if (s == "fc" || s == "fc_only") return UpdateRegime::FcOnly;
  if (s == "none") return UpdateRegime::None;
  throw std::invalid_argument("unknown regime: " + s);
}

const char* regime_to_string(UpdateRegime r) {
  switch (r) {
    case UpdateRegime::All: return "all";
    case UpdateRegime::BnAndFc: return "bn_fc";
    case UpdateRegime::FcOnly: return "fc";
    case UpdateRegime::None: return "none";
  }
  return "?";
}

std::vector<Param*> select_trainable(Model& model, UpdateRegime regime) {
  if (regime == UpdateRegime::None) return {};
  std::vector<Param*> out;
  bool want_conv = regime == UpdateRegime::All;
  bool want_bn = regime == UpdateRegime::All || regime == UpdateRegime::BnAndFc;
  bool has_bn = false;
  for (Param* p : model.parameters()) {
    switch (p->group) {
      case ParamGroup::ConvWeight:
        if (want_conv) out.push_back(p);
        break;
      case ParamGroup::BnAffine:
        has_bn = true;
        if (want_bn) out.push_back(p);
        break;
      case ParamGroup::Classifier:
        out.push_back(p);
        break;
    }
  }
  if (regime == UpdateRegime::BnAndFc && !has_bn)
    throw std::invalid_argument("regime inapplicable: architecture has no BN layers");
  return out;
}

PretrainLog pretrain(Model& model, const ClassSection& base_section,
                     const PreprocessConfig& pcfg, const PretrainConfig& cfg) {
  if (base_section.empty()) throw std::invalid_argument("pretrain: empty base section");
  // Map section classes onto head columns.
  const auto& ids = model.class_ids();
  if (ids.size() != base_section.size())
    throw std::invalid_argument("pretrain: head sized for " + std::to_string(ids.size()) +
                                " classes, section has " + std::to_string(base_section.size()));
  std::vector<std::pair<const Image*, int>> data;
  for (std::size_t c = 0; c < ids.size(); ++c) {
    auto it = base_section.find(ids[c]);
    if (it == base_section.end())
      throw std::invalid_argument("pretrain: section missing class '" + ids[c] + "'");
    for (const Image& img : it->second) data.emplace_back(&img, static_cast<int>(c));
  }

  PretrainLog log;
  if (cfg.epochs == 0) return log;

  Optimizer opt = build_optimizer(cfg.optimizer, model.parameters());
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    long correct = 0;
    long seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor4> items;
      std::vector<int> labels;
      items.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        items.push_back(preprocess_train(*data[order[i]].first, pcfg, rng));
        labels.push_back(data[order[i]].second);
      }
      Tensor4 batch = stack_batch(items);
      Eigen::MatrixXd logits = model.forward_logits(batch, /*train=*/true);
      LossResult lr = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lr.loss))
        throw std::runtime_error("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      model.zero_grads();
      model.backward(lr.dlogits, /*need_backbone_grads=*/true);
      opt.step();
      model.project_head();
      loss_sum += lr.loss * static_cast<double>(labels.size());
      correct += lr.correct;
      seen += static_cast<long>(labels.size());
    }
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(seen),
                          static_cast<double>(correct) / static_cast<double>(seen)});
  }
  if (log.epochs.size() >= 2 && log.epochs.back().loss >= log.epochs.front().loss)
    log.loss_decreased = false;
  return log;
}

FinetuneLog finetune(Model& model, const std::vector<LabeledExample>& support,
                     const FinetuneConfig& cfg, const PreprocessConfig& pcfg,
                     const std::function<void(int epoch)>& after_epoch) {
  FinetuneLog log;
  if (cfg.regime == UpdateRegime::None) return log;
  if (support.empty()) throw std::invalid_argument("finetune: empty support set");

  std::vector<Param*> trainable = select_trainable(model, cfg.regime);
  Optimizer opt = build_optimizer(cfg.optimizer, trainable);
  const bool need_backbone_grads = cfg.regime != UpdateRegime::FcOnly;
  model.backbone().set_bn_update_running_stats(!cfg.freeze_bn_stats);

  std::vector<int> labels;
  labels.reserve(support.size());
  for (const auto& ex : support) labels.push_back(ex.label);

  Rng rng(cfg.seed);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // One step per epoch: the batch is the entire N*K support set.
    std::vector<Tensor4> items;
    items.reserve(support.size());
    for (const auto& ex : support) items.push_back(preprocess_train(*ex.image, pcfg, rng));
    Tensor4 batch = stack_batch(items);
    Eigen::MatrixXd logits = model.forward_logits(batch, /*train=*/true);
    LossResult lr = softmax_cross_entropy(logits, labels);
    if (!std::isfinite(lr.loss))
      throw std::runtime_error("finetune: non-finite loss at epoch " + std::to_string(epoch) +
                               " (regime " + regime_to_string(cfg.regime) + ", optimizer " +
                               cfg.optimizer.name + ", lr " +
                               std::to_string(cfg.optimizer.learning_rate) + ")");
    model.zero_grads();
    model.backward(lr.dlogits, need_backbone_grads);
    opt.step();
    model.project_head();
    log.epoch_loss.push_back(lr.loss);
    if (after_epoch) after_epoch(epoch);
  }
  model.backbone().set_bn_update_running_stats(true);
  return log;
}

namespace {

double batch_accuracy(Model& model, const Tensor4& batch, const std::vector<int>& labels) {
  Eigen::MatrixXd logits = model.forward_logits(batch, /*train=*/false);
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    if (predict(logits.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

TuneResult tune_hyperparams(const Model& pretrained, const ClassSection& validation_section,
                            const EpisodeSpec& episode_spec,
                            const std::vector<double>& lr_candidates, int max_epochs,
                            int trials, const FinetuneConfig& base_cfg,
                            const PreprocessConfig& pcfg, double svm_c) {
  if (lr_candidates.empty()) throw std::invalid_argument("tune: no lr candidates");
  if (trials < 1) throw std::invalid_argument("tune: trials must be >= 1");

  std::vector<double> lrs = lr_candidates;
  std::sort(lrs.begin(), lrs.end());

  TuneResult res;
  // acc_sum[lr_idx][epoch] over trials; epoch 0 is the imprint-only baseline
  // and is identical across lrs by construction.
  std::vector<std::vector<double>> acc_sum(lrs.size(), std::vector<double>(max_epochs + 1, 0));

  for (int trial = 0; trial < trials; ++trial) {
    EpisodeSpec spec = episode_spec;
    spec.seed = derive_seed(episode_spec.seed, static_cast<std::uint64_t>(trial));
    Episode ep = sample_episode(validation_section, spec);

    std::vector<Tensor4> qitems;
    std::vector<int> qlabels;
    for (const auto& ex : ep.query) {
      qitems.push_back(preprocess_eval(*ex.image, pcfg));
      qlabels.push_back(ex.label);
    }
    Tensor4 qbatch = stack_batch(qitems);

    for (std::size_t li = 0; li < lrs.size(); ++li) {
      Model model = pretrained;  // independent fork
      reset_head_for_novel(model, ep, pcfg, svm_c);
      const double acc0 = batch_accuracy(model, qbatch, qlabels);
      acc_sum[li][0] += acc0;
      res.curves.push_back({lrs[li], trial, 0, 0.0, acc0});

      FinetuneConfig cfg = base_cfg;
      cfg.optimizer.learning_rate = lrs[li];
      cfg.epochs = max_epochs;
      cfg.seed = derive_seed(spec.seed, 0x7A7EULL + li);
      FinetuneLog flog = finetune(model, ep.support, cfg, pcfg, [&](int epoch) {
        const double acc = batch_accuracy(model, qbatch, qlabels);
        acc_sum[li][epoch] += acc;
        res.curves.push_back({lrs[li], trial, epoch, 0.0, acc});
      });
      for (std::size_t e = 0; e < flog.epoch_loss.size(); ++e) {
        // Fill losses into the curve rows recorded by the callback.
        res.curves[res.curves.size() - flog.epoch_loss.size() + e].loss = flog.epoch_loss[e];
      }
    }
  }

  const double inv_trials = 1.0 / trials;
  res.epoch0_mean_accuracy = acc_sum[0][0] * inv_trials;
  double best = -1;
  for (std::size_t li = 0; li < lrs.size(); ++li) {
    for (int e = 1; e <= max_epochs; ++e) {
      const double mean = acc_sum[li][e] * inv_trials;
      if (mean > best) {
        best = mean;
        res.best_lr = lrs[li];
        res.best_epochs = e;
      }
    }
  }
  res.best_mean_accuracy = best;
  if (max_epochs == 0 || best <= res.epoch0_mean_accuracy) {
    // Fine-tuning did not help on validation: report the dagger
    // outcome, evaluation proceeds without fine-tuning.
    res.best_epochs = 0;
    res.best_lr = lrs[0];
    res.best_mean_accuracy = res.epoch0_mean_accuracy;
  }
  return res;
}

}  // namespace fsf
