#include "fsf/experiment.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fsf {

using nlohmann::json;

PreprocessConfig ExperimentConfig::preprocess() const {
  if (resolution == "low") return PreprocessConfig::low_resolution();
  if (resolution == "high") return PreprocessConfig::high_resolution();
  if (resolution == "toy") return PreprocessConfig::toy(dataset.image_size);
  throw std::invalid_argument("unknown resolution preset: " + resolution);
}

EpisodeSpec ExperimentConfig::episode_spec() const {
  EpisodeSpec s;
  s.n_way = eval.n_way;
  s.k_shot = eval.k_shot;
  s.q_query = eval.q_query;
  s.seed = eval.master_seed;
  return s;
}

namespace {

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["out_dir"] = c.out_dir.string();
  j["dataset"] = {{"type", c.dataset.type},
                  {"manifest_path", c.dataset.manifest_path.string()},
                  {"data_root", c.dataset.data_root.string()},
                  {"domain_preset", c.dataset.domain_preset},
                  {"base_classes", c.dataset.base_classes},
                  {"val_classes", c.dataset.val_classes},
                  {"novel_classes", c.dataset.novel_classes},
                  {"examples_per_class", c.dataset.examples_per_class},
                  {"image_size", c.dataset.image_size},
                  {"domain_a", c.dataset.domain_a},
                  {"domain_b", c.dataset.domain_b},
                  {"seed", c.dataset.seed}};
  j["resolution"] = c.resolution;
  j["backbone"] = {{"architecture", c.backbone.architecture},
                   {"input_resolution", c.backbone.input_resolution}};
  j["head"] = {{"kind", c.head.kind},
               {"initial_scale", c.head.initial_scale},
               {"scale_trainable", c.head.scale_trainable},
               {"svm_c", c.head.svm_c}};
  j["pretrain"] = {{"optimizer", c.pretrain.optimizer},
                   {"learning_rate", c.pretrain.learning_rate},
                   {"epochs", c.pretrain.epochs},
                   {"batch_size", c.pretrain.batch_size},
                   {"seed", c.pretrain.seed}};
  j["finetune"] = {{"regime", c.finetune.regime},
                   {"optimizer", c.finetune.optimizer},
                   {"learning_rate", c.finetune.learning_rate},
                   {"lr_candidates", c.finetune.lr_candidates},
                   {"max_epochs", c.finetune.max_epochs},
                   {"tuning_trials", c.finetune.tuning_trials},
                   {"epochs", c.finetune.epochs},
                   {"freeze_bn_stats", c.finetune.freeze_bn_stats}};
  j["eval"] = {{"n_way", c.eval.n_way},
               {"k_shot", c.eval.k_shot},
               {"q_query", c.eval.q_query},
               {"trials", c.eval.trials},
               {"master_seed", c.eval.master_seed}};
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_path(const json& j, const char* key, std::filesystem::path& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}

}  // namespace

std::string ExperimentConfig::resolved_json() const { return to_json(*this).dump(2); }

std::string ExperimentConfig::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : resolved_json()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentConfig c;
  maybe(j, "name", c.name);
  maybe_path(j, "out_dir", c.out_dir);
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    maybe(d, "type", c.dataset.type);
    maybe_path(d, "manifest_path", c.dataset.manifest_path);
    maybe_path(d, "data_root", c.dataset.data_root);
    maybe(d, "domain_preset", c.dataset.domain_preset);
    maybe(d, "base_classes", c.dataset.base_classes);
    maybe(d, "val_classes", c.dataset.val_classes);
    maybe(d, "novel_classes", c.dataset.novel_classes);
    maybe(d, "examples_per_class", c.dataset.examples_per_class);
    maybe(d, "image_size", c.dataset.image_size);
    maybe(d, "domain_a", c.dataset.domain_a);
    maybe(d, "domain_b", c.dataset.domain_b);
    maybe(d, "seed", c.dataset.seed);
  }
  maybe(j, "resolution", c.resolution);
  if (j.contains("backbone")) {
    maybe(j["backbone"], "architecture", c.backbone.architecture);
    maybe(j["backbone"], "input_resolution", c.backbone.input_resolution);
  }
  if (j.contains("head")) {
    maybe(j["head"], "kind", c.head.kind);
    maybe(j["head"], "initial_scale", c.head.initial_scale);
    maybe(j["head"], "scale_trainable", c.head.scale_trainable);
    maybe(j["head"], "svm_c", c.head.svm_c);
  }
  if (j.contains("pretrain")) {
    const json& p = j["pretrain"];
    maybe(p, "optimizer", c.pretrain.optimizer);
    maybe(p, "learning_rate", c.pretrain.learning_rate);
    maybe(p, "epochs", c.pretrain.epochs);
    maybe(p, "batch_size", c.pretrain.batch_size);
    maybe(p, "seed", c.pretrain.seed);
  }
  if (j.contains("finetune")) {
    const json& f = j["finetune"];
    maybe(f, "regime", c.finetune.regime);
    maybe(f, "optimizer", c.finetune.optimizer);
    maybe(f, "learning_rate", c.finetune.learning_rate);
    maybe(f, "lr_candidates", c.finetune.lr_candidates);
    maybe(f, "max_epochs", c.finetune.max_epochs);
    maybe(f, "tuning_trials", c.finetune.tuning_trials);
    maybe(f, "epochs", c.finetune.epochs);
    maybe(f, "freeze_bn_stats", c.finetune.freeze_bn_stats);
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    maybe(e, "n_way", c.eval.n_way);
    maybe(e, "k_shot", c.eval.k_shot);
    maybe(e, "q_query", c.eval.q_query);
    maybe(e, "trials", c.eval.trials);
    maybe(e, "master_seed", c.eval.master_seed);
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("config not found: " + json_path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

void apply_preset(ExperimentConfig& cfg, const std::string& preset) {
  if (preset == "low") {
    cfg.resolution = "low";
    cfg.backbone.input_resolution = 84;
  } else if (preset == "high") {
    cfg.resolution = "high";
    cfg.backbone.input_resolution = 224;
  } else if (preset == "cross-toy") {
    cfg.resolution = "toy";
    cfg.dataset.type = "synthetic";
    cfg.dataset.domain_preset = "cross";
    // Calibrated shift: strong enough to clearly degrade frozen features,
    // mild enough that the shapes stay learnable from a 5x5 support set.
    cfg.dataset.domain_b = 0.5;
    // 5-way tuning episodes need at least n_way validation classes.
    cfg.dataset.val_classes = 6;
    cfg.dataset.image_size = 32;
    cfg.backbone.architecture = "reference-convnet";
    cfg.backbone.input_resolution = 32;
    cfg.eval.trials = 100;
  } else {
    throw std::invalid_argument("unknown preset: " + preset);
  }
}

DatasetBundle resolve_dataset(const ExperimentConfig& cfg) {
  DatasetBundle b;
  if (cfg.dataset.type == "manifest") {
    SplitManifest m = load_split_manifest(cfg.dataset.manifest_path);
    std::filesystem::path root = cfg.dataset.data_root.empty()
                                     ? cfg.dataset.manifest_path.parent_path()
                                     : cfg.dataset.data_root;
    b.base = load_section(m, Split::Base, root);
    b.val = load_section(m, Split::Val, root);
    b.novel = load_section(m, Split::Novel, root);
    return b;
  }
  if (cfg.dataset.type != "synthetic")
    throw std::invalid_argument("unknown dataset type: " + cfg.dataset.type);

  const bool cross = cfg.dataset.domain_preset == "cross";
  SyntheticConfig s;
  s.examples_per_class = cfg.dataset.examples_per_class;
  s.image_size = cfg.dataset.image_size;
  s.seed = cfg.dataset.seed;

  s.n_classes = cfg.dataset.base_classes;
  s.class_id_offset = 0;
  s.domain = cfg.dataset.domain_a;
  b.base = make_synthetic_dataset(s);

  s.n_classes = cfg.dataset.val_classes;
  s.class_id_offset = cfg.dataset.base_classes;
  s.domain = cross ? cfg.dataset.domain_b : cfg.dataset.domain_a;
  b.val = make_synthetic_dataset(s);

  s.n_classes = cfg.dataset.novel_classes;
  s.class_id_offset = cfg.dataset.base_classes + cfg.dataset.val_classes;
  s.domain = cross ? cfg.dataset.domain_b : cfg.dataset.domain_a;
  b.novel = make_synthetic_dataset(s);
  return b;
}

namespace {

void ensure_dirs(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.experiment_dir() / "logs");
  std::filesystem::create_directories(cfg.experiment_dir() / "reports");
}

void echo_config(const ExperimentConfig& cfg) {
  std::ofstream out(cfg.experiment_dir() / "config.resolved.json");
  out << cfg.resolved_json() << "\n";
  std::ofstream h(cfg.experiment_dir() / "config.hash");
  h << cfg.content_hash() << "\n";
}

}  // namespace

std::filesystem::path cmd_synth_data(const ExperimentConfig& cfg) {
  ensure_dirs(cfg);
  echo_config(cfg);
  DatasetBundle b = resolve_dataset(cfg);
  auto dir = cfg.experiment_dir() / "data";
  auto manifest = cfg.experiment_dir() / "manifest.csv";
  std::filesystem::remove(manifest);
  write_synthetic_section(b.base, Split::Base, dir, manifest);
  write_synthetic_section(b.val, Split::Val, dir, manifest);
  write_synthetic_section(b.novel, Split::Novel, dir, manifest);
  return manifest;
}

std::filesystem::path cmd_pretrain(const ExperimentConfig& cfg) {
  ensure_dirs(cfg);
  echo_config(cfg);
  DatasetBundle data = resolve_dataset(cfg);

  std::vector<std::string> class_ids;
  for (const auto& [cls, imgs] : data.base) class_ids.push_back(cls);

  BackboneSpec spec;
  spec.architecture = cfg.backbone.architecture;
  spec.input_resolution = cfg.backbone.input_resolution;
  Model model = build_model(spec, head_kind_from_string(cfg.head.kind), class_ids,
                            cfg.pretrain.seed, cfg.head.initial_scale,
                            cfg.head.scale_trainable);

  PretrainConfig pc;
  pc.optimizer.name = cfg.pretrain.optimizer;
  pc.optimizer.learning_rate = cfg.pretrain.learning_rate;
  pc.epochs = cfg.pretrain.epochs;
  pc.batch_size = cfg.pretrain.batch_size;
  pc.seed = cfg.pretrain.seed;

  PretrainLog log = pretrain(model, data.base, cfg.preprocess(), pc);

  std::ofstream csv(cfg.experiment_dir() / "logs" / "pretrain_log.csv");
  csv << "epoch,loss,accuracy\n";
  for (const auto& e : log.epochs) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", e.epoch, e.loss, e.accuracy);
    csv << buf;
  }
  if (!log.loss_decreased) {
    std::ofstream flag(cfg.experiment_dir() / "logs" / "pretrain_loss_did_not_decrease");
    flag << "loss did not decrease over the pretraining run\n";
  }

  auto ckpt = cfg.experiment_dir() / "checkpoint.json";
  model.save_checkpoint(ckpt, cfg.resolved_json());
  return ckpt;
}

TunedParams cmd_tune(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint) {
  ensure_dirs(cfg);
  echo_config(cfg);
  Model model = Model::load_checkpoint(checkpoint);
  DatasetBundle data = resolve_dataset(cfg);

  FinetuneConfig base;
  base.regime = regime_from_string(cfg.finetune.regime);
  base.optimizer.name = cfg.finetune.optimizer;
  base.freeze_bn_stats = cfg.finetune.freeze_bn_stats;

  TuneResult tr = tune_hyperparams(model, data.val, cfg.episode_spec(),
                                   cfg.finetune.lr_candidates, cfg.finetune.max_epochs,
                                   cfg.finetune.tuning_trials, base, cfg.preprocess(),
                                   cfg.head.svm_c);

  std::ofstream csv(cfg.experiment_dir() / "logs" / "tuning_curves.csv");
  csv << "lr,trial,epoch,loss,val_accuracy\n";
  for (const auto& p : tr.curves) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%g,%d,%d,%.6f,%.6f\n", p.lr, p.trial, p.epoch, p.loss,
                  p.val_accuracy);
    csv << buf;
  }

  TunedParams out;
  out.learning_rate = tr.best_lr;
  out.epochs = tr.best_epochs;
  out.without_finetune = tr.best_epochs == 0;
  json j = {{"learning_rate", out.learning_rate},
            {"epochs", out.epochs},
            {"without_finetune", out.without_finetune},
            {"best_mean_accuracy", tr.best_mean_accuracy},
            {"epoch0_mean_accuracy", tr.epoch0_mean_accuracy}};
  std::ofstream jf(cfg.experiment_dir() / "tuned_params.json");
  jf << j.dump(2) << "\n";
  return out;
}

TunedParams load_tuned_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("tuned params not found: " + path.string());
  json j;
  in >> j;
  TunedParams t;
  t.learning_rate = j.at("learning_rate").get<double>();
  t.epochs = j.at("epochs").get<int>();
  t.without_finetune = j.value("without_finetune", t.epochs == 0);
  return t;
}

EvalReport cmd_benchmark(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::optional<TunedParams>& tuned) {
  ensure_dirs(cfg);
  echo_config(cfg);
  Model model = Model::load_checkpoint(checkpoint);
  DatasetBundle data = resolve_dataset(cfg);

  BenchmarkCondition cond;
  cond.name = cfg.name;
  cond.finetune.regime = regime_from_string(cfg.finetune.regime);
  cond.finetune.optimizer.name = cfg.finetune.optimizer;
  cond.finetune.optimizer.learning_rate =
      tuned ? tuned->learning_rate : cfg.finetune.learning_rate;
  cond.finetune.epochs = tuned ? tuned->epochs : cfg.finetune.epochs;
  cond.finetune.freeze_bn_stats = cfg.finetune.freeze_bn_stats;
  cond.svm_c = cfg.head.svm_c;

  EvalReport report = run_benchmark(model, cond, data.novel, cfg.episode_spec(),
                                    cfg.eval.trials, cfg.eval.master_seed, cfg.preprocess());
  write_report_csv(report, cfg.experiment_dir() / "reports" / "report.csv");
  write_report_json(report, cfg.experiment_dir() / "reports" / "report.json");
  return report;
}

std::vector<EvalReport> cmd_compare(const ExperimentConfig& cfg,
                                    const std::filesystem::path& checkpoint,
                                    const std::string& grid_kind) {
  ensure_dirs(cfg);
  echo_config(cfg);
  Model model = Model::load_checkpoint(checkpoint);
  DatasetBundle data = resolve_dataset(cfg);

  std::vector<BenchmarkCondition> grid;
  if (grid_kind == "regimes") {
    for (const char* r : {"all", "bn_fc", "fc", "none"}) {
      BenchmarkCondition c;
      c.name = r;
      c.finetune.regime = regime_from_string(r);
      c.finetune.optimizer.name = cfg.finetune.optimizer;
      c.finetune.optimizer.learning_rate = cfg.finetune.learning_rate;
      c.finetune.epochs = cfg.finetune.epochs;
      c.finetune.freeze_bn_stats = cfg.finetune.freeze_bn_stats;
      c.svm_c = cfg.head.svm_c;
      grid.push_back(std::move(c));
    }
  } else if (grid_kind == "optimizers") {
    for (const std::string& o : optimizer_names()) {
      BenchmarkCondition c;
      c.name = o;
      c.finetune.regime = regime_from_string(cfg.finetune.regime);
      c.finetune.optimizer.name = o;
      c.finetune.optimizer.learning_rate = cfg.finetune.learning_rate;
      c.finetune.epochs = cfg.finetune.epochs;
      c.finetune.freeze_bn_stats = cfg.finetune.freeze_bn_stats;
      c.svm_c = cfg.head.svm_c;
      grid.push_back(std::move(c));
    }
  } else {
    throw std::invalid_argument("unknown grid kind: " + grid_kind +
                                " (expected 'regimes' or 'optimizers')");
  }

  std::vector<EvalReport> reports =
      compare_conditions(model, grid, data.novel, cfg.episode_spec(), cfg.eval.trials,
                         cfg.eval.master_seed, cfg.preprocess());
  write_comparison_csv(reports, cfg.experiment_dir() / "reports" / "comparison.csv");
  write_comparison_markdown(reports, cfg.experiment_dir() / "reports" / "comparison.md");
  for (const auto& r : reports)
    write_report_csv(r, cfg.experiment_dir() / "reports" / ("report_" + r.condition_name + ".csv"));
  return reports;
}

}  // namespace fsf
