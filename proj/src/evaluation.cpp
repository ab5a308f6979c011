#include "fsf/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace fsf {

using nlohmann::json;

int num_workers() {
  const char* env = std::getenv("FSF_NUM_WORKERS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

void finalize_report(EvalReport& report) {
  report.per_episode_accuracy.clear();
  report.failed_episodes = 0;
  for (const auto& e : report.episodes) {
    if (e.failed) ++report.failed_episodes;
    else report.per_episode_accuracy.push_back(e.accuracy);
  }
  const std::size_t t = report.per_episode_accuracy.size();
  if (t == 0) {
    report.mean_accuracy = 0;
    report.ci95_halfwidth = 0;
  } else {
    double sum = 0;
    for (double a : report.per_episode_accuracy) sum += a;
    report.mean_accuracy = sum / static_cast<double>(t);
    if (t >= 2) {
      double sq = 0;
      for (double a : report.per_episode_accuracy) {
        const double d = a - report.mean_accuracy;
        sq += d * d;
      }
      const double sd = std::sqrt(sq / static_cast<double>(t - 1));
      report.ci95_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(t));
    } else {
      report.ci95_halfwidth = 0;
    }
  }
  report.valid = report.failed_episodes <= 0.05 * report.trials;
}

double evaluate_episode(Model& model, const Episode& episode, const PreprocessConfig& pcfg) {
  if (model.num_classes() != static_cast<int>(episode.classes.size()))
    throw std::invalid_argument("evaluate_episode: head/episode class count mismatch");
  for (std::size_t i = 0; i < episode.classes.size(); ++i)
    if (model.class_ids()[i] != episode.classes[i])
      throw std::invalid_argument("evaluate_episode: head/episode class mismatch at " +
                                  std::to_string(i));
  std::vector<Tensor4> items;
  std::vector<int> labels;
  items.reserve(episode.query.size());
  for (const auto& ex : episode.query) {
    items.push_back(preprocess_eval(*ex.image, pcfg));
    labels.push_back(ex.label);
  }
  Tensor4 batch = stack_batch(items);
  Eigen::MatrixXd logits = model.forward_logits(batch, /*train=*/false);
  int correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    if (predict(logits.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

EpisodeResult run_one_episode(const Model& pretrained, const BenchmarkCondition& cond,
                              const ClassSection& section, const EpisodeSpec& base_spec,
                              int index, std::uint64_t master_seed,
                              const PreprocessConfig& pcfg) {
  EpisodeResult res;
  res.index = index;
  res.seed = derive_seed(master_seed, static_cast<std::uint64_t>(index));
  try {
    EpisodeSpec spec = base_spec;
    spec.seed = res.seed;
    Episode ep = sample_episode(section, spec);
    Model model = pretrained;  // independent fork
    reset_head_for_novel(model, ep, pcfg, cond.svm_c);
    if (cond.finetune.regime != UpdateRegime::None && cond.finetune.epochs > 0) {
      FinetuneConfig cfg = cond.finetune;
      cfg.seed = derive_seed(res.seed, 0xF17EULL);
      finetune(model, ep.support, cfg, pcfg);
      res.epochs_used = cfg.epochs;
    }
    res.accuracy = evaluate_episode(model, ep, pcfg);
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

}  // namespace

EvalReport run_benchmark(const Model& pretrained, const BenchmarkCondition& condition,
                         const ClassSection& novel_section, const EpisodeSpec& spec,
                         int trials, std::uint64_t master_seed,
                         const PreprocessConfig& pcfg) {
  if (trials < 1) throw std::invalid_argument("run_benchmark: trials must be >= 1");
  EvalReport report;
  report.trials = trials;
  report.episodes.resize(trials);
  report.condition_name = condition.name;
  report.regime = regime_to_string(condition.finetune.regime);
  report.optimizer = condition.finetune.optimizer.name;
  report.backbone = pretrained.backbone().spec().architecture;
  report.head = head_kind_to_string(pretrained.head_kind());
  report.n_way = spec.n_way;
  report.k_shot = spec.k_shot;
  report.q_query = spec.q_query;
  report.master_seed = master_seed;
  report.without_finetune =
      condition.finetune.regime == UpdateRegime::None || condition.finetune.epochs == 0;

  const int workers = std::min(num_workers(), trials);
  if (workers <= 1) {
    for (int i = 0; i < trials; ++i)
      report.episodes[i] =
          run_one_episode(pretrained, condition, novel_section, spec, i, master_seed, pcfg);
  } else {
    std::atomic<int> next{0};
    auto work = [&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= trials) break;
        report.episodes[i] =
            run_one_episode(pretrained, condition, novel_section, spec, i, master_seed, pcfg);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  finalize_report(report);
  return report;
}

std::vector<EvalReport> compare_conditions(const Model& pretrained,
                                           const std::vector<BenchmarkCondition>& grid,
                                           const ClassSection& novel_section,
                                           const EpisodeSpec& spec, int trials,
                                           std::uint64_t master_seed,
                                           const PreprocessConfig& pcfg) {
  if (grid.size() < 1) throw std::invalid_argument("compare_conditions: empty grid");
  std::vector<EvalReport> out;
  out.reserve(grid.size());
  for (const auto& cond : grid)
    out.push_back(run_benchmark(pretrained, cond, novel_section, spec, trials, master_seed, pcfg));
  return out;
}

namespace {

std::string fmt_acc(double a) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", a);
  return buf;
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << "episode,seed,accuracy,epochs_used\n";
  for (const auto& e : report.episodes) {
    out << e.index << "," << e.seed << ",";
    if (!e.failed) out << fmt_acc(e.accuracy);
    out << "," << e.epochs_used << "\n";
  }
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["schema_version"] = 1;
  j["condition"] = report.condition_name;
  j["regime"] = report.regime;
  j["optimizer"] = report.optimizer;
  j["backbone"] = report.backbone;
  j["head"] = report.head;
  j["n_way"] = report.n_way;
  j["k_shot"] = report.k_shot;
  j["q_query"] = report.q_query;
  j["trials"] = report.trials;
  j["master_seed"] = report.master_seed;
  j["mean_accuracy"] = report.mean_accuracy;
  j["ci95_halfwidth"] = report.ci95_halfwidth;
  j["failed_episodes"] = report.failed_episodes;
  j["valid"] = report.valid;
  j["without_finetune"] = report.without_finetune;
  j["per_episode_accuracy"] = report.per_episode_accuracy;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << j.dump(2) << "\n";
}

void write_comparison_csv(const std::vector<EvalReport>& reports,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write comparison: " + path.string());
  out << "condition,regime,optimizer,mean_accuracy,ci95_halfwidth,failed_episodes,"
         "without_finetune\n";
  for (const auto& r : reports) {
    out << r.condition_name << "," << r.regime << "," << r.optimizer << ",";
    if (r.per_episode_accuracy.empty())
      out << ",";  // no mean when every episode failed
    else
      out << fmt_acc(r.mean_accuracy) << "," << fmt_acc(r.ci95_halfwidth);
    out << "," << r.failed_episodes << "," << (r.without_finetune ? 1 : 0) << "\n";
  }
}

void write_comparison_markdown(const std::vector<EvalReport>& reports,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write comparison: " + path.string());
  out << "| Condition | Regime | Optimizer | Accuracy | Failed |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out << "| " << r.condition_name << " | " << r.regime << " | " << r.optimizer << " | ";
    if (r.per_episode_accuracy.empty()) {
      out << "*";
    } else {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", 100 * r.mean_accuracy,
                    100 * r.ci95_halfwidth);
      out << buf;
      if (r.without_finetune) out << " †";
    }
    out << " | " << r.failed_episodes << " |\n";
  }
}

}  // namespace fsf
