#include "fsf/classifier.hpp"

#include <cmath>
#include <stdexcept>

namespace fsf {

Eigen::VectorXd normalize_vector(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (n <= 1e-12) throw std::domain_error("degenerate feature norm");
  return v / n;
}

ImprintResult imprint_weights(
    const std::map<std::string, std::vector<Eigen::VectorXd>>& features_per_class) {
  if (features_per_class.empty())
    throw std::invalid_argument("imprint_weights: no classes given");
  const Eigen::Index d = features_per_class.begin()->second.at(0).size();
  ImprintResult res;
  res.columns.resize(d, static_cast<Eigen::Index>(features_per_class.size()));
  Eigen::Index col = 0;
  for (const auto& [cls, feats] : features_per_class) {
    if (feats.empty()) throw std::invalid_argument("imprint_weights: class '" + cls + "' empty");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& f : feats) {
      if (f.size() != d) throw std::invalid_argument("imprint_weights: dimension mismatch");
      mean += normalize_vector(f);
    }
    mean /= static_cast<double>(feats.size());
    if (mean.norm() <= 1e-12) throw std::domain_error("degenerate class mean");
    res.columns.col(col++) = mean / mean.norm();
    res.class_ids.push_back(cls);
  }
  return res;
}

// ---------------------------------------------------- NormalizedClassifier

NormalizedClassifier::NormalizedClassifier(int feature_dim, std::vector<std::string> class_ids,
                                           Rng& rng, double initial_scale)
    : d_(feature_dim), class_ids_(std::move(class_ids)) {
  const int C = num_classes();
  weight_.group = ParamGroup::Classifier;
  weight_.value.resize(static_cast<Eigen::Index>(d_) * C);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value[i] = dist(rng);
  weight_.zero_grad();
  scale_.group = ParamGroup::Classifier;
  scale_.value = Eigen::VectorXd::Constant(1, initial_scale);
  scale_.zero_grad();
  renormalize_columns();
}

NormalizedClassifier::NormalizedClassifier(const ImprintResult& imprint, double scale)
    : d_(static_cast<int>(imprint.columns.rows())), class_ids_(imprint.class_ids) {
  weight_.group = ParamGroup::Classifier;
  weight_.value.resize(imprint.columns.size());
  Eigen::Map<Eigen::MatrixXd>(weight_.value.data(), d_, num_classes()) = imprint.columns;
  weight_.zero_grad();
  scale_.group = ParamGroup::Classifier;
  scale_.value = Eigen::VectorXd::Constant(1, scale);
  scale_.zero_grad();
}

Eigen::MatrixXd NormalizedClassifier::forward(const Eigen::MatrixXd& z) {
  const Eigen::Index B = z.rows();
  if (z.cols() != d_) throw std::invalid_argument("normalized head: feature dim mismatch");
  znorm_.resize(B);
  zhat_.resize(B, d_);
  for (Eigen::Index i = 0; i < B; ++i) {
    const double n = z.row(i).norm();
    if (n <= 1e-12) throw std::domain_error("degenerate feature norm");
    znorm_[i] = n;
    zhat_.row(i) = z.row(i) / n;
  }
  Eigen::Map<const Eigen::MatrixXd> W(weight_.value.data(), d_, num_classes());
  cos_logits_ = zhat_ * W;
  return scale_.value[0] * cos_logits_;
}

Eigen::MatrixXd NormalizedClassifier::backward(const Eigen::MatrixXd& dlogits) {
  const double s = scale_.value[0];
  Eigen::Map<const Eigen::MatrixXd> W(weight_.value.data(), d_, num_classes());
  Eigen::Map<Eigen::MatrixXd> dW(weight_.grad.data(), d_, num_classes());

  dW.noalias() += s * zhat_.transpose() * dlogits;
  if (scale_trainable) scale_.grad[0] += (dlogits.array() * cos_logits_.array()).sum();

  Eigen::MatrixXd dzhat = s * dlogits * W.transpose();  // B x d
  Eigen::MatrixXd dz(dzhat.rows(), d_);
  for (Eigen::Index i = 0; i < dzhat.rows(); ++i) {
    const double dot = dzhat.row(i).dot(zhat_.row(i));
    dz.row(i) = (dzhat.row(i) - dot * zhat_.row(i)) / znorm_[i];
  }
  return dz;
}

void NormalizedClassifier::renormalize_columns() {
  Eigen::Map<Eigen::MatrixXd> W(weight_.value.data(), d_, num_classes());
  for (Eigen::Index c = 0; c < W.cols(); ++c) {
    const double n = W.col(c).norm();
    if (n <= 1e-12) throw std::domain_error("degenerate classifier column");
    // Skipping columns already unit to machine precision keeps a zero-lr
    // step an exact no-op.
    if (std::abs(n - 1.0) > 1e-15) W.col(c) /= n;
  }
}

std::vector<Param*> NormalizedClassifier::parameters() {
  weight_.path = "head.weight";
  scale_.path = "head.scale";
  if (scale_trainable) return {&weight_, &scale_};
  return {&weight_};
}

// ------------------------------------------------------- SimpleClassifier

SimpleClassifier::SimpleClassifier(int feature_dim, std::vector<std::string> class_ids, Rng& rng)
    : d_(feature_dim), class_ids_(std::move(class_ids)) {
  const int C = num_classes();
  const double bound = std::sqrt(6.0 / d_);
  std::uniform_real_distribution<double> dist(-bound, bound);
  weight_.group = ParamGroup::Classifier;
  weight_.value.resize(static_cast<Eigen::Index>(d_) * C);
  for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value[i] = dist(rng);
  weight_.zero_grad();
  bias_.group = ParamGroup::Classifier;
  bias_.value = Eigen::VectorXd::Zero(C);
  bias_.zero_grad();
}

SimpleClassifier::SimpleClassifier(Eigen::MatrixXd weight, Eigen::VectorXd bias,
                                   std::vector<std::string> class_ids)
    : d_(static_cast<int>(weight.rows())), class_ids_(std::move(class_ids)) {
  if (weight.cols() != static_cast<Eigen::Index>(class_ids_.size()) ||
      bias.size() != weight.cols())
    throw std::invalid_argument("simple head: shape mismatch");
  weight_.group = ParamGroup::Classifier;
  weight_.value.resize(weight.size());
  Eigen::Map<Eigen::MatrixXd>(weight_.value.data(), weight.rows(), weight.cols()) = weight;
  weight_.zero_grad();
  bias_.group = ParamGroup::Classifier;
  bias_.value = std::move(bias);
  bias_.zero_grad();
}

Eigen::MatrixXd SimpleClassifier::forward(const Eigen::MatrixXd& z) {
  if (z.cols() != d_) throw std::invalid_argument("simple head: feature dim mismatch");
  z_ = z;
  Eigen::Map<const Eigen::MatrixXd> W(weight_.value.data(), d_, num_classes());
  Eigen::MatrixXd logits = z * W;
  logits.rowwise() += bias_.value.transpose();
  return logits;
}

Eigen::MatrixXd SimpleClassifier::backward(const Eigen::MatrixXd& dlogits) {
  Eigen::Map<const Eigen::MatrixXd> W(weight_.value.data(), d_, num_classes());
  Eigen::Map<Eigen::MatrixXd> dW(weight_.grad.data(), d_, num_classes());
  dW.noalias() += z_.transpose() * dlogits;
  bias_.grad.noalias() += dlogits.colwise().sum().transpose();
  return dlogits * W.transpose();
}

std::vector<Param*> SimpleClassifier::parameters() {
  weight_.path = "head.weight";
  bias_.path = "head.bias";
  return {&weight_, &bias_};
}

// ----------------------------------------------------------- SVM init

SvmInitResult init_simple_svm(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                              int num_classes, double regularization_c, double grad_tol,
                              int max_iters) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("init_simple_svm: label count mismatch");
  std::vector<int> per_class(num_classes, 0);
  for (int l : labels) {
    if (l < 0 || l >= num_classes) throw std::invalid_argument("init_simple_svm: bad label");
    ++per_class[l];
  }
  for (int c = 0; c < num_classes; ++c)
    if (per_class[c] == 0)
      throw std::invalid_argument("init_simple_svm: class " + std::to_string(c) +
                                  " has no examples");

  SvmInitResult res;
  res.weight = Eigen::MatrixXd::Zero(d, num_classes);
  res.bias = Eigen::VectorXd::Zero(num_classes);

  // Squared-hinge one-vs-rest: f(w,b) = 0.5|w|^2 + C sum max(0, 1 - y(wx+b))^2.
  // Smooth and convex; plain gradient descent with backtracking converges at
  // this problem size.
  for (int cls = 0; cls < num_classes; ++cls) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i] == cls ? 1.0 : -1.0;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    auto eval =[&](const Eigen::VectorXd& wv, double bv, Eigen::VectorXd* gw, double* gb) {
      Eigen::VectorXd f = features * wv;
      f.array() += bv;
      double obj = 0.5 * wv.squaredNorm();
      if (gw) {
        *gw = wv;
        *gb = 0.0;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        double m = 1.0 - y[i] * f[i];
        if (m > 0) {
          obj += regularization_c * m * m;
          if (gw) {
            gw->noalias() -= (2.0 * regularization_c * m * y[i]) * features.row(i).transpose();
            *gb -= 2.0 * regularization_c * m * y[i];
          }
        }
      }
      return obj;
    };

    double step = 1.0;
    Eigen::VectorXd gw(d);
    double gb = 0;
    bool converged = false;
    int it = 0;
    double obj = eval(w, b, &gw, &gb);
    for (; it < max_iters; ++it) {
      const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
      if (gnorm <= grad_tol) {
        converged = true;
        break;
      }
      // Backtracking line search on the steepest-descent direction.
      step *= 2.0;
      double new_obj;
      Eigen::VectorXd wn;
      double bn;
      while (true) {
        wn = w - step * gw;
        bn = b - step * gb;
        new_obj = eval(wn, bn, nullptr, nullptr);
        if (new_obj <= obj - 0.5 * step * gnorm * gnorm || step < 1e-18) break;
        step *= 0.5;
      }
      if (step < 1e-18) break;  // stalled; handled below by tolerance check
      w = wn;
      b = bn;
      obj = eval(w, b, &gw, &gb);
    }
    if (!converged) {
      const double gnorm = std::sqrt(gw.squaredNorm() + gb * gb);
      if (gnorm > grad_tol)
        throw std::runtime_error("SVM solver did not converge for class " +
                                 std::to_string(cls) + ": |grad|=" + std::to_string(gnorm) +
                                 " after " + std::to_string(it) + " iterations");
    }
    res.weight.col(cls) = w;
    res.bias[cls] = b;
  }
  return res;
}

int predict(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw std::invalid_argument("predict on empty logits");
  int best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace fsf
