#include <doctest.h>

#include <cmath>
#include <map>

#include "fsf/classifier.hpp"
#include "fsf/rng.hpp"

using namespace fsf;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("normalize_vector: (3,4) -> (0.6,0.8)") {
  Eigen::VectorXd z = normalize_vector(vec2(3, 4));
  CHECK(z(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(z(1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("normalize_vector: near-zero norm rejected") {
  CHECK_THROWS_WITH_AS(normalize_vector(vec2(0, 0)),
                       doctest::Contains("degenerate feature norm"), std::domain_error);
  CHECK_THROWS_AS(normalize_vector(vec2(1e-13, 0)), std::domain_error);
}

TEST_CASE("imprinting: e1 and e2 supports -> column (1/sqrt2, 1/sqrt2)") {
  std::map<std::string, std::vector<Eigen::VectorXd>> feats;
  feats["a"] = {vec2(1, 0), vec2(0, 1)};
  ImprintResult r = imprint_weights(feats);
  REQUIRE(r.class_ids == std::vector<std::string>{"a"});
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(r.columns(0, 0) == doctest::Approx(s).epsilon(1e-12));
  CHECK(r.columns(1, 0) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("imprinting: scaling a support example does not move the column") {
  std::map<std::string, std::vector<Eigen::VectorXd>> a, b;
  a["c"] = {vec2(2, 1), vec2(1, 3)};
  b["c"] = {vec2(2, 1) * 7.5, vec2(1, 3)};
  auto ra = imprint_weights(a), rb = imprint_weights(b);
  CHECK((ra.columns - rb.columns).norm() < 1e-12);
}

TEST_CASE("imprinting: antipodal supports cancel -> degenerate class mean") {
  std::map<std::string, std::vector<Eigen::VectorXd>> feats;
  feats["bad"] = {vec2(1, 0), vec2(-1, 0)};
  CHECK_THROWS_WITH_AS(imprint_weights(feats),
                       doctest::Contains("degenerate class mean"), std::domain_error);
}

TEST_CASE("imprinting property: unit columns, order and scale invariance") {
  Rng rng(42);
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_real_distribution<double> uscale(0.1, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 3 + static_cast<int>(rng() % 6);
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<Eigen::VectorXd> sup(k);
    for (auto& v : sup) {
      v.resize(d);
      for (int i = 0; i < d; ++i) v(i) = gauss(rng);
      if (v.norm() < 1e-6) v(0) += 1.0;
    }
    std::map<std::string, std::vector<Eigen::VectorXd>> feats;
    feats["x"] = sup;
    Eigen::MatrixXd base;
    try {
      base = imprint_weights(feats).columns;
    } catch (const std::domain_error&) {
      continue;  // rare antipodal cancellation draw
    }
    CHECK(std::abs(base.col(0).norm() - 1.0) < 1e-6);

    // permutation invariance
    std::vector<Eigen::VectorXd> perm(sup.rbegin(), sup.rend());
    feats["x"] = perm;
    CHECK((imprint_weights(feats).columns - base).norm() < 1e-9);

    // per-example positive rescaling invariance
    std::vector<Eigen::VectorXd> scaled = sup;
    for (auto& v : scaled) v *= uscale(rng);
    feats["x"] = scaled;
    CHECK((imprint_weights(feats).columns - base).norm() < 1e-9);
  }
}

TEST_CASE("normalized head: hand-computed cosine logits") {
  std::map<std::string, std::vector<Eigen::VectorXd>> feats;
  feats["a"] = {vec2(1, 0)};
  feats["b"] = {vec2(0, 1)};
  NormalizedClassifier head(imprint_weights(feats), 10.0);
  Eigen::MatrixXd z(1, 2);
  z << 3, 4;  // zhat = (0.6, 0.8)
  Eigen::MatrixXd logits = head.forward(z);
  CHECK(logits(0, 0) == doctest::Approx(6.0).epsilon(1e-12));   // 10 * 0.6
  CHECK(logits(0, 1) == doctest::Approx(8.0).epsilon(1e-12));   // 10 * 0.8
}

TEST_CASE("normalized head: argmax invariant to scale and feature magnitude") {
  Rng rng(7);
  std::normal_distribution<double> gauss(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 4, C = 5;
    std::map<std::string, std::vector<Eigen::VectorXd>> feats;
    for (int c = 0; c < C; ++c) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = gauss(rng);
      if (v.norm() < 1e-6) v(0) += 1.0;
      feats["c" + std::to_string(c)] = {v};
    }
    ImprintResult imp = imprint_weights(feats);
    NormalizedClassifier h1(imp, 10.0), h2(imp, 20.0);
    Eigen::MatrixXd z(1, d);
    for (int i = 0; i < d; ++i) z(0, i) = gauss(rng);
    if (z.norm() < 1e-6) z(0, 0) += 1.0;
    int p1 = predict(h1.forward(z).row(0).transpose());
    int p2 = predict(h2.forward(z).row(0).transpose());
    int p3 = predict(h1.forward(Eigen::MatrixXd(5.0 * z)).row(0).transpose());
    CHECK(p1 == p2);
    CHECK(p1 == p3);
  }
}

TEST_CASE("normalized head: renormalize restores unit columns after a raw update") {
  Rng rng(3);
  NormalizedClassifier head(6, {"a", "b", "c"}, rng);
  auto params = head.parameters();
  REQUIRE(params.size() == 2);  // weight + scale
  params[0]->value *= 3.7;
  params[0]->value.segment(0, 6) *= 0.2;
  head.renormalize_columns();
  auto W = head.weight();
  for (int c = 0; c < 3; ++c) CHECK(std::abs(W.col(c).norm() - 1.0) < 1e-12);
}

TEST_CASE("simple head: forward is W^T z + b") {
  Eigen::MatrixXd W(2, 2);
  W << 1, 0, 0, 2;
  Eigen::VectorXd b = vec2(0.5, -1);
  SimpleClassifier head(W, b, {"a", "b"});
  Eigen::MatrixXd z(1, 2);
  z << 3, 4;
  Eigen::MatrixXd logits = head.forward(z);
  CHECK(logits(0, 0) == doctest::Approx(3.5));
  CHECK(logits(0, 1) == doctest::Approx(7.0));
}

TEST_CASE("svm init: linearly separable two-class data classifies its support") {
  Eigen::MatrixXd X(6, 2);
  X << 2, 0.1, 3, -0.2, 2.5, 0.3, -2, 0.2, -3, -0.1, -2.5, 0.4;
  std::vector<int> y = {0, 0, 0, 1, 1, 1};
  SvmInitResult r = init_simple_svm(X, y, 2);
  SimpleClassifier head(r.weight, r.bias, {"pos", "neg"});
  Eigen::MatrixXd logits = head.forward(X);
  for (int i = 0; i < 6; ++i) CHECK(predict(logits.row(i).transpose()) == y[i]);
  // class-0 column should point along +x
  CHECK(r.weight(0, 0) > 0);
  CHECK(r.weight(0, 1) < 0);
}

TEST_CASE("svm init: 5-way one-shot supports are fit exactly") {
  Rng rng(11);
  std::normal_distribution<double> gauss(0, 1);
  Eigen::MatrixXd X(5, 8);
  for (int i = 0; i < X.size(); ++i) X(i / 8, i % 8) = gauss(rng);
  std::vector<int> y = {0, 1, 2, 3, 4};
  SvmInitResult r = init_simple_svm(X, y, 5);
  SimpleClassifier head(r.weight, r.bias, {"a", "b", "c", "d", "e"});
  Eigen::MatrixXd logits = head.forward(X);
  for (int i = 0; i < 5; ++i) CHECK(predict(logits.row(i).transpose()) == y[i]);
}

TEST_CASE("svm init: duplicated rows behave like the single-copy problem") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 1, -1, -1, 1, 1, -1, -1;
  std::vector<int> y = {0, 1, 0, 1};
  SvmInitResult r = init_simple_svm(X, y, 2);
  CHECK(std::isfinite(r.weight.sum()));
  SimpleClassifier head(r.weight, r.bias, {"a", "b"});
  Eigen::MatrixXd logits = head.forward(X);
  CHECK(predict(logits.row(0).transpose()) == 0);
  CHECK(predict(logits.row(1).transpose()) == 1);
}

TEST_CASE("predict: ties break toward the lowest class index") {
  Eigen::VectorXd logits(4);
  logits << 1.0, 2.5, 2.5, 0.0;
  CHECK(predict(logits) == 1);
  Eigen::VectorXd flat = Eigen::VectorXd::Zero(3);
  CHECK(predict(flat) == 0);
}
