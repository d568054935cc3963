#include "fie/logreg.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace fie;
using fie::testing::random_matrix;

namespace {

LabeledSplit split_all_train(const std::vector<int>& labels) {
  LabeledSplit s;
  s.labels = labels;
  s.train.resize(labels.size());
  std::iota(s.train.begin(), s.train.end(), 0);
  return s;
}

Matrix with_bias(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  d.leftCols(x.cols()) = x;
  d.col(x.cols()).setOnes();
  return d;
}

}  // namespace

TEST_SUITE("logreg") {
  TEST_CASE("separable blobs are classified perfectly") {
    Matrix x = random_matrix(60, 2, 1, 0.5);
    std::vector<int> y(60);
    for (Index i = 0; i < 60; ++i) {
      y[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
      x(i, 0) += 4.0 * static_cast<double>(i % 3);
    }
    LabeledSplit s = split_all_train(y);
    s.train.resize(40);
    for (Index v = 40; v < 60; ++v) s.test.push_back(v);
    const LogRegModel m = train_logreg(x, s, LogRegConfig{});
    const Metrics r = evaluate(x, s, m.weights);
    CHECK(*r.train_acc == 1.0);
    CHECK(*r.test_acc == 1.0);
    CHECK_FALSE(r.val_acc.has_value());
    REQUIRE(r.per_class.size() == 3);
    for (const auto& c : r.per_class) CHECK(*c == 1.0);
  }

  TEST_CASE("heavy regularization leaves only the class-prior bias") {
    const Matrix x = random_matrix(40, 3, 2);
    std::vector<int> y(40, 0);
    for (std::size_t i = 0; i < 30; ++i) y[i] = 1;
    LogRegConfig cfg;
    cfg.l2 = 1e6;
    const LogRegModel m = train_logreg(x, split_all_train(y), cfg);
    CHECK(m.weights.topRows(3).cwiseAbs().maxCoeff() < 1e-6);
    // softmax(bias) matches the class frequencies 0.25 / 0.75.
    const double diff = m.weights(3, 1) - m.weights(3, 0);
    CHECK(diff == doctest::Approx(std::log(3.0)).epsilon(1e-4));
    for (int p : predict(x, m.weights)) CHECK(p == 1);
  }

  TEST_CASE("analytic gradient matches central differences") {
    const Matrix design = with_bias(random_matrix(20, 5, 3));
    std::vector<int> y(20);
    for (std::size_t i = 0; i < 20; ++i) y[i] = static_cast<int>(i % 3);
    const Matrix W = random_matrix(6, 3, 4, 0.3);
    Matrix grad;
    logreg_objective(design, y, W, 0.05, &grad);
    const double h = 1e-6;
    for (Index i = 0; i < W.rows(); ++i) {
      for (Index j = 0; j < W.cols(); ++j) {
        Matrix up = W;
        Matrix down = W;
        up(i, j) += h;
        down(i, j) -= h;
        const double fd = (logreg_objective(design, y, up, 0.05, nullptr) -
                           logreg_objective(design, y, down, 0.05, nullptr)) /
                          (2 * h);
        CHECK(std::abs(fd - grad(i, j)) < 1e-6);
      }
    }
  }

  TEST_CASE("zero weights give log C loss and lowest-class predictions") {
    const Matrix x = random_matrix(10, 2, 5);
    std::vector<int> y = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    CHECK(logreg_objective(with_bias(x), y, Matrix::Zero(3, 2), 0.0, nullptr) ==
          doctest::Approx(std::log(2.0)));
    LabeledSplit s = split_all_train(y);
    const Metrics r = evaluate(x, s, Matrix::Zero(3, 2));
    CHECK(*r.train_acc == 0.5);
    for (int p : predict(x, Matrix::Zero(3, 2))) CHECK(p == 0);
  }

  TEST_CASE("random labels stay near chance on held-out nodes") {
    const Index n = 2000;
    const Matrix x = random_matrix(n, 5, 6);
    Rng rng(7);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(2));
    LabeledSplit s;
    s.labels = y;
    for (Index v = 0; v < n; ++v) (v < 1000 ? s.train : s.test).push_back(v);
    const Metrics r = evaluate(x, s, train_logreg(x, s, LogRegConfig{}).weights);
    // Binomial(1000, 0.5): four standard deviations is about 0.063.
    CHECK(std::abs(*r.test_acc - 0.5) < 0.065);
  }

  TEST_CASE("loss is invariant to a constant shift of all logits") {
    const Matrix design = with_bias(random_matrix(15, 2, 8));
    std::vector<int> y(15);
    for (std::size_t i = 0; i < 15; ++i) y[i] = static_cast<int>(i % 4);
    Matrix W = random_matrix(3, 4, 9);
    const double base = logreg_objective(design, y, W, 0.0, nullptr);
    W.row(2).array() += 123.0;
    CHECK(logreg_objective(design, y, W, 0.0, nullptr) == doctest::Approx(base).epsilon(1e-12));
  }

  TEST_CASE("line search decreases the loss monotonically") {
    const Matrix x = random_matrix(80, 4, 10);
    std::vector<int> y(80);
    for (Index i = 0; i < 80; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.3 * x(i, 1) > 0 ? 1 : 0;
    LogRegConfig cfg;
    cfg.max_iters = 300;
    const LogRegModel m = train_logreg(x, split_all_train(y), cfg);
    REQUIRE(m.loss_trace.size() > 2);
    for (std::size_t i = 1; i < m.loss_trace.size(); ++i) {
      CHECK(m.loss_trace[i] <= m.loss_trace[i - 1]);
    }
  }

  TEST_CASE("folded weights reproduce the standardized model on raw inputs") {
    Matrix x = random_matrix(50, 3, 11);
    x.col(1) = 1000.0 * x.col(1).array() + 5e4;
    x.col(2).setConstant(7.0);  // zero variance column
    std::vector<int> y(50);
    for (Index i = 0; i < 50; ++i) y[static_cast<std::size_t>(i)] = x(i, 1) > 5e4 ? 1 : 0;
    const LogRegModel m = train_logreg(x, split_all_train(y), LogRegConfig{});
    CHECK(m.weights.allFinite());
    CHECK(*evaluate(x, split_all_train(y), m.weights).train_acc == 1.0);
  }

  TEST_CASE("bad splits are rejected") {
    LabeledSplit s;
    s.labels = {0, 1, -1};
    s.train = {0, 1};
    s.test = {1};
    CHECK_THROWS_AS(s.validate(3), InputError);
    s.test = {2};
    CHECK_THROWS_AS(s.validate(3), InputError);
    s.test = {5};
    CHECK_THROWS_AS(s.validate(3), InputError);
    s.test = {};
    CHECK_THROWS_AS(s.validate(4), InputError);
    CHECK_NOTHROW(s.validate(3));
  }
}
