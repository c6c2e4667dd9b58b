#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "zcap/gradcheck.hpp"
#include "zcap/gradsuite.hpp"
#include "zcap/ops.hpp"
#include "zcap/optimizer.hpp"

using namespace zcap;

TEST_CASE("matmul identity and hand arithmetic") {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor prod = ops::matmul(eye, a);
  for (size_t i = 0; i < 4; ++i) CHECK(prod.v[i] == a.v[i]);

  const Tensor b = Tensor::from({2, 1}, {1, 1});
  const Tensor c = ops::matmul(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(3.0));
  CHECK(c.at(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(ops::matmul(a, b), std::invalid_argument);
}

TEST_CASE("softmax uniform rows and shift invariance") {
  const Tensor logits = Tensor::full({1, 4}, 0.7);
  const Tensor probs = ops::softmax_rows(logits);
  for (size_t j = 0; j < 4; ++j) CHECK(probs.at(0, j) == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(3);
  Tensor x = Tensor::randn({2, 6}, rng);
  Tensor shifted = x;
  for (double& v : shifted.v) v += 1000.0;
  const Tensor y1 = ops::softmax_rows(x);
  const Tensor y2 = ops::softmax_rows(shifted);
  for (size_t i = 0; i < y1.size(); ++i) CHECK(y1.v[i] == doctest::Approx(y2.v[i]).epsilon(1e-12));
  for (size_t i = 0; i < 2; ++i) {
    double row = 0.0;
    for (size_t j = 0; j < 6; ++j) row += y1.at(i, j);
    CHECK(std::abs(row - 1.0) < 1e-12);
  }
}

TEST_CASE("layer_norm constant input gives bias, unit variance otherwise") {
  const Tensor gain = Tensor::full({3}, 1.0);
  const Tensor bias = Tensor::from({3}, {0.5, -1.0, 2.0});
  const Tensor constant = Tensor::full({2, 3}, 4.2);
  const Tensor out = ops::layer_norm(constant, gain, bias, nullptr);
  for (size_t i = 0; i < 2; ++i)
    for (size_t j = 0; j < 3; ++j) CHECK(out.at(i, j) == doctest::Approx(bias[j]).epsilon(1e-6));

  const Tensor x = Tensor::from({1, 3}, {1, 2, 3});
  const Tensor zero_bias = Tensor::zeros({3});
  const Tensor normed = ops::layer_norm(x, gain, zero_bias, nullptr);
  double mean = 0.0, var = 0.0;
  for (size_t j = 0; j < 3; ++j) mean += normed.at(0, j) / 3.0;
  for (size_t j = 0; j < 3; ++j) var += normed.at(0, j) * normed.at(0, j) / 3.0;
  CHECK(std::abs(mean) < 1e-10);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cross_entropy analytic values") {
  // one position strongly favoring the target -> loss near 0
  Tensor logits = Tensor::zeros({1, 5});
  logits.at(0, 2) = 60.0;
  CHECK(ops::cross_entropy(logits, {2}, {1}) == doctest::Approx(0.0).epsilon(1e-12));

  // uniform logits over V classes -> ln V
  const Tensor uniform = Tensor::zeros({3, 7});
  CHECK(ops::cross_entropy(uniform, {0, 3, 6}, {1, 1, 1}) == doctest::Approx(std::log(7.0)));

  // all-zero mask -> 0
  CHECK(ops::cross_entropy(uniform, {0, 3, 6}, {0, 0, 0}) == 0.0);

  // brute-force recomputation on a random case
  Rng rng(11);
  const Tensor rl = Tensor::randn({4, 6}, rng);
  const std::vector<int> targets = {5, 1, 0, 2};
  const std::vector<uint8_t> mask = {1, 1, 0, 1};
  double expect = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < 4; ++i) {
    if (!mask[i]) continue;
    double denom = 0.0;
    for (size_t j = 0; j < 6; ++j) denom += std::exp(rl.at(i, j));
    expect -= std::log(std::exp(rl.at(i, targets[i])) / denom);
    ++used;
  }
  expect /= static_cast<double>(used);
  CHECK(ops::cross_entropy(rl, targets, mask) == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS(ops::cross_entropy(rl, {9, 1, 0, 2}, mask));
}

TEST_CASE("adam: zero gradient is identity, first step moves by about lr") {
  Parameter p("w", Tensor::from({1}, {5.0}));
  OptimizerConfig cfg;
  cfg.learning_rate = 0.01;
  adam_step({&p}, cfg);
  CHECK(p.value[0] == 5.0);  // zero grad

  // fresh parameter: bias-corrected first step moves by about lr
  Parameter q("w2", Tensor::from({1}, {5.0}));
  q.grad[0] = 1.0;
  adam_step({&q}, cfg);
  CHECK(q.value[0] == doctest::Approx(5.0 - 0.01).epsilon(1e-4));
  CHECK(q.grad[0] == 0.0);  // gradients zeroed after the step
}

TEST_CASE("adam with learning_rate 0 is the identity on values") {
  Rng rng(5);
  Parameter p("w", Tensor::randn({4, 4}, rng));
  const Tensor before = p.value;
  p.grad = Tensor::randn({4, 4}, rng);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.0;
  adam_step({&p}, cfg);
  for (size_t i = 0; i < before.size(); ++i) CHECK(p.value.v[i] == before.v[i]);
}

TEST_CASE("adam descends on a quadratic") {
  Parameter x("x", Tensor::from({1}, {5.0}));
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  for (int step = 0; step < 100; ++step) {
    x.grad[0] = 2.0 * x.value[0];  // d/dx x^2
    adam_step({&x}, cfg);
  }
  CHECK(std::abs(x.value[0]) < 5.0);
}

TEST_CASE("global norm clipping") {
  Parameter a("a", Tensor::from({2}, {0.0, 0.0}));
  a.grad = Tensor::from({2}, {3.0, 4.0});
  const double norm = clip_global_norm({&a}, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(std::sqrt(a.grad[0] * a.grad[0] + a.grad[1] * a.grad[1]) == doctest::Approx(1.0));
}

TEST_CASE("grad_check is exact on a linear loss and detects corruption") {
  Rng rng(7);
  Parameter w("w", Tensor::randn({6}, rng));
  const Tensor x = Tensor::randn({6}, rng);
  w.grad = x;  // analytic gradient of w.x
  Rng coords(1);
  const auto report = grad_check([&] { return ops::dot(w.value, x); }, {&w}, coords, 6);
  CHECK(report.max_rel_err < 1e-9);

  w.grad = x;
  w.grad[2] += 0.5;  // deliberately corrupted backward
  Rng coords2(1);
  const auto bad = grad_check([&] { return ops::dot(w.value, x); }, {&w}, coords2, 6);
  CHECK(bad.max_rel_err > 1e-4);
}

TEST_CASE("gradient suite passes at stated tolerances") {
  const GradSuiteResult result = run_gradient_suite(123);
  for (const auto& row : result.rows) {
    INFO(row.name, " err=", row.max_rel_err);
    CHECK(row.max_rel_err < row.tolerance);
  }
}

TEST_CASE("ops keep finite inputs finite") {
  Rng rng(9);
  Tensor big = Tensor::randn({3, 8}, rng, 50.0);
  CHECK(ops::all_finite(ops::softmax_rows(big)));
  CHECK(ops::all_finite(ops::gelu(big)));
  const Tensor gain = Tensor::full({8}, 1.0);
  const Tensor bias = Tensor::zeros({8});
  CHECK(ops::all_finite(ops::layer_norm(big, gain, bias, nullptr)));
}
