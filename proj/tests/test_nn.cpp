#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "ganomaly/nn.hpp"
#include "ganomaly/rng.hpp"

using namespace ganomaly;

namespace {

// Scalar probe loss L = sum(w .* y) with fixed random w: its dL/dy is w,
// which exercises the full backward of a layer against central differences.
struct GradCheck {
  Tensor<double> w;

  explicit GradCheck(const std::vector<int64_t>& out_shape) : w(out_shape) {
    Rng rng(991);
    rng.fill_normal(w, 0, 1);
  }

  double loss(const Tensor<double>& y) const {
    double s = 0;
    for (int64_t i = 0; i < y.numel(); ++i) s += w[i] * y[i];
    return s;
  }

  Tensor<double> dy() const { return w; }
};

// Central-difference gradient of loss(layer.forward(x)) w.r.t. a tensor that
// fn perturbs. Every layer forward here is train-mode.
double fd_grad(std::function<double(double)> value_at, double x0, double eps = 1e-6) {
  return (value_at(x0 + eps) - value_at(x0 - eps)) / (2 * eps);
}

void check_input_grad(nn::Layer<double>& layer, Tensor<double> x,
                      const std::vector<int64_t>& out_shape, double tol = 1e-6) {
  GradCheck probe(out_shape);
  Tensor<double> y = layer.forward(x, true);
  Tensor<double> dx = layer.backward(probe.dy(), true);
  REQUIRE(dx.shape() == x.shape());

  Rng pick(55);
  const int64_t checks = std::min<int64_t>(x.numel(), 40);
  for (int64_t t = 0; t < checks; ++t) {
    const int64_t i = pick.uniform_int(0, x.numel() - 1);
    const double fd = fd_grad(
        [&](double v) {
          Tensor<double> xp = x;
          xp[i] = v;
          return probe.loss(layer.forward(xp, true));
        },
        x[i]);
    CHECK(dx[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
  }
  // Restore the cache for the caller (x was re-forwarded during probing).
  layer.forward(x, true);
}

void check_param_grads(nn::Layer<double>& layer, Tensor<double> x,
                       const std::vector<int64_t>& out_shape, double tol = 1e-6) {
  GradCheck probe(out_shape);
  layer.forward(x, true);
  std::vector<nn::ParamRef<double>> ps;
  layer.params("", ps);
  for (auto& p : ps) p.grad->zero();
  layer.backward(probe.dy(), true);

  Rng pick(56);
  for (auto& p : ps) {
    CAPTURE(p.name);
    const int64_t checks = std::min<int64_t>(p.value->numel(), 25);
    for (int64_t t = 0; t < checks; ++t) {
      const int64_t i = pick.uniform_int(0, p.value->numel() - 1);
      const double orig = (*p.value)[i];
      const double fd = fd_grad(
          [&](double v) {
            (*p.value)[i] = v;
            const double L = probe.loss(layer.forward(x, true));
            (*p.value)[i] = orig;
            return L;
          },
          orig);
      CHECK((*p.grad)[i] == doctest::Approx(fd).epsilon(tol).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("Conv2d gradients match finite differences") {
  nn::Conv2d<double> conv(3, 4, 4, 2, 1);
  Rng rng(1);
  conv.init(rng);
  Tensor<double> x({2, 3, 8, 8});
  rng.fill_normal(x, 0, 1);
  check_input_grad(conv, x, {2, 4, 4, 4});
  check_param_grads(conv, x, {2, 4, 4, 4});
}

TEST_CASE("Conv2d with bias accumulates bias gradient") {
  nn::Conv2d<double> conv(2, 3, 3, 1, 1, /*bias=*/true);
  Rng rng(2);
  conv.init(rng);
  Tensor<double> x({2, 2, 5, 5});
  rng.fill_normal(x, 0, 1);
  check_param_grads(conv, x, {2, 3, 5, 5});
}

TEST_CASE("Conv2d rejects wrong channel count and bad geometry") {
  nn::Conv2d<float> conv(3, 4, 4, 2, 1);
  CHECK_THROWS_AS(conv.forward(Tensor<float>({2, 2, 8, 8}), true), ShapeError);
  CHECK_THROWS_AS(conv.forward(Tensor<float>({2, 3, 7, 7}), true), ShapeError);
}

TEST_CASE("ConvTranspose2d gradients match finite differences") {
  nn::ConvTranspose2d<double> convt(4, 3, 4, 2, 1);
  Rng rng(3);
  convt.init(rng);
  Tensor<double> x({2, 4, 4, 4});
  rng.fill_normal(x, 0, 1);
  check_input_grad(convt, x, {2, 3, 8, 8});
  check_param_grads(convt, x, {2, 3, 8, 8});
}

TEST_CASE("ConvTranspose2d doubles spatial size with the DCGAN geometry") {
  nn::ConvTranspose2d<float> convt(8, 4, 4, 2, 1);
  Rng rng(4);
  convt.init(rng);
  Tensor<float> x({1, 8, 4, 4});
  Tensor<float> y = convt.forward(x, true);
  CHECK(y.shape() == std::vector<int64_t>{1, 4, 8, 8});
}

TEST_CASE("BatchNorm2d gradients match finite differences") {
  nn::BatchNorm2d<double> bn(3);
  Rng rng(5);
  bn.init(rng);
  Tensor<double> x({4, 3, 3, 3});
  rng.fill_normal(x, 0.5, 2.0);
  check_input_grad(bn, x, {4, 3, 3, 3}, 1e-5);
  check_param_grads(bn, x, {4, 3, 3, 3}, 1e-5);
}

TEST_CASE("BatchNorm2d refuses backward without a train forward") {
  nn::BatchNorm2d<float> bn(2);
  Tensor<float> x({2, 2, 2, 2});
  x.fill(1.0f);
  bn.forward(x, false);  // eval mode caches nothing
  CHECK_THROWS_AS(bn.backward(x, true), Error);
}

TEST_CASE("BatchNorm2d train/eval modes differ and eval tracks running stats") {
  nn::BatchNorm2d<float> bn(1);
  Rng rng(6);
  Tensor<float> x({8, 1, 2, 2});
  rng.fill_normal(x, 3.0, 2.0);

  // Before any training step the running stats are (0, 1): eval is identity
  // times gamma plus beta, and gamma starts near 1, beta at 0.
  bn.init(rng);
  Tensor<float> y_eval = bn.forward(x, false);
  Tensor<float> y_train = bn.forward(x, true);
  double mean_train = 0;
  for (int64_t i = 0; i < y_train.numel(); ++i) mean_train += y_train[i];
  mean_train /= double(y_train.numel());
  CHECK(std::abs(mean_train) < 0.05);  // train output is centered
  double mean_eval = 0;
  for (int64_t i = 0; i < y_eval.numel(); ++i) mean_eval += y_eval[i];
  mean_eval /= double(y_eval.numel());
  CHECK(mean_eval > 1.0);  // eval before training kept the raw mean (~3)

  // Many train forwards pull the running stats toward the batch stats, so
  // eval output approaches the train output.
  for (int i = 0; i < 200; ++i) bn.forward(x, true);
  Tensor<float> y_eval2 = bn.forward(x, false);
  double m2 = 0;
  for (int64_t i = 0; i < y_eval2.numel(); ++i) m2 += y_eval2[i];
  m2 /= double(y_eval2.numel());
  CHECK(std::abs(m2) < 0.05);
}

TEST_CASE("activation layer gradients match finite differences") {
  Rng rng(7);
  Tensor<double> x({2, 3, 4, 4});
  rng.fill_normal(x, 0, 1.5);

  SUBCASE("LeakyReLU") {
    nn::LeakyReLU<double> l(0.2);
    check_input_grad(l, x, {2, 3, 4, 4});
  }
  SUBCASE("ReLU") {
    nn::ReLU<double> l;
    check_input_grad(l, x, {2, 3, 4, 4});
  }
  SUBCASE("Tanh") {
    nn::Tanh<double> l;
    check_input_grad(l, x, {2, 3, 4, 4});
  }
  SUBCASE("Sigmoid") {
    nn::Sigmoid<double> l;
    check_input_grad(l, x, {2, 3, 4, 4});
  }
}

TEST_CASE("Sequential chains forward/backward and prefixes parameter names") {
  nn::Sequential<double> seq;
  seq.add<nn::Conv2d<double>>(2, 4, 4, 2, 1);
  seq.add<nn::BatchNorm2d<double>>(4);
  seq.add<nn::LeakyReLU<double>>(0.2);
  Rng rng(8);
  seq.init(rng);

  std::vector<nn::ParamRef<double>> ps;
  seq.params("net.", ps);
  REQUIRE(ps.size() == 3);  // conv weight, bn gamma, bn beta
  CHECK(ps[0].name == "net.0.weight");
  CHECK(ps[1].name == "net.1.gamma");
  CHECK(ps[2].name == "net.1.beta");

  Tensor<double> x({3, 2, 8, 8});
  rng.fill_normal(x, 0, 1);
  Tensor<double> y = seq.forward(x, true);
  REQUIRE(y.shape() == std::vector<int64_t>{3, 4, 4, 4});

  GradCheck probe(y.shape());
  for (auto& p : ps) p.grad->zero();
  Tensor<double> dx = seq.backward(probe.dy(), true);

  Rng pick(9);
  for (int64_t t = 0; t < 20; ++t) {
    const int64_t i = pick.uniform_int(0, x.numel() - 1);
    const double fd = fd_grad(
        [&](double v) {
          Tensor<double> xp = x;
          xp[i] = v;
          return probe.loss(seq.forward(xp, true));
        },
        x[i]);
    CHECK(dx[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("param_grads=false leaves stored gradients untouched") {
  nn::Sequential<double> seq;
  seq.add<nn::Conv2d<double>>(2, 3, 4, 2, 1);
  seq.add<nn::BatchNorm2d<double>>(3);
  Rng rng(10);
  seq.init(rng);
  Tensor<double> x({2, 2, 8, 8});
  rng.fill_normal(x, 0, 1);
  Tensor<double> y = seq.forward(x, true);
  Tensor<double> dy(y.shape());
  rng.fill_normal(dy, 0, 1);

  std::vector<nn::ParamRef<double>> ps;
  seq.params("", ps);
  for (auto& p : ps) p.grad->zero();
  Tensor<double> dx_frozen = seq.backward(dy, false);
  for (auto& p : ps) {
    CAPTURE(p.name);
    for (int64_t i = 0; i < p.grad->numel(); ++i) CHECK((*p.grad)[i] == 0.0);
  }

  // The input gradient itself must be identical either way.
  seq.forward(x, true);
  Tensor<double> dx_full = seq.backward(dy, true);
  for (int64_t i = 0; i < dx_full.numel(); ++i) CHECK(dx_frozen[i] == dx_full[i]);
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  nn::Conv2d<double> conv(1, 2, 3, 1, 1);
  Rng rng(11);
  conv.init(rng);
  Tensor<double> x({1, 1, 4, 4});
  rng.fill_normal(x, 0, 1);
  Tensor<double> y = conv.forward(x, true);
  Tensor<double> dy(y.shape());
  dy.fill(1.0);

  std::vector<nn::ParamRef<double>> ps;
  conv.params("", ps);
  ps[0].grad->zero();
  conv.backward(dy, true);
  Tensor<double> once = *ps[0].grad;
  conv.forward(x, true);
  conv.backward(dy, true);
  for (int64_t i = 0; i < once.numel(); ++i)
    CHECK((*ps[0].grad)[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}
