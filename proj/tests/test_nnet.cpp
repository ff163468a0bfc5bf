#include "selbias/core.hpp"
#include "fixtures.hpp"
#include "selbias/nnet.hpp"
#include "selbias/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace selbias;

namespace {


double manual_forward(const Mlp& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Eigen::VectorXd z = net.weight(l) * a + net.bias(l);
    if (l + 1 < net.num_layers()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std::tanh(z(i));
    }
    a = z;
  }
  return a(0);
}

}  // namespace

TEST(Mlp, ForwardMatchesManual) {
  Mlp net({3, 5, 4, 1}, Activation::Tanh, 7);
  RngStream r(1);
  const Eigen::MatrixXd in = fixtures::random_input(3, 6, r);
  const Eigen::MatrixXd out = net.forward(in);
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(out(0, j), manual_forward(net, in.col(j)), 1e-14);
}

TEST(Mlp, LayoutAndInit) {
  Mlp net({2, 64, 64, 1}, Activation::Softplus, 3);
  EXPECT_EQ(net.num_params(), 64 * 3 + 64 * 65 + 65);
  EXPECT_EQ(net.bias(0).norm(), 0.0);
  const double bound = std::sqrt(6.0 / 66.0);
  EXPECT_LE(net.weight(0).cwiseAbs().maxCoeff(), bound);
  Mlp same({2, 64, 64, 1}, Activation::Softplus, 3);
  EXPECT_EQ(net.params(), same.params());
  net.zero_output_layer();
  EXPECT_EQ(net.forward(std::vector<double>{0.3, -1.0})[0], 0.0);
  EXPECT_THROW(Mlp({3}, Activation::Tanh, 0), ConfigError);
}

TEST(Mlp, InputGradientMatchesDifferences) {
  Mlp net({2, 8, 1}, Activation::Softplus, 5);
  RngStream r(2);
  const Eigen::MatrixXd in = fixtures::random_input(2, 4, r);
  Mlp::Cache cache;
  (void)net.forward(in, &cache);
  const Eigen::MatrixXd g = net.input_gradient(cache, Eigen::MatrixXd::Ones(1, 4));
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 2; ++i) {
      Eigen::MatrixXd p = in, m = in;
      p(i, j) += h;
      m(i, j) -= h;
      EXPECT_NEAR(g(i, j), (net.forward(p)(0, j) - net.forward(m)(0, j)) / (2 * h), 1e-7);
    }
  }
}

TEST(Tape, UnsupportedPrimitive) {
  Tape t;
  const auto c = t.constant(Eigen::ArrayXd::Ones(3));
  EXPECT_THROW(t.unary("cosh", c), std::invalid_argument);
}

TEST(Tape, ScalarValuesOfPrimitives) {
  Tape t;
  Eigen::ArrayXd v(3);
  v << 1.0, 2.0, 3.0;
  const auto a = t.constant(v);
  EXPECT_DOUBLE_EQ(t.scalar(t.mean(a)), 2.0);
  EXPECT_DOUBLE_EQ(t.scalar(t.sum(t.unary("square", a))), 14.0);
  EXPECT_DOUBLE_EQ(t.scalar(t.sum(t.shift(t.scale(a, 2.0), 1.0))), 15.0);
  Eigen::ArrayXd w(4);
  w << 1, 2, 3, 4;
  const auto g = t.group_sum(t.constant(w), 2);
  EXPECT_DOUBLE_EQ(t.value(g)(0), 3.0);
  EXPECT_DOUBLE_EQ(t.value(g)(1), 7.0);
}

TEST(Tape, DyOfNetMatchesInputGradient) {
  Mlp net({2, 16, 1}, Activation::Softplus, 9);
  RngStream r(3);
  const Eigen::MatrixXd in = fixtures::random_input(2, 5, r);
  Tape t;
  const auto d = d_dy(t, net_fn(net), in, 1);
  Mlp::Cache cache;
  (void)net.forward(in, &cache);
  const Eigen::MatrixXd g = net.input_gradient(cache, Eigen::MatrixXd::Ones(1, 5));
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(t.value(d)(j), g(1, j), 1e-6);
}

TEST(Tape, SecondDifferenceOfQuadratic) {
  // f(x, y) = y^2 via a constant-free tape function.
  TapeFn f = [](Tape& t, const Eigen::MatrixXd& in) {
    return t.unary("square", t.constant(in.row(1).transpose().array()));
  };
  Eigen::MatrixXd in(2, 3);
  in << 0, 0, 0, -1, 0.5, 4;
  Tape t;
  const TapeFn df = [&](Tape& tt, const Eigen::MatrixXd& m) { return d_dy(tt, f, m, 1); };
  const auto d2 = d_dy(t, df, in, 1);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(t.value(d2)(j), 2.0, 1e-6);
}

TEST(Gradients, RandomNetsAndLosses) {
  EXPECT_LT(fixtures::worst_gradient_error(2025, 20), 1e-4);
}

TEST(Gradients, TwoNetsOnOneTape) {
  Mlp a({1, 4, 1}, Activation::Tanh, 1), b({1, 4, 1}, Activation::Tanh, 2);
  Eigen::MatrixXd in(1, 3);
  in << -1, 0, 1;
  Tape t;
  const auto loss = t.mean(t.mul(t.net(a, in), t.net(b, in)));
  const Mlp* nets[] = {&a, &b};
  const auto grads = t.backward(loss, nets);
  ASSERT_EQ(grads.size(), 2u);
  EXPECT_EQ(grads[0].size(), a.num_params());
  EXPECT_GT(grads[1].norm(), 0.0);
  const Mlp c({1, 2, 1}, Activation::Tanh, 3);
  EXPECT_EQ(param_gradients(t, loss, c).norm(), 0.0);
}

TEST(Adam, MinimizesQuadratic) {
  Eigen::VectorXd p(2);
  p << 3.0, -4.0;
  Adam opt(2, 0.1);
  for (int i = 0; i < 2000; ++i) opt.step(p, 2.0 * p);
  EXPECT_LT(p.norm(), 1e-3);
  Eigen::VectorXd q = p;
  Adam frozen(2, 0.0);
  frozen.step(q, Eigen::VectorXd::Ones(2));
  EXPECT_EQ(q, p);
}
