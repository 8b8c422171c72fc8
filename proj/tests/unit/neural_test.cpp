#include <cactus/error.hpp>
#include <cactus/neural.hpp>
#include <cmath>
#include <gtest/gtest.h>
#include <limits>

#include "oracles.hpp"

namespace cactus {
namespace {

using MatD = MatrixX<double>;
using VecD = VectorX<double>;

MatD random_matrix(int rows, int cols, Rng& rng) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2 * uniform_unit(rng) - 1;
  return m;
}

TEST(DenseNet, ZeroNetOutputsZero) {
  const DenseNet<double> net({6, 4, 3}, OutputHead::Linear);
  Rng rng = derive_rng({1});
  const MatD out = net.predict(random_matrix(6, 5, rng));
  EXPECT_TRUE(out.isZero(0.0));
}

TEST(DenseNet, SoftmaxOfEqualLogitsIsUniform) {
  const DenseNet<double> net({6, 4, 5}, OutputHead::Softmax);
  Rng rng = derive_rng({2});
  const MatD out = net.predict(random_matrix(6, 3, rng));
  for (Eigen::Index i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out.data()[i], 0.2);
}

TEST(DenseNet, SoftmaxIsPositiveAndNormalised) {
  Rng rng = derive_rng({3});
  const auto net = DenseNet<double>::initialized({10, 16, 5}, OutputHead::Softmax, rng);
  const MatD out = net.predict(10.0 * random_matrix(10, 200, rng));
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    EXPECT_NEAR(out.col(c).sum(), 1.0, 1e-9);
    EXPECT_GT(out.col(c).minCoeff(), 0.0);
  }
}

TEST(DenseNet, IdentityLayer) {
  DenseNet<double> net({3, 3}, OutputHead::Linear);
  VecD p = VecD::Zero(net.parameter_count());
  for (int i = 0; i < 3; ++i) p[i * 3 + i] = 1.0;
  net.set_parameters(p);
  Rng rng = derive_rng({4});
  const MatD x = random_matrix(3, 4, rng);
  EXPECT_EQ(net.predict(x), x);
}

TEST(DenseNet, ScalarDerivatives) {
  DenseNet<double> net({1, 1}, OutputHead::Linear);
  net.set_parameters(VecD::Constant(2, 0.0));
  net.mutable_parameters()[0] = 1.5;  // w
  MatD x(1, 1);
  x(0, 0) = -0.7;
  auto tape = net.forward(x);
  EXPECT_DOUBLE_EQ(tape.output()(0, 0), 1.5 * -0.7);
  const auto g = net.backward(tape, MatD::Ones(1, 1), true);
  EXPECT_DOUBLE_EQ(g.parameters[0], -0.7);  // dw = x
  EXPECT_DOUBLE_EQ(g.parameters[1], 1.0);   // db
  EXPECT_DOUBLE_EQ(g.input(0, 0), 1.5);     // dx = w
}

TEST(DenseNet, EluAndDerivative) {
  EXPECT_EQ(elu(2.0), 2.0);
  EXPECT_DOUBLE_EQ(elu(-1.0), std::exp(-1.0) - 1.0);
  EXPECT_EQ(elu_derivative_from_output(3.0, elu(3.0)), 1.0);
  for (double x : {-3.0, -0.5, -1e-3}) {
    EXPECT_NEAR(elu_derivative_from_output(x, elu(x)), std::exp(x), 1e-15);
  }
}

TEST(DenseNet, ParameterCountIsAFunctionOfShape) {
  EXPECT_EQ(dense_parameter_count({245, 64, 64, 5}), 245 * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
  const DenseNet<float> net({245, 64, 64, 5}, OutputHead::Softmax);
  EXPECT_EQ(net.parameter_count(), dense_parameter_count(net.widths()));
  EXPECT_EQ(net.bias_offset(0), 245 * 64);
  EXPECT_EQ(net.weight_offset(1), 245 * 64 + 64);
}

TEST(DenseNet, GlorotRange) {
  Rng rng = derive_rng({5});
  const auto net = DenseNet<double>::initialized({30, 20, 4}, OutputHead::Linear, rng);
  EXPECT_LE(net.weight(0).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 50));
  EXPECT_LE(net.weight(1).cwiseAbs().maxCoeff(), std::sqrt(6.0 / 24));
  EXPECT_TRUE(net.bias(0).isZero(0.0));
  EXPECT_TRUE(net.bias(1).isZero(0.0));
}

// Loss L = sum(G .* f(X)) for a fixed random G; compare dL/dtheta and dL/dX
// against central differences.
void check_gradients(const std::vector<int>& widths, OutputHead head, std::uint64_t seed) {
  Rng rng = derive_rng({seed});
  DenseNet<double> net = DenseNet<double>::initialized(widths, head, rng);
  VecD p = net.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.1 * (2 * uniform_unit(rng) - 1);
  net.set_parameters(p);
  const MatD x = random_matrix(widths.front(), 3, rng);
  const MatD weights = random_matrix(widths.back(), 3, rng);

  auto tape = net.forward(x);
  const auto analytic = net.backward(tape, weights, true);

  DenseNet<double> probe = net;
  const auto loss_of_params = [&](const VecD& theta) {
    probe.set_parameters(theta);
    return (probe.predict(x).array() * weights.array()).sum();
  };
  const VecD numeric = testing::numeric_gradient(loss_of_params, p);
  EXPECT_LE(testing::relative_error(analytic.parameters, numeric), 1e-4) << "seed " << seed;

  const auto loss_of_input = [&](const VecD& flat) {
    const MatD in = Eigen::Map<const MatD>(flat.data(), x.rows(), x.cols());
    return (net.predict(in).array() * weights.array()).sum();
  };
  const VecD flat = Eigen::Map<const VecD>(x.data(), x.size());
  const VecD numeric_x = testing::numeric_gradient(loss_of_input, flat);
  const VecD analytic_x = Eigen::Map<const VecD>(analytic.input.data(), analytic.input.size());
  EXPECT_LE(testing::relative_error(analytic_x, numeric_x), 1e-4) << "seed " << seed;
}

TEST(DenseNet, GradientsMatchFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    check_gradients({7, 9, 6, 5}, OutputHead::Softmax, s);
    check_gradients({7, 9, 6, 1}, OutputHead::Linear, 100 + s);
  }
}

TEST(DenseNet, StaleTapeIsRejected) {
  Rng rng = derive_rng({6});
  DenseNet<double> net = DenseNet<double>::initialized({3, 4, 2}, OutputHead::Linear, rng);
  const MatD x = random_matrix(3, 2, rng);
  const MatD g = MatD::Ones(2, 2);

  auto tape = net.forward(x);
  net.backward(tape, g);
  EXPECT_THROW(net.backward(tape, g), ContractError);  // consumed

  auto before_update = net.forward(x);
  net.mutable_parameters()[0] += 1.0;
  EXPECT_THROW(net.backward(before_update, g), ContractError);

  const DenseNet<double> other = net;
  auto foreign = other.forward(x);
  EXPECT_THROW(net.backward(foreign, g), ContractError);

  auto fresh = net.forward(x);
  EXPECT_THROW(net.backward(fresh, MatD::Ones(3, 2)), ContractError);
}

TEST(DenseNet, RejectsBadInput) {
  const DenseNet<double> net({3, 2}, OutputHead::Linear);
  EXPECT_THROW(net.predict(MatD::Zero(4, 1)), ContractError);
  MatD x = MatD::Zero(3, 1);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(net.predict(x), ContractError);
  x(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(net.forward(x), ContractError);
}

TEST(DenseNet, ColumnsDoNotDependOnBatchSize) {
  Rng rng = derive_rng({7});
  const auto net = DenseNet<float>::initialized({245, 64, 64, 5}, OutputHead::Softmax, rng);
  MatrixX<float> x(245, 37);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = uniform_unit(rng) < 0.7 ? 0.0f : static_cast<float>(uniform_unit(rng));
  }
  const MatrixX<float> batch = net.predict(x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const MatrixX<float> single = net.predict(x.col(c));
    for (int r = 0; r < 5; ++r) EXPECT_EQ(single(r, 0), batch(r, c));
  }
}

TEST(DenseNet, CastPreservesValues) {
  Rng rng = derive_rng({8});
  const auto net = DenseNet<double>::initialized({4, 3, 2}, OutputHead::Softmax, rng);
  const DenseNet<float> f = net.cast<float>();
  EXPECT_EQ(f.widths(), net.widths());
  EXPECT_EQ(f.head(), OutputHead::Softmax);
  EXPECT_TRUE(f.parameters().cast<double>().isApprox(net.parameters(), 1e-6));
}

TEST(Adam, ZeroGradientLeavesParameters) {
  VecD p = VecD::LinSpaced(5, -1, 1);
  const VecD before = p;
  auto opt = AdamState<double>::for_size(5);
  for (int i = 0; i < 10; ++i) adam_step(p, VecD(VecD::Zero(5)), opt);
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step, 10);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  VecD p = VecD::Zero(4);
  VecD g(4);
  g << 3.0, -0.5, 1e-3, -200.0;
  auto opt = AdamState<double>::for_size(4, 1e-3);
  adam_step(p, g, opt);
  for (int i = 0; i < 4; ++i) {
    // m_hat = g, v_hat = g^2 after bias correction.
    const double expected = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(p[i], expected, 1e-15);
    EXPECT_NEAR(p[i], g[i] > 0 ? -1e-3 : 1e-3, 1e-7);
  }
}

TEST(Adam, ConstantGradientMovesAgainstItsSign) {
  VecD p = VecD::Zero(2);
  VecD g(2);
  g << 0.3, -2.0;
  auto opt = AdamState<double>::for_size(2, 1e-2);
  for (int i = 0; i < 100; ++i) adam_step(p, g, opt);
  EXPECT_NEAR(p[0], -1.0, 1e-6);  // every step is exactly lr once moments agree with g
  EXPECT_NEAR(p[1], 1.0, 1e-6);
}

TEST(Adam, RejectsNonFiniteAndMismatchedGradients) {
  VecD p = VecD::Ones(3);
  auto opt = AdamState<double>::for_size(3);
  VecD g = VecD::Ones(3);
  g[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(p, g, opt), ContractError);
  EXPECT_EQ(opt.step, 0);
  EXPECT_EQ(p, VecD::Ones(3));
  EXPECT_TRUE(opt.first_moment.isZero(0.0));
  EXPECT_THROW(adam_step(p, VecD(VecD::Ones(2)), opt), ContractError);
}

TEST(Adam, Defaults) {
  const auto opt = AdamState<float>::for_size(1);
  EXPECT_EQ(opt.learning_rate, 1e-3);
  EXPECT_EQ(opt.beta1, 0.9);
  EXPECT_EQ(opt.beta2, 0.999);
  EXPECT_EQ(opt.epsilon, 1e-8);
}

}  // namespace
}  // namespace cactus
