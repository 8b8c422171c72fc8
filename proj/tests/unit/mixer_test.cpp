#include <cactus/error.hpp>
#include <cactus/mixer.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"

namespace cactus {
namespace {

using MatD = MatrixX<double>;
using VecD = VectorX<double>;

MatD random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2 * uniform_unit(rng) - 1);
  return m;
}

void set_output_bias(DenseNet<double>& net, int row, double value) {
  net.mutable_parameters()[net.bias_offset(net.layer_count() - 1) + row] = value;
}

TEST(Mixer, IdentityMixingSumsUtilities) {
  const MixerShape shape{3, 5, 4, 6};
  MixerNet<double> mixer(shape, MixingActivation::Identity);
  for (int i = 0; i < shape.agents; ++i) set_output_bias(mixer.mutable_hypernet(0), i * shape.embed, 1.0);
  set_output_bias(mixer.mutable_hypernet(2), 0, 1.0);
  Rng rng = derive_rng({1});
  const MatD q = random_matrix(3, 20, rng, 50.0);
  const MatD s = random_matrix(5, 20, rng);
  const auto out = mixer.predict(q, s);
  for (Eigen::Index c = 0; c < q.cols(); ++c) EXPECT_NEAR(out(c), q.col(c).sum(), 1e-12);
}

TEST(Mixer, NegativeHyperOutputsStillMixMonotonically) {
  const MixerShape shape{2, 3, 2, 4};
  MixerNet<double> mixer(shape, MixingActivation::Identity);
  set_output_bias(mixer.mutable_hypernet(0), 0, -2.0);             // |W1| = 2 for agent 0
  set_output_bias(mixer.mutable_hypernet(0), shape.embed, -3.0);   // |W1| = 3 for agent 1
  set_output_bias(mixer.mutable_hypernet(2), 0, -1.0);
  MatD q(2, 1);
  q << 1.0, 1.0;
  EXPECT_NEAR(mixer.predict(q, MatD::Zero(3, 1))(0), 5.0, 1e-12);
}

TEST(Mixer, MonotoneInEveryUtility) {
  const MixerShape shape{4, 9, 8, 16};
  Rng rng = derive_rng({2});
  const auto mixer = MixerNet<double>::initialized(shape, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    const MatD q = random_matrix(4, 1, rng, 5.0);
    const MatD s = random_matrix(9, 1, rng);
    const double base = mixer.predict(q, s)(0);
    const int i = uniform_index(rng, 4);
    MatD up = q;
    up(i, 0) += 0.5 * uniform_unit(rng);
    EXPECT_GE(mixer.predict(up, s)(0), base - 1e-12);

    auto tape = mixer.forward(q, s);
    const auto g = mixer.backward(tape, MixerNet<double>::RowVector::Ones(1));
    EXPECT_GE(g.utilities.minCoeff(), 0.0);
  }
}

TEST(Mixer, JointArgmaxEqualsLocalArgmaxes) {
  const MixerShape shape{2, 9, 8, 16};
  Rng rng = derive_rng({3});
  for (int trial = 0; trial < 200; ++trial) {
    const auto mixer = MixerNet<double>::initialized(shape, rng);
    const MatD local = random_matrix(2, 5, rng, 3.0);  // Q_i(a) for a in 0..4
    const MatD s = random_matrix(9, 1, rng);
    MatD joint(2, 25);
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        joint(0, a * 5 + b) = local(0, a);
        joint(1, a * 5 + b) = local(1, b);
      }
    }
    const auto values = mixer.predict(joint, s.replicate(1, 25));
    Eigen::Index best = 0;
    values.maxCoeff(&best);
    Eigen::Index a0 = 0, a1 = 0;
    local.row(0).maxCoeff(&a0);
    local.row(1).maxCoeff(&a1);
    EXPECT_EQ(best, a0 * 5 + a1);
  }
}

TEST(Mixer, GradientsMatchFiniteDifferences) {
  const MixerShape shape{3, 4, 5, 6};
  for (int act = 0; act < 2; ++act) {
    const auto activation = act == 0 ? MixingActivation::Elu : MixingActivation::Identity;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng = derive_rng({seed, 4});
      MixerNet<double> mixer = MixerNet<double>::initialized(shape, rng, activation);
      VecD p = mixer.parameters();
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.2 * (2 * uniform_unit(rng) - 1);
      mixer.set_parameters(p);
      const MatD q = random_matrix(3, 4, rng, 2.0);
      const MatD s = random_matrix(4, 4, rng);
      const MixerNet<double>::RowVector w = random_matrix(1, 4, rng);

      auto tape = mixer.forward(q, s);
      const auto g = mixer.backward(tape, w);

      MixerNet<double> probe = mixer;
      const auto by_params = [&](const VecD& theta) {
        probe.set_parameters(theta);
        return (probe.predict(q, s).array() * w.array()).sum();
      };
      EXPECT_LE(testing::relative_error(g.parameters, testing::numeric_gradient(by_params, p)),
                1e-4);

      const auto by_utils = [&](const VecD& flat) {
        const MatD u = Eigen::Map<const MatD>(flat.data(), 3, 4);
        return (mixer.predict(u, s).array() * w.array()).sum();
      };
      const VecD flat = Eigen::Map<const VecD>(q.data(), q.size());
      const VecD analytic = Eigen::Map<const VecD>(g.utilities.data(), g.utilities.size());
      EXPECT_LE(testing::relative_error(analytic, testing::numeric_gradient(by_utils, flat)), 1e-4);
    }
  }
}

TEST(Mixer, ParameterPackingRoundTrips) {
  const MixerShape shape{8, 33, 32, 128};
  Rng rng = derive_rng({5});
  const auto mixer = MixerNet<float>::initialized(shape, rng);
  const std::int64_t expected = dense_parameter_count({33, 128, 128, 256}) +
                                2 * dense_parameter_count({33, 128, 128, 32}) +
                                dense_parameter_count({33, 128, 128, 1});
  EXPECT_EQ(mixer.parameter_count(), expected);
  MixerNet<float> copy(shape);
  copy.set_parameters(mixer.parameters());
  EXPECT_EQ(copy.parameters(), mixer.parameters());
  EXPECT_THROW(copy.set_parameters(VectorX<float>::Zero(3)), ContractError);
}

TEST(Mixer, RejectsBadShapesAndReusedTapes) {
  const MixerShape shape{2, 3, 2, 4};
  const MixerNet<double> mixer(shape);
  EXPECT_THROW(mixer.forward(MatD::Zero(3, 1), MatD::Zero(3, 1)), ContractError);
  EXPECT_THROW(mixer.forward(MatD::Zero(2, 1), MatD::Zero(4, 1)), ContractError);
  EXPECT_THROW(mixer.forward(MatD::Zero(2, 2), MatD::Zero(3, 1)), ContractError);
  auto tape = mixer.forward(MatD::Zero(2, 1), MatD::Zero(3, 1));
  mixer.backward(tape, MixerNet<double>::RowVector::Ones(1));
  EXPECT_THROW(mixer.backward(tape, MixerNet<double>::RowVector::Ones(1)), ContractError);
}

}  // namespace
}  // namespace cactus
