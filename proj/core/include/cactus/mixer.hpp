#pragma once

#include <Eigen/Core>

#include "cactus/neural.hpp"
#include "cactus/rng.hpp"

namespace cactus {

enum class MixingActivation : std::uint8_t { Elu = 0, Identity = 1 };

struct MixerShape {
  int agents = 8;
  int state_size = 33;
  int embed = 32;
  int hypernet_hidden = 128;
};

// Monotonic factorization operator. Four hypernetworks map the global state to
// the weights and biases of a one-hidden-layer mixing network over the agents'
// chosen-action utilities:
//
//   h     = act(|W1(s)| q + b1(s))        W1: embed x agents
//   Q_tot = |w2(s)|^T h + b2(s)
//
// Absolute values keep every mixing weight non-negative, so Q_tot is
// non-decreasing in each utility.
template <typename Scalar>
class MixerNet {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  struct Tape {
    GradientTape<Scalar> w1_tape, b1_tape, w2_tape, b2_tape;
    Matrix utilities;  // agents x batch
    Matrix hidden_post;
    bool consumed = false;
  };

  struct Gradients {
    Vector parameters;  // same layout as parameters()
    Matrix utilities;   // agents x batch
  };

  MixerNet() = default;
  explicit MixerNet(MixerShape shape, MixingActivation activation = MixingActivation::Elu);
  static MixerNet initialized(MixerShape shape, Rng& rng,
                              MixingActivation activation = MixingActivation::Elu);

  const MixerShape& shape() const noexcept { return shape_; }
  MixingActivation activation() const noexcept { return activation_; }

  Tape forward(const Matrix& utilities, const Matrix& states) const;
  RowVector predict(const Matrix& utilities, const Matrix& states) const;
  static RowVector output(const Tape& tape);
  Gradients backward(Tape& tape, const RowVector& output_gradient) const;

  // Hypernetworks in packing order: W1, b1, w2, b2.
  const DenseNet<Scalar>& hypernet(int which) const { return nets_[which]; }
  DenseNet<Scalar>& mutable_hypernet(int which) { return nets_[which]; }

  Eigen::Index parameter_count() const noexcept;
  Vector parameters() const;
  void set_parameters(const Vector& params);

  template <typename Other>
  MixerNet<Other> cast() const {
    MixerNet<Other> out(shape_, activation_);
    out.set_parameters(parameters().template cast<Other>());
    return out;
  }

 private:
  MixerShape shape_;
  MixingActivation activation_ = MixingActivation::Elu;
  DenseNet<Scalar> nets_[4];
};

}  // namespace cactus
