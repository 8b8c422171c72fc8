#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "cactus/rng.hpp"

namespace cactus {

enum class OutputHead : std::uint8_t { Linear = 0, Softmax = 1 };

const char* output_head_name(OutputHead head) noexcept;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Intermediate activations of one forward pass; valid for a single backward
// call on the unmodified network that produced it.
template <typename Scalar>
struct GradientTape {
  MatrixX<Scalar> input;
  std::vector<MatrixX<Scalar>> activations;  // post-activation per layer, last = output
  const void* owner = nullptr;
  std::uint64_t version = 0;
  bool consumed = false;

  const MatrixX<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar>
struct DenseGradients {
  VectorX<Scalar> parameters;
  MatrixX<Scalar> input;  // empty unless requested
};

// Multilayer perceptron with ELU hidden units. Columns of every batch matrix
// are samples. Parameters live in one flat vector; per layer the weight block
// (out x in, column-major) is followed by the bias.
template <typename Scalar>
class DenseNet {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using WeightMap = Eigen::Map<const Matrix>;
  using BiasMap = Eigen::Map<const Vector>;

  DenseNet() = default;
  // `widths` = {input, hidden..., output}; parameters start at zero.
  DenseNet(std::vector<int> widths, OutputHead head);

  // Glorot-uniform weights, zero biases.
  static DenseNet initialized(std::vector<int> widths, OutputHead head, Rng& rng);

  const std::vector<int>& widths() const noexcept { return widths_; }
  OutputHead head() const noexcept { return head_; }
  int input_size() const noexcept { return widths_.front(); }
  int output_size() const noexcept { return widths_.back(); }
  int layer_count() const noexcept { return static_cast<int>(widths_.size()) - 1; }
  Eigen::Index parameter_count() const noexcept { return params_.size(); }

  const Vector& parameters() const noexcept { return params_; }
  void set_parameters(const Vector& params);
  // Mutable access; invalidates outstanding tapes.
  Vector& mutable_parameters() noexcept;

  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(widths_[layer + 1]) * widths_[layer];
  }
  WeightMap weight(int layer) const;
  BiasMap bias(int layer) const;

  GradientTape<Scalar> forward(const Matrix& input) const;
  Matrix predict(const Matrix& input) const;

  // Reverse-mode pass for d(loss)/d(output) = `output_gradient`. Consumes the tape.
  DenseGradients<Scalar> backward(GradientTape<Scalar>& tape, const Matrix& output_gradient,
                                  bool want_input_gradient = false) const;

  template <typename Other>
  DenseNet<Other> cast() const {
    DenseNet<Other> out(widths_, head_);
    out.set_parameters(params_.template cast<Other>());
    return out;
  }

  std::uint64_t version() const noexcept { return version_; }

 private:
  void run(const Matrix& input, std::vector<Matrix>& activations) const;

  std::vector<int> widths_;
  std::vector<Eigen::Index> offsets_;
  OutputHead head_ = OutputHead::Linear;
  Vector params_;
  std::uint64_t version_ = 0;
};

// Column-wise affine map Z = W X + b computed sample by sample, so each column
// is bit-identical regardless of batch size. Zero inputs are skipped.
template <typename Scalar>
void affine_columns(const Scalar* weights, const Scalar* bias, int out, int in,
                    const Scalar* input, Eigen::Index cols, Scalar* result);

template <typename Scalar>
Scalar elu(Scalar x) noexcept;

// ELU derivative expressed through the activation value (valid for alpha = 1).
template <typename Scalar>
Scalar elu_derivative_from_output(Scalar pre, Scalar post) noexcept {
  return pre > Scalar(0) ? Scalar(1) : post + Scalar(1);
}

template <typename Scalar>
void softmax_columns(MatrixX<Scalar>& logits);

template <typename Scalar>
struct AdamState {
  VectorX<Scalar> first_moment;
  VectorX<Scalar> second_moment;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(Eigen::Index n, double learning_rate = 1e-3);
};

// Bias-corrected Adam update. Throws ContractError on shape mismatch and
// rejects non-finite gradients without touching any state.
template <typename Scalar>
void adam_step(VectorX<Scalar>& params, const VectorX<Scalar>& grads, AdamState<Scalar>& opt);

std::int64_t dense_parameter_count(const std::vector<int>& widths);

}  // namespace cactus
