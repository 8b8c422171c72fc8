#include "cactus/neural.hpp"

#include <cmath>

#include "cactus/error.hpp"

namespace cactus {

const char* output_head_name(OutputHead head) noexcept {
  return head == OutputHead::Softmax ? "softmax" : "linear";
}

std::int64_t dense_parameter_count(const std::vector<int>& widths) {
  std::int64_t total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    total += static_cast<std::int64_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  return total;
}

template <typename Scalar>
Scalar elu(Scalar x) noexcept {
  return x > Scalar(0) ? x : std::expm1(x);
}

template <typename Scalar>
void affine_columns(const Scalar* weights, const Scalar* bias, int out, int in,
                    const Scalar* input, Eigen::Index cols, Scalar* result) {
  for (Eigen::Index c = 0; c < cols; ++c) {
    Scalar* z = result + c * out;
    const Scalar* x = input + c * in;
    for (int r = 0; r < out; ++r) z[r] = bias[r];
    for (int k = 0; k < in; ++k) {
      const Scalar xk = x[k];
      if (xk == Scalar(0)) continue;
      const Scalar* w = weights + static_cast<Eigen::Index>(k) * out;
      for (int r = 0; r < out; ++r) z[r] = std::fma(w[r], xk, z[r]);
    }
  }
}

template <typename Scalar>
void softmax_columns(MatrixX<Scalar>& logits) {
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    Scalar* z = logits.col(c).data();
    const Eigen::Index n = logits.rows();
    Scalar peak = z[0];
    for (Eigen::Index r = 1; r < n; ++r) peak = std::max(peak, z[r]);
    Scalar total = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      z[r] = std::exp(z[r] - peak);
      total += z[r];
    }
    for (Eigen::Index r = 0; r < n; ++r) z[r] /= total;
  }
}

template <typename Scalar>
DenseNet<Scalar>::DenseNet(std::vector<int> widths, OutputHead head)
    : widths_(std::move(widths)), head_(head) {
  if (widths_.size() < 2) throw ContractError("a network needs at least one layer");
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] < 1 || widths_[l + 1] < 1) throw ContractError("layer widths must be positive");
    offsets_.push_back(offset);
    offset += static_cast<Eigen::Index>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }
  params_ = Vector::Zero(offset);
}

template <typename Scalar>
DenseNet<Scalar> DenseNet<Scalar>::initialized(std::vector<int> widths, OutputHead head, Rng& rng) {
  DenseNet net(std::move(widths), head);
  for (int l = 0; l < net.layer_count(); ++l) {
    const int in = net.widths_[l];
    const int out = net.widths_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Scalar* w = net.params_.data() + net.weight_offset(l);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i) {
      w[i] = static_cast<Scalar>(dist(rng));
    }
  }
  return net;
}

template <typename Scalar>
void DenseNet<Scalar>::set_parameters(const Vector& params) {
  if (params.size() != params_.size()) throw ContractError("parameter vector has the wrong size");
  params_ = params;
  ++version_;
}

template <typename Scalar>
typename DenseNet<Scalar>::Vector& DenseNet<Scalar>::mutable_parameters() noexcept {
  ++version_;
  return params_;
}

template <typename Scalar>
typename DenseNet<Scalar>::WeightMap DenseNet<Scalar>::weight(int layer) const {
  return WeightMap(params_.data() + weight_offset(layer), widths_[layer + 1], widths_[layer]);
}

template <typename Scalar>
typename DenseNet<Scalar>::BiasMap DenseNet<Scalar>::bias(int layer) const {
  return BiasMap(params_.data() + bias_offset(layer), widths_[layer + 1]);
}

template <typename Scalar>
void DenseNet<Scalar>::run(const Matrix& input, std::vector<Matrix>& activations) const {
  if (input.rows() != input_size()) {
    throw ContractError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                        std::to_string(input_size()));
  }
  if (!input.allFinite()) throw ContractError("non-finite network input");
  activations.resize(layer_count());
  const Matrix* previous = &input;
  for (int l = 0; l < layer_count(); ++l) {
    Matrix& z = activations[l];
    z.resize(widths_[l + 1], input.cols());
    affine_columns<Scalar>(params_.data() + weight_offset(l), params_.data() + bias_offset(l),
                           widths_[l + 1], widths_[l], previous->data(), input.cols(), z.data());
    if (l + 1 < layer_count()) {
      z = z.unaryExpr([](Scalar v) { return elu(v); });
    } else if (head_ == OutputHead::Softmax) {
      softmax_columns(z);
    }
    previous = &z;
  }
}

template <typename Scalar>
GradientTape<Scalar> DenseNet<Scalar>::forward(const Matrix& input) const {
  GradientTape<Scalar> tape;
  run(input, tape.activations);
  tape.input = input;
  tape.owner = this;
  tape.version = version_;
  return tape;
}

template <typename Scalar>
typename DenseNet<Scalar>::Matrix DenseNet<Scalar>::predict(const Matrix& input) const {
  std::vector<Matrix> activations;
  run(input, activations);
  return std::move(activations.back());
}

template <typename Scalar>
DenseGradients<Scalar> DenseNet<Scalar>::backward(GradientTape<Scalar>& tape,
                                                  const Matrix& output_gradient,
                                                  bool want_input_gradient) const {
  if (tape.consumed || tape.owner != this || tape.version != version_) {
    throw ContractError("gradient tape is stale or belongs to another network");
  }
  tape.consumed = true;
  const Matrix& out = tape.output();
  if (output_gradient.rows() != out.rows() || output_gradient.cols() != out.cols()) {
    throw ContractError("output gradient shape does not match the forward pass");
  }

  DenseGradients<Scalar> grads;
  grads.parameters = Vector::Zero(params_.size());

  Matrix delta;
  if (head_ == OutputHead::Softmax) {
    // dz = p * (g - <p, g>) per column.
    const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inner =
        (out.array() * output_gradient.array()).colwise().sum();
    delta = out.array() * (output_gradient.array().rowwise() - inner.array());
  } else {
    delta = output_gradient;
  }

  for (int l = layer_count() - 1; l >= 0; --l) {
    const Matrix& below = l == 0 ? tape.input : tape.activations[l - 1];
    Eigen::Map<Matrix> dw(grads.parameters.data() + weight_offset(l), widths_[l + 1], widths_[l]);
    Eigen::Map<Vector> db(grads.parameters.data() + bias_offset(l), widths_[l + 1]);
    dw.noalias() = delta * below.transpose();
    db = delta.rowwise().sum();
    if (l == 0 && !want_input_gradient) break;
    Matrix upstream = weight(l).transpose() * delta;
    if (l == 0) {
      grads.input = std::move(upstream);
      break;
    }
    // Hidden activations are ELU; recover the pre-activation sign from the output.
    const Matrix& post = tape.activations[l - 1];
    delta = upstream.binaryExpr(post, [](Scalar g, Scalar a) {
      return a > Scalar(0) ? g : g * (a + Scalar(1));
    });
  }
  return grads;
}

template <typename Scalar>
AdamState<Scalar> AdamState<Scalar>::for_size(Eigen::Index n, double learning_rate) {
  AdamState state;
  state.first_moment = VectorX<Scalar>::Zero(n);
  state.second_moment = VectorX<Scalar>::Zero(n);
  state.learning_rate = learning_rate;
  return state;
}

template <typename Scalar>
void adam_step(VectorX<Scalar>& params, const VectorX<Scalar>& grads, AdamState<Scalar>& opt) {
  if (grads.size() != params.size() || opt.first_moment.size() != params.size() ||
      opt.second_moment.size() != params.size()) {
    throw ContractError("adam: parameter, gradient and moment shapes differ");
  }
  if (!grads.allFinite()) throw ContractError("adam: non-finite gradient rejected");
  ++opt.step;
  const auto b1 = static_cast<Scalar>(opt.beta1);
  const auto b2 = static_cast<Scalar>(opt.beta2);
  const auto correction1 = static_cast<Scalar>(1.0 - std::pow(opt.beta1, opt.step));
  const auto correction2 = static_cast<Scalar>(1.0 - std::pow(opt.beta2, opt.step));
  const auto lr = static_cast<Scalar>(opt.learning_rate);
  const auto eps = static_cast<Scalar>(opt.epsilon);
  opt.first_moment = b1 * opt.first_moment + (Scalar(1) - b1) * grads;
  opt.second_moment = b2 * opt.second_moment + (Scalar(1) - b2) * grads.cwiseProduct(grads);
  params.array() -= lr * (opt.first_moment.array() / correction1) /
                    ((opt.second_moment.array() / correction2).sqrt() + eps);
}

template float elu<float>(float) noexcept;
template double elu<double>(double) noexcept;
template void affine_columns<float>(const float*, const float*, int, int, const float*,
                                    Eigen::Index, float*);
template void affine_columns<double>(const double*, const double*, int, int, const double*,
                                     Eigen::Index, double*);
template void softmax_columns<float>(MatrixX<float>&);
template void softmax_columns<double>(MatrixX<double>&);
template class DenseNet<float>;
template class DenseNet<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(VectorX<float>&, const VectorX<float>&, AdamState<float>&);
template void adam_step<double>(VectorX<double>&, const VectorX<double>&, AdamState<double>&);

}  // namespace cactus
