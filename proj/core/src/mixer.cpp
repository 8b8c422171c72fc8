#include "cactus/mixer.hpp"

#include "cactus/error.hpp"

namespace cactus {

namespace {

std::vector<int> hyper_widths(const MixerShape& shape, int out) {
  return {shape.state_size, shape.hypernet_hidden, shape.hypernet_hidden, out};
}

template <typename Scalar>
Scalar sign_of(Scalar v) {
  return v < Scalar(0) ? Scalar(-1) : Scalar(1);
}

}  // namespace

template <typename Scalar>
MixerNet<Scalar>::MixerNet(MixerShape shape, MixingActivation activation)
    : shape_(shape), activation_(activation) {
  if (shape.agents < 1 || shape.state_size < 1 || shape.embed < 1 || shape.hypernet_hidden < 1) {
    throw ContractError("mixer dimensions must be positive");
  }
  nets_[0] = DenseNet<Scalar>(hyper_widths(shape, shape.agents * shape.embed), OutputHead::Linear);
  nets_[1] = DenseNet<Scalar>(hyper_widths(shape, shape.embed), OutputHead::Linear);
  nets_[2] = DenseNet<Scalar>(hyper_widths(shape, shape.embed), OutputHead::Linear);
  nets_[3] = DenseNet<Scalar>(hyper_widths(shape, 1), OutputHead::Linear);
}

template <typename Scalar>
MixerNet<Scalar> MixerNet<Scalar>::initialized(MixerShape shape, Rng& rng,
                                               MixingActivation activation) {
  MixerNet mixer(shape, activation);
  mixer.nets_[0] = DenseNet<Scalar>::initialized(
      hyper_widths(shape, shape.agents * shape.embed), OutputHead::Linear, rng);
  mixer.nets_[1] =
      DenseNet<Scalar>::initialized(hyper_widths(shape, shape.embed), OutputHead::Linear, rng);
  mixer.nets_[2] =
      DenseNet<Scalar>::initialized(hyper_widths(shape, shape.embed), OutputHead::Linear, rng);
  mixer.nets_[3] =
      DenseNet<Scalar>::initialized(hyper_widths(shape, 1), OutputHead::Linear, rng);
  return mixer;
}

template <typename Scalar>
typename MixerNet<Scalar>::Tape MixerNet<Scalar>::forward(const Matrix& utilities,
                                                          const Matrix& states) const {
  if (utilities.rows() != shape_.agents || states.rows() != shape_.state_size ||
      utilities.cols() != states.cols()) {
    throw ContractError("mixer input shapes do not match");
  }
  const int m = shape_.embed;
  Tape tape;
  tape.w1_tape = nets_[0].forward(states);
  tape.b1_tape = nets_[1].forward(states);
  tape.w2_tape = nets_[2].forward(states);
  tape.b2_tape = nets_[3].forward(states);
  tape.utilities = utilities;

  const Matrix& w1 = tape.w1_tape.output();
  Matrix hidden = tape.b1_tape.output();
  for (int i = 0; i < shape_.agents; ++i) {
    hidden.array() += w1.middleRows(i * m, m).array().abs().rowwise() * utilities.row(i).array();
  }
  if (activation_ == MixingActivation::Elu) {
    hidden = hidden.unaryExpr([](Scalar v) { return elu(v); });
  }
  tape.hidden_post = std::move(hidden);
  return tape;
}

template <typename Scalar>
typename MixerNet<Scalar>::RowVector MixerNet<Scalar>::predict(const Matrix& utilities,
                                                               const Matrix& states) const {
  return output(forward(utilities, states));
}

template <typename Scalar>
typename MixerNet<Scalar>::RowVector MixerNet<Scalar>::output(const Tape& tape) {
  RowVector out = (tape.w2_tape.output().array().abs() * tape.hidden_post.array()).colwise().sum();
  out += tape.b2_tape.output();
  return out;
}

template <typename Scalar>
typename MixerNet<Scalar>::Gradients MixerNet<Scalar>::backward(Tape& tape,
                                                                const RowVector& output_gradient) const {
  if (tape.consumed) throw ContractError("mixer tape already consumed");
  tape.consumed = true;
  const int m = shape_.embed;
  const Eigen::Index batch = tape.utilities.cols();
  if (output_gradient.cols() != batch) throw ContractError("mixer output gradient has wrong width");

  const Matrix& raw_w2 = tape.w2_tape.output();
  const Matrix& raw_w1 = tape.w1_tape.output();
  const Matrix& h = tape.hidden_post;

  // Q_tot = sum_e |w2_e| h_e + b2
  Matrix d_raw_w2 = (h.array().rowwise() * output_gradient.array()) *
                    raw_w2.unaryExpr([](Scalar v) { return sign_of(v); }).array();
  Matrix dz = raw_w2.array().abs().rowwise() * output_gradient.array();
  if (activation_ == MixingActivation::Elu) {
    dz = dz.binaryExpr(h, [](Scalar g, Scalar a) { return a > Scalar(0) ? g : g * (a + Scalar(1)); });
  }

  Gradients grads;
  grads.utilities = Matrix::Zero(shape_.agents, batch);
  Matrix d_raw_w1(raw_w1.rows(), batch);
  for (int i = 0; i < shape_.agents; ++i) {
    const auto block = raw_w1.middleRows(i * m, m);
    d_raw_w1.middleRows(i * m, m) =
        (dz.array().rowwise() * tape.utilities.row(i).array()) *
        block.unaryExpr([](Scalar v) { return sign_of(v); }).array();
    grads.utilities.row(i) = (block.array().abs() * dz.array()).colwise().sum();
  }

  const DenseGradients<Scalar> g0 = nets_[0].backward(tape.w1_tape, d_raw_w1);
  const DenseGradients<Scalar> g1 = nets_[1].backward(tape.b1_tape, dz);
  const DenseGradients<Scalar> g2 = nets_[2].backward(tape.w2_tape, d_raw_w2);
  const DenseGradients<Scalar> g3 = nets_[3].backward(tape.b2_tape, Matrix(output_gradient));

  grads.parameters.resize(parameter_count());
  grads.parameters << g0.parameters, g1.parameters, g2.parameters, g3.parameters;
  return grads;
}

template <typename Scalar>
Eigen::Index MixerNet<Scalar>::parameter_count() const noexcept {
  Eigen::Index total = 0;
  for (const auto& net : nets_) total += net.parameter_count();
  return total;
}

template <typename Scalar>
typename MixerNet<Scalar>::Vector MixerNet<Scalar>::parameters() const {
  Vector out(parameter_count());
  Eigen::Index offset = 0;
  for (const auto& net : nets_) {
    out.segment(offset, net.parameter_count()) = net.parameters();
    offset += net.parameter_count();
  }
  return out;
}

template <typename Scalar>
void MixerNet<Scalar>::set_parameters(const Vector& params) {
  if (params.size() != parameter_count()) throw ContractError("mixer parameter vector has wrong size");
  Eigen::Index offset = 0;
  for (auto& net : nets_) {
    net.set_parameters(params.segment(offset, net.parameter_count()));
    offset += net.parameter_count();
  }
}

template class MixerNet<float>;
template class MixerNet<double>;

}  // namespace cactus
