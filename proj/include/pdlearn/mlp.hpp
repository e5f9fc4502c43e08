#pragma once

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdlearn/common.hpp"
#include "pdlearn/random.hpp"

namespace pdlearn {

enum class Activation { relu, sigmoid, identity };
enum class OutputHead { truncated_gaussian, bernoulli, raw };

/// Interval [lower, upper] that the truncated-Gaussian head maps into.
struct Support {
  double lower = 0.0;
  double upper = 10.0;

  double width() const { return upper - lower; }
};

/// Lower bound on the standard deviation emitted by the truncated-Gaussian head.
inline constexpr double kSigmaFloor = 1e-3;
/// Bernoulli probabilities are kept inside [eps, 1 - eps].
inline constexpr double kProbabilityFloor = 1e-9;

struct MlpArchitecture {
  std::vector<int> layer_sizes;         // q_1 (input), ..., q_L (raw output)
  std::vector<Activation> activations;  // one per weight layer
  OutputHead head = OutputHead::raw;
  bool bias = false;

  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  /// Allocations described by one forward pass (2 raw outputs per user for
  /// the truncated-Gaussian head, 1 otherwise).
  int num_users() const {
    return head == OutputHead::truncated_gaussian ? output_dim() / 2 : output_dim();
  }
  int num_params() const;
  void validate() const;

  /// input -> hidden... (hidden_activation) -> output (identity) -> head.
  static MlpArchitecture feedforward(int input, const std::vector<int>& hidden, int output,
                                     OutputHead head, bool bias = false,
                                     Activation hidden_activation = Activation::relu);
};

bool operator==(const MlpArchitecture& a, const MlpArchitecture& b);

/// Network weights plus the head support. theta holds, per layer, the
/// column-major weight matrix W_l (q_{l+1} x q_l) followed by the bias b_l
/// when the architecture has biases.
struct PolicyModel {
  MlpArchitecture arch;
  Vec theta;
  Support support;

  void validate() const;
};

namespace detail {

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Derived>
void activate(Activation act, Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(Scalar(0));
      break;
    case Activation::sigmoid:
      z = z.unaryExpr([](Scalar v) { return sigmoid(v); });
      break;
    case Activation::identity:
      break;
  }
}

/// Multiplies `delta` in place by the activation derivative, given the
/// post-activation values `out`.
template <typename DerivedD, typename DerivedO>
void activation_backprop(Activation act, Eigen::MatrixBase<DerivedD>& delta,
                         const Eigen::MatrixBase<DerivedO>& out) {
  using Scalar = typename DerivedD::Scalar;
  switch (act) {
    case Activation::relu:
      delta = (out.array() > Scalar(0)).select(delta, Scalar(0));
      break;
    case Activation::sigmoid:
      delta = delta.cwiseProduct(out.cwiseProduct((Scalar(1) - out.array()).matrix()));
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace detail

/// Maps raw network outputs (one column per sample) to distribution
/// parameters. Truncated-Gaussian rows alternate (mu_i, sigma_i):
///   mu    = a + (b - a) * sigmoid(z_mu)
///   sigma = sigma_min + (sqrt(b - a) - sigma_min) * sigmoid(z_sigma)
/// Bernoulli rows are probabilities sigmoid(z).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> head_transform(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& raw, OutputHead head,
    const Support& support) {
  using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (head == OutputHead::raw) return raw;
  MatS out(raw.rows(), raw.cols());
  if (head == OutputHead::bernoulli) {
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
      for (Eigen::Index i = 0; i < raw.rows(); ++i)
        out(i, j) = std::clamp(detail::sigmoid(raw(i, j)), Scalar(kProbabilityFloor),
                               Scalar(1.0 - kProbabilityFloor));
    return out;
  }
  require(raw.rows() % 2 == 0, "truncated-Gaussian head needs an even number of raw outputs");
  const Scalar a(support.lower);
  const Scalar width(support.width());
  const Scalar sigma_span = std::sqrt(width) - Scalar(kSigmaFloor);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    for (Eigen::Index i = 0; i < raw.rows(); i += 2) {
      out(i, j) = a + width * detail::sigmoid(raw(i, j));
      out(i + 1, j) = Scalar(kSigmaFloor) + sigma_span * detail::sigmoid(raw(i + 1, j));
    }
  }
  return out;
}

inline Vec head_transform(const Vec& raw, OutputHead head, const Support& support) {
  return head_transform<double>(Mat(raw), head, support).col(0);
}

/// Elementwise derivative of head_transform with respect to the raw output.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> head_derivative(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& raw, OutputHead head,
    const Support& support) {
  using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (head == OutputHead::raw) return MatS::Ones(raw.rows(), raw.cols());
  MatS d(raw.rows(), raw.cols());
  const Scalar width(support.width());
  const Scalar sigma_span = std::sqrt(width) - Scalar(kSigmaFloor);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      const Scalar s = detail::sigmoid(raw(i, j));
      Scalar scale(1);
      if (head == OutputHead::truncated_gaussian) scale = (i % 2 == 0) ? width : sigma_span;
      d(i, j) = scale * s * (Scalar(1) - s);
    }
  }
  return d;
}

/// Forward pass on a batch (one input per column) through the layers only.
template <typename Scalar, typename DerivedT>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_raw(
    const MlpArchitecture& arch, const Eigen::MatrixBase<DerivedT>& theta,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& inputs) {
  using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VecS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  require(inputs.rows() == arch.input_dim(), "mlp forward: input dimension mismatch");
  require(theta.size() == arch.num_params(), "mlp forward: parameter count mismatch");
  MatS act = inputs;
  Eigen::Index offset = 0;
  for (int l = 0; l < arch.num_layers(); ++l) {
    const int rows = arch.layer_sizes[l + 1];
    const int cols = arch.layer_sizes[l];
    Eigen::Map<const MatS> W(theta.derived().data() + offset, rows, cols);
    offset += static_cast<Eigen::Index>(rows) * cols;
    MatS z = W * act;
    if (arch.bias) {
      Eigen::Map<const VecS> b(theta.derived().data() + offset, rows);
      offset += rows;
      z.colwise() += b;
    }
    detail::activate(arch.activations[l], z);
    act = std::move(z);
  }
  return act;
}

/// Full forward pass including the output head.
template <typename Scalar, typename DerivedT>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_batch(
    const MlpArchitecture& arch, const Eigen::MatrixBase<DerivedT>& theta, const Support& support,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& inputs) {
  return head_transform<Scalar>(forward_raw<Scalar>(arch, theta, inputs), arch.head, support);
}

/// Reverse-mode gradient of sum_b upstream(:, b)^T forward(inputs(:, b))
/// with respect to theta. Linear in `upstream`, so weighting the columns
/// gives weighted sums of per-sample gradients.
template <typename Scalar, typename DerivedT>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> backward_batch(
    const MlpArchitecture& arch, const Eigen::MatrixBase<DerivedT>& theta, const Support& support,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& inputs,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& upstream) {
  using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VecS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  require(inputs.rows() == arch.input_dim(), "mlp backward: input dimension mismatch");
  require(theta.size() == arch.num_params(), "mlp backward: parameter count mismatch");
  require(upstream.rows() == arch.output_dim() && upstream.cols() == inputs.cols(),
          "mlp backward: upstream shape mismatch");

  const int L = arch.num_layers();
  std::vector<MatS> acts;
  acts.reserve(L + 1);
  acts.push_back(inputs);
  std::vector<Eigen::Index> offsets(L);
  Eigen::Index offset = 0;
  for (int l = 0; l < L; ++l) {
    offsets[l] = offset;
    const int rows = arch.layer_sizes[l + 1];
    const int cols = arch.layer_sizes[l];
    Eigen::Map<const MatS> W(theta.derived().data() + offset, rows, cols);
    offset += static_cast<Eigen::Index>(rows) * cols + (arch.bias ? rows : 0);
    MatS z = W * acts.back();
    if (arch.bias) {
      Eigen::Map<const VecS> b(theta.derived().data() + offsets[l] +
                                   static_cast<Eigen::Index>(rows) * cols,
                               rows);
      z.colwise() += b;
    }
    detail::activate(arch.activations[l], z);
    acts.push_back(std::move(z));
  }

  VecS grad = VecS::Zero(theta.size());
  MatS delta = upstream.cwiseProduct(head_derivative<Scalar>(acts.back(), arch.head, support));
  for (int l = L - 1; l >= 0; --l) {
    const int rows = arch.layer_sizes[l + 1];
    const int cols = arch.layer_sizes[l];
    detail::activation_backprop(arch.activations[l], delta, acts[l + 1]);
    Eigen::Map<MatS> dW(grad.data() + offsets[l], rows, cols);
    dW.noalias() = delta * acts[l].transpose();
    if (arch.bias) {
      Eigen::Map<VecS> db(grad.data() + offsets[l] + static_cast<Eigen::Index>(rows) * cols, rows);
      db = delta.rowwise().sum();
    }
    if (l > 0) {
      Eigen::Map<const MatS> W(theta.derived().data() + offsets[l], rows, cols);
      delta = W.transpose() * delta;
    }
  }
  return grad;
}

/// Single-input forward including the head.
Vec forward(const PolicyModel& model, const Vec& h);
/// Gradient of upstream^T forward(model, h) with respect to theta.
Vec backward(const PolicyModel& model, const Vec& h, const Vec& upstream);

/// Weights i.i.d. uniform on +-sqrt(6 / (fan_in + fan_out)); biases zero.
Vec initial_parameters(const MlpArchitecture& arch, Rng& rng);

std::string to_string(Activation a);
std::string to_string(OutputHead h);
Activation parse_activation(const std::string& s);
OutputHead parse_output_head(const std::string& s);

/// Text checkpoint: a header describing the architecture and support,
/// followed by theta with round-trip precision. Extra header lines written
/// by wrappers are passed through `extra_header`.
void write_model(std::ostream& os, const PolicyModel& model,
                 const std::vector<std::string>& extra_header = {});
PolicyModel read_model(std::istream& is, std::vector<std::string>* extra_header = nullptr);
void save_model(const std::string& path, const PolicyModel& model,
                const std::vector<std::string>& extra_header = {});
PolicyModel load_model(const std::string& path, std::vector<std::string>* extra_header = nullptr);

}  // namespace pdlearn
