#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "empathic/random.hpp"

namespace empathic {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainStepReport {
  double mean_loss = 0.0;
  double gradient_norm = 0.0;
};

/// Parameter-shaped container used for gradients.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  double mean_loss = 0.0;

  double norm() const {
    double sq = 0.0;
    for (const auto& w : weights) sq += w.squaredNorm();
    for (const auto& b : biases) sq += b.squaredNorm();
    return std::sqrt(sq);
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }
};

/// Feed-forward action-value network: ReLU hidden layers, linear output.
///
/// Batches are stored column-wise: an input batch is a (input_dim x B)
/// matrix and forward_batch returns (num_actions x B).
class QNetwork {
 public:
  /// All-zero network with the given layer sizes (input, hidden..., output).
  explicit QNetwork(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw ShapeError("QNetwork needs at least an input and an output layer");
    for (int d : dims_)
      if (d <= 0) throw ShapeError("QNetwork layer sizes must be positive");
    for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
      weights_.push_back(Matrix::Zero(dims_[i + 1], dims_[i]));
      biases_.push_back(Vector::Zero(dims_[i + 1]));
    }
  }

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  static QNetwork initialized(std::vector<int> layer_dims, Rng& rng) {
    QNetwork net(std::move(layer_dims));
    for (auto& w : net.weights_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      // row-major fill order so the draw sequence matches the snapshot layout
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    return net;
  }

  const std::vector<int>& layer_dims() const { return dims_; }
  std::size_t num_layers() const { return weights_.size(); }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  const Matrix& weight(std::size_t layer) const { return weights_.at(layer); }
  const Vector& bias(std::size_t layer) const { return biases_.at(layer); }
  Matrix& weight(std::size_t layer) { return weights_.at(layer); }
  Vector& bias(std::size_t layer) { return biases_.at(layer); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  /// Flat parameter access: per layer, weights row-major then biases.
  double parameter(std::size_t index) const { return const_cast<QNetwork*>(this)->parameter_ref(index); }
  void set_parameter(std::size_t index, double value) { parameter_ref(index) = value; }

  bool all_finite() const {
    for (std::size_t l = 0; l < num_layers(); ++l)
      if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    return true;
  }

  Vector forward(std::span<const double> input) const {
    if (static_cast<int>(input.size()) != input_dim())
      throw ShapeError("forward: input length " + std::to_string(input.size()) + " != " +
                       std::to_string(input_dim()));
    Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    return forward_batch(x).col(0);
  }

  Matrix forward_batch(const Matrix& inputs) const {
    check_input_rows(inputs, "forward_batch");
    Matrix a = inputs;
    for (std::size_t l = 0; l < num_layers(); ++l) {
      Matrix z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a;
  }

  /// Mean squared TD error over the batch and its gradient. Only the output
  /// of each sample's chosen action contributes.
  Gradients gradient(const Matrix& inputs, std::span<const int> actions,
                     std::span<const double> targets) const {
    check_batch(inputs, actions, targets);
    const auto batch = inputs.cols();
    const std::size_t layers = num_layers();

    // activations[0] is the input; activations[l] the post-ReLU output of layer l-1
    std::vector<Matrix> activations;
    activations.reserve(layers);
    activations.push_back(inputs);
    Matrix out;
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix z = weights_[l] * activations.back();
      z.colwise() += biases_[l];
      if (l + 1 < layers)
        activations.push_back(z.cwiseMax(0.0));
      else
        out = std::move(z);
    }

    Gradients g;
    g.weights.resize(layers);
    g.biases.resize(layers);

    Matrix delta = Matrix::Zero(out.rows(), batch);
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
      const auto a = actions[static_cast<std::size_t>(j)];
      const double err = out(a, j) - targets[static_cast<std::size_t>(j)];
      loss += err * err;
      delta(a, j) = scale * err;
    }
    g.mean_loss = loss / static_cast<double>(batch);

    for (std::size_t l = layers; l-- > 0;) {
      g.weights[l].noalias() = delta * activations[l].transpose();
      g.biases[l] = delta.rowwise().sum();
      if (l == 0) break;
      Matrix back = weights_[l].transpose() * delta;
      // ReLU derivative: post-activation > 0 iff pre-activation > 0
      delta = back.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
    }
    return g;
  }

  /// Mean squared TD error without gradients.
  double loss(const Matrix& inputs, std::span<const int> actions, std::span<const double> targets) const {
    check_batch(inputs, actions, targets);
    const Matrix out = forward_batch(inputs);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
      const double err = out(actions[static_cast<std::size_t>(j)], j) - targets[static_cast<std::size_t>(j)];
      sum += err * err;
    }
    return sum / static_cast<double>(inputs.cols());
  }

  /// One plain gradient-descent step. Reports the pre-update loss.
  TrainStepReport train_step(const Matrix& inputs, std::span<const int> actions,
                             std::span<const double> targets, double learning_rate) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("train_step: learning rate must be positive and finite");
    const Gradients g = gradient(inputs, actions, targets);
    if (!g.all_finite() || !std::isfinite(g.mean_loss))
      throw NumericalError("train_step: non-finite loss or gradient (loss=" + std::to_string(g.mean_loss) + ")");
    apply(g, learning_rate);
    return {g.mean_loss, g.norm()};
  }

  void apply(const Gradients& g, double learning_rate) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      weights_[l].noalias() -= learning_rate * g.weights[l];
      biases_[l].noalias() -= learning_rate * g.biases[l];
    }
  }

  bool same_architecture(const QNetwork& other) const { return dims_ == other.dims_; }

 private:
  double& parameter_ref(std::size_t index) {
    for (std::size_t l = 0; l < num_layers(); ++l) {
      auto& w = weights_[l];
      const auto wsize = static_cast<std::size_t>(w.size());
      if (index < wsize) {
        const auto cols = static_cast<std::size_t>(w.cols());
        return w(static_cast<Eigen::Index>(index / cols), static_cast<Eigen::Index>(index % cols));
      }
      index -= wsize;
      const auto bsize = static_cast<std::size_t>(biases_[l].size());
      if (index < bsize) return biases_[l](static_cast<Eigen::Index>(index));
      index -= bsize;
    }
    throw std::out_of_range("QNetwork parameter index out of range");
  }

  void check_input_rows(const Matrix& inputs, const char* what) const {
    if (inputs.rows() != input_dim())
      throw ShapeError(std::string(what) + ": input rows " + std::to_string(inputs.rows()) + " != " +
                       std::to_string(input_dim()));
  }

  void check_batch(const Matrix& inputs, std::span<const int> actions, std::span<const double> targets) const {
    check_input_rows(inputs, "train batch");
    const auto batch = static_cast<std::size_t>(inputs.cols());
    if (batch == 0 || actions.size() != batch || targets.size() != batch)
      throw ShapeError("train batch: inputs, actions and targets must have equal nonzero length");
    for (int a : actions)
      if (a < 0 || a >= output_dim()) throw ShapeError("train batch: action index out of range");
    if (!inputs.allFinite()) throw std::invalid_argument("train batch: non-finite input");
    for (double t : targets)
      if (!std::isfinite(t)) throw std::invalid_argument("train batch: non-finite target");
  }

  std::vector<int> dims_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// dst <- src, bit for bit.
inline void copy_weights(const QNetwork& src, QNetwork& dst) {
  if (!src.same_architecture(dst)) throw ShapeError("copy_weights: architectures differ");
  for (std::size_t l = 0; l < src.num_layers(); ++l) {
    dst.weight(l) = src.weight(l);
    dst.bias(l) = src.bias(l);
  }
}

/// Largest relative disagreement between an analytic gradient and central
/// finite differences of the batch loss, over every parameter.
///
/// `analytic` maps (net, inputs, actions, targets) to Gradients; the default
/// overload uses QNetwork::gradient.
template <class GradientFn>
double finite_difference_check(const QNetwork& net, const Matrix& inputs, std::span<const int> actions,
                               std::span<const double> targets, double epsilon, GradientFn&& analytic) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw std::invalid_argument("finite_difference_check: epsilon must lie in (0, 1e-2]");
  const Gradients g = analytic(net, inputs, actions, targets);
  QNetwork probe = net;
  double worst = 0.0;
  std::size_t index = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = g.weights.at(l);
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size() + g.biases.at(l).size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    for (Eigen::Index i = 0; i < g.biases[l].size(); ++i) flat.push_back(g.biases[l](i));

    for (double analytic_value : flat) {
      const double original = probe.parameter(index);
      probe.set_parameter(index, original + epsilon);
      const double up = probe.loss(inputs, actions, targets);
      probe.set_parameter(index, original - epsilon);
      const double down = probe.loss(inputs, actions, targets);
      probe.set_parameter(index, original);
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max({std::abs(analytic_value), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic_value - numeric) / denom);
      ++index;
    }
  }
  return worst;
}

inline double finite_difference_check(const QNetwork& net, const Matrix& inputs, std::span<const int> actions,
                                      std::span<const double> targets, double epsilon) {
  return finite_difference_check(net, inputs, actions, targets, epsilon,
                                 [](const QNetwork& n, const Matrix& x, std::span<const int> a,
                                    std::span<const double> y) { return n.gradient(x, a, y); });
}

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("weight snapshot: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Snapshot layout: u64 layer count, u64 per layer size, then for each layer
/// the weight matrix row-major followed by its biases, all as little-endian
/// IEEE-754 doubles.
inline void save_snapshot(const QNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  detail::write_u64(out, net.layer_dims().size());
  for (int d : net.layer_dims()) detail::write_u64(out, static_cast<std::uint64_t>(d));
  for (std::size_t i = 0; i < net.parameter_count(); ++i)
    detail::write_u64(out, std::bit_cast<std::uint64_t>(net.parameter(i)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline QNetwork load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto count = detail::read_u64(in);
  if (count < 2 || count > 64) throw std::runtime_error("weight snapshot: implausible layer count");
  std::vector<int> dims;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto d = detail::read_u64(in);
    if (d == 0 || d > (1U << 24)) throw std::runtime_error("weight snapshot: implausible layer size");
    dims.push_back(static_cast<int>(d));
  }
  QNetwork net(std::move(dims));
  for (std::size_t i = 0; i < net.parameter_count(); ++i)
    net.set_parameter(i, std::bit_cast<double>(detail::read_u64(in)));
  return net;
}

}  // namespace empathic
