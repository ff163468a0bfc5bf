#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace selbias {

enum class Activation { Softplus, Tanh, ReLU };

double softplus(double z);

/// Fully connected network: hidden layers use `activation`, the output layer
/// is affine. Batches are column-major, one sample per column.
class Mlp {
public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation activation, std::uint64_t init_seed);

  struct Cache {
    std::vector<Eigen::MatrixXd> pre;   // affine outputs per layer
    std::vector<Eigen::MatrixXd> post;  // post[0] is the input
  };

  [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;
  [[nodiscard]] std::vector<double> forward(const std::vector<double>& input) const;
  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_output, Eigen::VectorXd& grad) const;
  /// Gradient of sum(weights . output) with respect to the input batch.
  [[nodiscard]] Eigen::MatrixXd input_gradient(const Cache& cache, const Eigen::MatrixXd& grad_output) const;

  [[nodiscard]] const std::vector<int>& layer_sizes() const { return sizes_; }
  [[nodiscard]] Activation activation() const { return activation_; }
  [[nodiscard]] std::uint64_t init_seed() const { return seed_; }
  [[nodiscard]] int input_dim() const { return sizes_.front(); }
  [[nodiscard]] int output_dim() const { return sizes_.back(); }
  [[nodiscard]] std::size_t num_layers() const { return sizes_.size() - 1; }
  [[nodiscard]] Eigen::Index num_params() const { return params_.size(); }

  [[nodiscard]] const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  [[nodiscard]] Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  void zero_output_layer();

private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::Softplus;
  std::uint64_t seed_ = 0;
  Eigen::VectorXd params_;
  std::vector<Eigen::Index> offsets_;
};

class Adam {
public:
  Adam() = default;
  Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  void set_lr(double lr) { lr_ = lr; }
  [[nodiscard]] double lr() const { return lr_; }
  void reset();

private:
  double lr_ = 0.01, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

/// Reverse-mode tape over batch-valued nodes. Every node holds an array
/// (length = batch, or 1 for reductions); network nodes evaluate a
/// single-output Mlp on a constant input matrix.
class Tape {
public:
  using Var = std::size_t;

  Var constant(Eigen::ArrayXd values);
  Var net(const Mlp& net, const Eigen::MatrixXd& input);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double k);
  Var shift(Var a, double k);
  /// square, log, exp, softplus, tanh, sigmoid, neg.
  Var unary(std::string_view op, Var a);
  Var mean(Var a);
  Var sum(Var a);
  /// Sums consecutive runs of `group` entries.
  Var group_sum(Var a, std::size_t group);

  [[nodiscard]] const Eigen::ArrayXd& value(Var v) const { return nodes_.at(v).value; }
  [[nodiscard]] double scalar(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Parameter gradients of the scalar node `loss`, one vector per entry of
  /// `nets` (zero when a net does not appear on the tape).
  [[nodiscard]] std::vector<Eigen::VectorXd> backward(Var loss, std::span<const Mlp* const> nets) const;

private:
  enum class Op { Const, Net, Add, Sub, Mul, Scale, Shift, Square, Log, Exp, Softplus, Tanh, Sigmoid, Neg, Mean, Sum, GroupSum };
  struct Node {
    Op op = Op::Const;
    Var a = 0, b = 0;
    double k = 0.0;
    Eigen::ArrayXd value;
    const Mlp* net = nullptr;
    std::shared_ptr<Mlp::Cache> cache;
  };
  static Node make_node(Op op, Var a, Var b = 0, double k = 0.0);
  Var push(Node n);
  void check_same(Var a, Var b) const;
  std::vector<Node> nodes_;
};

/// Builds a tape node from an input matrix; lets y-derivatives nest.
using TapeFn = std::function<Tape::Var(Tape&, const Eigen::MatrixXd&)>;

inline constexpr double kDyStep = 1e-3;

/// (f(.., y + h) - f(.., y - h)) / 2h, with y the input row `y_row`.
Tape::Var d_dy(Tape& tape, const TapeFn& f, const Eigen::MatrixXd& input, int y_row, double h = kDyStep);
TapeFn net_fn(const Mlp& net);

Eigen::VectorXd param_gradients(const Tape& tape, Tape::Var loss, const Mlp& net);

struct GradientReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double max_rel_err = 0.0;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-2) per parameter.
GradientReport gradient_check(Mlp& net, const std::function<Tape::Var(Tape&)>& loss, double h = 1e-5);

}  // namespace selbias
