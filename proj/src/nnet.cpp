#include "selbias/nnet.hpp"

#include "selbias/core.hpp"
#include "selbias/rng.hpp"
#include "selbias/stats.hpp"

#include <cmath>

namespace selbias {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

namespace {

void activate(Activation a, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::Softplus:
      out = z.unaryExpr([](double v) { return softplus(v); });
      break;
    case Activation::Tanh:
      out = z.array().tanh().matrix();
      break;
    case Activation::ReLU:
      out = z.cwiseMax(0.0);
      break;
  }
}

// Derivative of the activation expressed through (pre, post).
Eigen::ArrayXXd activation_slope(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& post) {
  switch (a) {
    case Activation::Softplus:
      return pre.unaryExpr([](double v) { return logistic(v); }).array();
    case Activation::Tanh:
      return 1.0 - post.array().square();
    case Activation::ReLU:
      return (pre.array() > 0.0).cast<double>();
  }
  return {};
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation, std::uint64_t init_seed)
    : sizes_(std::move(layer_sizes)), activation_(activation), seed_(init_seed) {
  if (sizes_.size() < 2) throw ConfigError("network needs at least input and output sizes");
  for (int s : sizes_) {
    if (s <= 0) throw ConfigError("layer sizes must be positive");
  }
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(total);
  RngStream rng = RngStream(init_seed).split("init");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    }
  }
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t l) {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t l) const {
  return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
}

void Mlp::zero_output_layer() {
  weight(num_layers() - 1).setZero();
  bias(num_layers() - 1).setZero();
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != sizes_.front()) {
    throw ConfigError("network input has " + std::to_string(input.rows()) + " rows, expected " +
                      std::to_string(sizes_.front()));
  }
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(input);
  }
  Eigen::MatrixXd a = input;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 == num_layers()) {
      a = z;
    } else {
      activate(activation_, z, a);
    }
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
  }
  return a;
}

std::vector<double> Mlp::forward(const std::vector<double>& input) const {
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  const Eigen::MatrixXd out = forward(in);
  return {out.data(), out.data() + out.size()};
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output, Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t l = num_layers(); l-- > 0;) {
    if (l + 1 != num_layers()) {
      delta = (delta.array() * activation_slope(activation_, cache.pre[l], cache.post[l + 1])).matrix();
    }
    const Eigen::Index off = offsets_[l];
    const Eigen::Index rows = sizes_[l + 1], cols = sizes_[l];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + off, rows, cols).noalias() += delta * cache.post[l].transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + off + rows * cols, rows) += delta.rowwise().sum();
    if (l > 0) delta = weight(l).transpose() * delta;
  }
}

Eigen::MatrixXd Mlp::input_gradient(const Cache& cache, const Eigen::MatrixXd& grad_output) const {
  Eigen::MatrixXd delta = grad_output;
  for (std::size_t l = num_layers(); l-- > 0;) {
    if (l + 1 != num_layers()) {
      delta = (delta.array() * activation_slope(activation_, cache.pre[l], cache.post[l + 1])).matrix();
    }
    delta = weight(l).transpose() * delta;
  }
  return delta;
}

Adam::Adam(Eigen::Index n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::reset() {
  t_ = 0;
  m_.setZero();
  v_.setZero();
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m_.size() != params.size()) {
    m_ = Eigen::VectorXd::Zero(params.size());
    v_ = Eigen::VectorXd::Zero(params.size());
  }
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
  if (lr_ == 0.0) return;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

Tape::Node Tape::make_node(Op op, Var a, Var b, double k) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.k = k;
  return n;
}

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Tape::check_same(Var a, Var b) const {
  if (nodes_.at(a).value.size() != nodes_.at(b).value.size()) {
    throw ConfigError("tape operands differ in batch size");
  }
}

Tape::Var Tape::constant(Eigen::ArrayXd values) {
  Node n;
  n.value = std::move(values);
  return push(std::move(n));
}

Tape::Var Tape::net(const Mlp& net, const Eigen::MatrixXd& input) {
  if (net.output_dim() != 1) throw ConfigError("tape networks must have one output");
  Node n;
  n.op = Op::Net;
  n.net = &net;
  n.cache = std::make_shared<Mlp::Cache>();
  n.value = net.forward(input, n.cache.get()).row(0).transpose().array();
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  check_same(a, b);
  Node n = make_node(Op::Add, a, b);
  n.value = nodes_[a].value + nodes_[b].value;
  return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
  check_same(a, b);
  Node n = make_node(Op::Sub, a, b);
  n.value = nodes_[a].value - nodes_[b].value;
  return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
  check_same(a, b);
  Node n = make_node(Op::Mul, a, b);
  n.value = nodes_[a].value * nodes_[b].value;
  return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double k) {
  Node n = make_node(Op::Scale, a, 0, k);
  n.value = k * nodes_.at(a).value;
  return push(std::move(n));
}

Tape::Var Tape::shift(Var a, double k) {
  Node n = make_node(Op::Shift, a, 0, k);
  n.value = nodes_.at(a).value + k;
  return push(std::move(n));
}

Tape::Var Tape::unary(std::string_view op, Var a) {
  const Eigen::ArrayXd& x = nodes_.at(a).value;
  Node n;
  n.a = a;
  if (op == "square") {
    n.op = Op::Square;
    n.value = x.square();
  } else if (op == "log") {
    n.op = Op::Log;
    n.value = x.log();
  } else if (op == "exp") {
    n.op = Op::Exp;
    n.value = x.exp();
  } else if (op == "softplus") {
    n.op = Op::Softplus;
    n.value = x.unaryExpr([](double v) { return softplus(v); });
  } else if (op == "tanh") {
    n.op = Op::Tanh;
    n.value = x.tanh();
  } else if (op == "sigmoid") {
    n.op = Op::Sigmoid;
    n.value = x.unaryExpr([](double v) { return logistic(v); });
  } else if (op == "neg") {
    n.op = Op::Neg;
    n.value = -x;
  } else {
    throw ConfigError("unsupported primitive '" + std::string(op) + "'");
  }
  return push(std::move(n));
}

Tape::Var Tape::mean(Var a) {
  const Eigen::ArrayXd& x = nodes_.at(a).value;
  if (x.size() == 0) throw ConfigError("mean of an empty batch");
  Node n = make_node(Op::Mean, a);
  n.value = Eigen::ArrayXd::Constant(1, x.mean());
  return push(std::move(n));
}

Tape::Var Tape::sum(Var a) {
  Node n = make_node(Op::Sum, a);
  n.value = Eigen::ArrayXd::Constant(1, nodes_.at(a).value.sum());
  return push(std::move(n));
}

Tape::Var Tape::group_sum(Var a, std::size_t group) {
  const Eigen::ArrayXd& x = nodes_.at(a).value;
  if (group == 0 || x.size() % static_cast<Eigen::Index>(group) != 0) {
    throw ConfigError("group size does not divide the batch");
  }
  Node n = make_node(Op::GroupSum, a, 0, static_cast<double>(group));
  const auto g = static_cast<Eigen::Index>(group);
  n.value = Eigen::Map<const Eigen::ArrayXXd>(x.data(), g, x.size() / g).colwise().sum().transpose();
  return push(std::move(n));
}

double Tape::scalar(Var v) const {
  const auto& x = nodes_.at(v).value;
  if (x.size() != 1) throw ConfigError("tape node is not a scalar");
  return x(0);
}

std::vector<Eigen::VectorXd> Tape::backward(Var loss, std::span<const Mlp* const> nets) const {
  if (nodes_.at(loss).value.size() != 1) throw ConfigError("loss must be a scalar node");
  std::vector<Eigen::VectorXd> grads;
  for (const Mlp* m : nets) grads.push_back(Eigen::VectorXd::Zero(m->num_params()));

  std::vector<Eigen::ArrayXd> adj(loss + 1);
  adj[loss] = Eigen::ArrayXd::Ones(1);
  auto acc = [&](Var v, const Eigen::ArrayXd& g) {
    if (adj[v].size() == 0) {
      adj[v] = g;
    } else {
      adj[v] += g;
    }
  };
  for (Var i = loss + 1; i-- > 0;) {
    if (adj[i].size() == 0) continue;
    const Node& n = nodes_[i];
    const Eigen::ArrayXd& g = adj[i];
    const Eigen::ArrayXd& xa = nodes_[n.a].value;
    switch (n.op) {
      case Op::Const:
        break;
      case Op::Net:
        for (std::size_t j = 0; j < nets.size(); ++j) {
          if (nets[j] == n.net) n.net->backward(*n.cache, g.matrix().transpose(), grads[j]);
        }
        break;
      case Op::Add:
        acc(n.a, g);
        acc(n.b, g);
        break;
      case Op::Sub:
        acc(n.a, g);
        acc(n.b, -g);
        break;
      case Op::Mul:
        acc(n.a, g * nodes_[n.b].value);
        acc(n.b, g * xa);
        break;
      case Op::Scale:
        acc(n.a, n.k * g);
        break;
      case Op::Shift:
        acc(n.a, g);
        break;
      case Op::Square:
        acc(n.a, 2.0 * xa * g);
        break;
      case Op::Log:
        acc(n.a, g / xa);
        break;
      case Op::Exp:
        acc(n.a, g * n.value);
        break;
      case Op::Softplus:
        acc(n.a, g * xa.unaryExpr([](double v) { return logistic(v); }));
        break;
      case Op::Tanh:
        acc(n.a, g * (1.0 - n.value.square()));
        break;
      case Op::Sigmoid:
        acc(n.a, g * n.value * (1.0 - n.value));
        break;
      case Op::Neg:
        acc(n.a, -g);
        break;
      case Op::Mean:
        acc(n.a, Eigen::ArrayXd::Constant(xa.size(), g(0) / static_cast<double>(xa.size())));
        break;
      case Op::Sum:
        acc(n.a, Eigen::ArrayXd::Constant(xa.size(), g(0)));
        break;
      case Op::GroupSum: {
        const auto grp = static_cast<Eigen::Index>(n.k);
        Eigen::ArrayXXd spread = g.transpose().replicate(grp, 1);
        acc(n.a, Eigen::Map<const Eigen::ArrayXd>(spread.data(), spread.size()));
        break;
      }
    }
  }
  return grads;
}

Eigen::VectorXd param_gradients(const Tape& tape, Tape::Var loss, const Mlp& net) {
  const Mlp* nets[] = {&net};
  return tape.backward(loss, nets).front();
}

Tape::Var d_dy(Tape& tape, const TapeFn& f, const Eigen::MatrixXd& input, int y_row, double h) {
  Eigen::MatrixXd up = input, down = input;
  up.row(y_row).array() += h;
  down.row(y_row).array() -= h;
  const Tape::Var fu = f(tape, up);
  const Tape::Var fd = f(tape, down);
  return tape.scale(tape.sub(fu, fd), 1.0 / (2.0 * h));
}

TapeFn net_fn(const Mlp& net) {
  return [&net](Tape& tape, const Eigen::MatrixXd& input) { return tape.net(net, input); };
}

GradientReport gradient_check(Mlp& net, const std::function<Tape::Var(Tape&)>& loss, double h) {
  GradientReport report;
  {
    Tape tape;
    const Tape::Var l = loss(tape);
    const Eigen::VectorXd g = param_gradients(tape, l, net);
    report.analytic.assign(g.data(), g.data() + g.size());
  }
  auto eval = [&] {
    Tape tape;
    return tape.scalar(loss(tape));
  };
  Eigen::VectorXd& p = net.params();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p(i);
    p(i) = orig + h;
    const double fp = eval();
    p(i) = orig - h;
    const double fm = eval();
    p(i) = orig;
    const double num = (fp - fm) / (2.0 * h);
    report.numeric.push_back(num);
    const double a = report.analytic[static_cast<std::size_t>(i)];
    const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-2});
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  return report;
}

}  // namespace selbias
