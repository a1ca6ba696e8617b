#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tailflow/special_functions.hpp"

namespace tailflow::autograd {

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  log,
  tanh,
  sigmoid,
  relu,
  softplus,
  square,
  lgamma,
};

// Numerically stable scalar helpers, shared by the tape and by plain-double
// evaluation paths (generic code pulls them in by ADL or using-declarations).
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}
inline double square(double x) { return x * x; }
// Inverse of softplus; log(expm1(y)). y = 0 maps to -inf.
inline double softplus_inverse(double y) {
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

// Append-only reverse-mode tape over scalar nodes. Node ids are indices into
// the node array, so inputs always precede outputs. Out-of-domain records
// (log of a nonpositive value, division by zero, lgamma outside x > 0) yield
// non-finite node values and set a sticky flag instead of throwing, keeping
// training objectives total.
class Tape {
 public:
  using NodeId = std::int32_t;

  struct Node {
    double value;
    double pa;  // d value / d input a
    double pb;  // d value / d input b
    NodeId a;
    NodeId b;
    Op op;
  };

  Tape() { nodes_.reserve(1 << 12); }

  NodeId leaf(double v) {
    nodes_.push_back({v, 0.0, 0.0, -1, -1, Op::leaf});
    if (!std::isfinite(v)) nonfinite_ = true;
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  NodeId record(Op op, NodeId a, NodeId b = -1);

  double value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::size_t size() const { return nodes_.size(); }
  bool saw_nonfinite() const { return nonfinite_; }

  void clear() {
    nodes_.clear();
    nonfinite_ = false;
  }
  // Drop every node recorded after the first `n`; lets a batch keep its
  // parameter leaves while per-sample subgraphs come and go.
  void truncate(std::size_t n) { nodes_.resize(n); }

  // Single reverse sweep; adjoints indexed by node id. `adjoint` is resized
  // and zeroed here so callers can reuse its capacity.
  void backward_into(NodeId output, std::vector<double>& adjoint) const;

  std::vector<double> backward(NodeId output) const {
    std::vector<double> adjoint;
    backward_into(output, adjoint);
    return adjoint;
  }

 private:
  std::vector<Node> nodes_;
  bool nonfinite_ = false;
};

// Value handle on a tape; overloaded arithmetic records as it evaluates.
struct Var {
  Tape* tape = nullptr;
  Tape::NodeId id = -1;
  double value() const { return tape->value(id); }
};

inline Var make_leaf(Tape& t, double v) { return {&t, t.leaf(v)}; }

inline Var operator+(Var a, Var b) { return {a.tape, a.tape->record(Op::add, a.id, b.id)}; }
inline Var operator-(Var a, Var b) { return {a.tape, a.tape->record(Op::sub, a.id, b.id)}; }
inline Var operator*(Var a, Var b) { return {a.tape, a.tape->record(Op::mul, a.id, b.id)}; }
inline Var operator/(Var a, Var b) { return {a.tape, a.tape->record(Op::div, a.id, b.id)}; }
inline Var operator-(Var a) { return {a.tape, a.tape->record(Op::neg, a.id)}; }

inline Var operator+(Var a, double c) { return a + make_leaf(*a.tape, c); }
inline Var operator+(double c, Var a) { return make_leaf(*a.tape, c) + a; }
inline Var operator-(Var a, double c) { return a - make_leaf(*a.tape, c); }
inline Var operator-(double c, Var a) { return make_leaf(*a.tape, c) - a; }
inline Var operator*(Var a, double c) { return a * make_leaf(*a.tape, c); }
inline Var operator*(double c, Var a) { return make_leaf(*a.tape, c) * a; }
inline Var operator/(Var a, double c) { return a / make_leaf(*a.tape, c); }
inline Var operator/(double c, Var a) { return make_leaf(*a.tape, c) / a; }

inline Var exp(Var a) { return {a.tape, a.tape->record(Op::exp, a.id)}; }
inline Var log(Var a) { return {a.tape, a.tape->record(Op::log, a.id)}; }
inline Var tanh(Var a) { return {a.tape, a.tape->record(Op::tanh, a.id)}; }
inline Var sigmoid(Var a) { return {a.tape, a.tape->record(Op::sigmoid, a.id)}; }
inline Var relu(Var a) { return {a.tape, a.tape->record(Op::relu, a.id)}; }
inline Var softplus(Var a) { return {a.tape, a.tape->record(Op::softplus, a.id)}; }
inline Var square(Var a) { return {a.tape, a.tape->record(Op::square, a.id)}; }
inline Var lgamma(Var a) { return {a.tape, a.tape->record(Op::lgamma, a.id)}; }

enum class Activation : std::uint8_t { tanh, sigmoid, relu };

// Fully connected network description plus its flattened parameters. Layout:
// for each layer, the weight matrix row-major (out x in) followed by the out
// biases. The final layer carries no activation; heads downstream apply
// their own nonlinearity.
struct MlpParams {
  std::vector<int> layer_sizes;  // [in, hidden..., out]
  std::vector<double> values;
  Activation activation = Activation::tanh;

  static std::size_t param_count(std::span<const int> sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      n += (static_cast<std::size_t>(sizes[l]) + 1) * static_cast<std::size_t>(sizes[l + 1]);
    return n;
  }
  std::size_t param_count() const { return param_count(layer_sizes); }
};

// Binary connectivity masks per weight matrix (row-major, matching the
// parameter layout); biases are never masked. Empty means dense.
using MlpMasks = std::vector<std::vector<std::uint8_t>>;

namespace detail {
template <class S>
S apply_activation(Activation act, S x) {
  using std::tanh;
  using tailflow::autograd::relu;
  using tailflow::autograd::sigmoid;
  using tailflow::autograd::tanh;
  switch (act) {
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::relu: return relu(x);
  }
  throw std::logic_error("unknown activation");
}
}  // namespace detail

// Forward pass generic over the scalar type (double, or Var while recording
// a training graph). `params` follows the MlpParams layout; masked weights
// are skipped entirely so they contribute neither value nor gradient.
template <class S>
std::vector<S> mlp_forward(const MlpParams& net, std::span<const S> params,
                           std::span<const S> input, const MlpMasks* masks = nullptr) {
  const auto& sizes = net.layer_sizes;
  if (sizes.size() < 2) throw std::invalid_argument("mlp_forward: need at least two layer sizes");
  if (input.size() != static_cast<std::size_t>(sizes.front()))
    throw std::invalid_argument("mlp_forward: input size mismatch");
  if (params.size() != net.param_count())
    throw std::invalid_argument("mlp_forward: parameter count mismatch");

  std::vector<S> act(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t n_in = static_cast<std::size_t>(sizes[l]);
    const std::size_t n_out = static_cast<std::size_t>(sizes[l + 1]);
    const std::size_t bias_off = off + n_in * n_out;
    const std::uint8_t* mask =
        masks && !masks->empty() ? (*masks)[l].data() : nullptr;
    std::vector<S> next;
    next.reserve(n_out);
    const bool last = (l + 2 == sizes.size());
    for (std::size_t j = 0; j < n_out; ++j) {
      S acc = params[bias_off + j];
      for (std::size_t i = 0; i < n_in; ++i) {
        const std::size_t w = off + j * n_in + i;
        if (mask && !mask[j * n_in + i]) continue;
        acc = acc + params[w] * act[i];
      }
      next.push_back(last ? acc : detail::apply_activation(net.activation, acc));
    }
    act = std::move(next);
    off = bias_off + n_out;
  }
  return act;
}

}  // namespace tailflow::autograd
