#include "tailflow/autograd.hpp"

#include <cmath>
#include <limits>

namespace tailflow::autograd {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

Tape::NodeId Tape::record(Op op, NodeId a, NodeId b) {
  if (a < 0 || static_cast<std::size_t>(a) >= nodes_.size() ||
      (b >= 0 && static_cast<std::size_t>(b) >= nodes_.size()))
    throw std::out_of_range("Tape::record: inputs must already be on the tape");
  const double x = value(a);
  const double y = b >= 0 ? value(b) : 0.0;
  Node n{0.0, 0.0, 0.0, a, b, op};
  switch (op) {
    case Op::leaf:
      throw std::logic_error("Tape::record: use leaf()");
    case Op::add:
      n.value = x + y;
      n.pa = 1.0;
      n.pb = 1.0;
      break;
    case Op::sub:
      n.value = x - y;
      n.pa = 1.0;
      n.pb = -1.0;
      break;
    case Op::mul:
      n.value = x * y;
      n.pa = y;
      n.pb = x;
      break;
    case Op::div:
      if (y == 0.0) {
        n.value = kNan;
        n.pa = kNan;
        n.pb = kNan;
        nonfinite_ = true;
      } else {
        n.value = x / y;
        n.pa = 1.0 / y;
        n.pb = -x / (y * y);
      }
      break;
    case Op::neg:
      n.value = -x;
      n.pa = -1.0;
      break;
    case Op::exp:
      n.value = std::exp(x);
      n.pa = n.value;
      break;
    case Op::log:
      if (x <= 0.0) {
        n.value = x == 0.0 ? kNegInf : kNan;
        n.pa = kNan;
        nonfinite_ = true;
      } else {
        n.value = std::log(x);
        n.pa = 1.0 / x;
      }
      break;
    case Op::tanh:
      n.value = std::tanh(x);
      n.pa = 1.0 - n.value * n.value;
      break;
    case Op::sigmoid:
      n.value = sigmoid(x);
      n.pa = n.value * (1.0 - n.value);
      break;
    case Op::relu:
      // Subgradient at 0 is defined as 0.
      n.value = x > 0.0 ? x : 0.0;
      n.pa = x > 0.0 ? 1.0 : 0.0;
      break;
    case Op::softplus:
      n.value = softplus(x);
      n.pa = sigmoid(x);
      break;
    case Op::square:
      n.value = x * x;
      n.pa = 2.0 * x;
      break;
    case Op::lgamma:
      if (x <= 0.0) {
        n.value = kNan;
        n.pa = kNan;
        nonfinite_ = true;
      } else {
        n.value = lgamma(x);
        n.pa = digamma(x);
      }
      break;
  }
  if (!std::isfinite(n.value)) nonfinite_ = true;
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::backward_into(NodeId output, std::vector<double>& adjoint) const {
  if (output < 0 || static_cast<std::size_t>(output) >= nodes_.size())
    throw std::out_of_range("Tape::backward: bad output id");
  adjoint.assign(nodes_.size(), 0.0);
  adjoint[static_cast<std::size_t>(output)] = 1.0;
  for (std::size_t i = static_cast<std::size_t>(output) + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.op == Op::leaf) continue;
    const double adj = adjoint[i];
    if (adj == 0.0) continue;
    adjoint[static_cast<std::size_t>(n.a)] += n.pa * adj;
    if (n.b >= 0) adjoint[static_cast<std::size_t>(n.b)] += n.pb * adj;
  }
}

}  // namespace tailflow::autograd
