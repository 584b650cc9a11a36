#include "unigen/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unigen {
namespace {

constexpr double kLogFloor = 1e-12;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_logsigmoid(double x) {
  return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

// Flat-index map from an output position to an operand position under the
// supported broadcast forms.
struct BMap {
  enum Kind { Same, Scalar, TailRows } kind = Same;
  std::size_t d = 1;
  std::size_t operator()(std::size_t i) const {
    if (kind == Same) return i;
    if (kind == Scalar) return 0;
    return i % d;
  }
};

bool tail_matches(const std::vector<std::size_t>& big, const std::vector<std::size_t>& small) {
  return big.size() == 2 && small.size() == 1 && big[1] == small[0];
}

// Resolves the output shape and operand maps for a binary elementwise op.
std::vector<std::size_t> resolve_broadcast(const char* name, const Tensor& a, const Tensor& b,
                                           BMap& ma, BMap& mb) {
  if (a.shape() == b.shape()) {
    ma = {BMap::Same};
    mb = {BMap::Same};
    return a.shape();
  }
  if (b.rank() <= 1 && b.size() == 1) {
    ma = {BMap::Same};
    mb = {BMap::Scalar};
    return a.shape();
  }
  if (a.rank() <= 1 && a.size() == 1) {
    ma = {BMap::Scalar};
    mb = {BMap::Same};
    return b.shape();
  }
  if (tail_matches(a.shape(), b.shape())) {
    ma = {BMap::Same};
    mb = {BMap::TailRows, b.size()};
    return a.shape();
  }
  if (tail_matches(b.shape(), a.shape())) {
    ma = {BMap::TailRows, a.size()};
    mb = {BMap::Same};
    return b.shape();
  }
  throw std::invalid_argument(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                              shape_str(b.shape()) + " do not conform");
}

// C += op(A) * op(B) with optional transposes; shapes already validated.
void gemm_acc(Tensor& c, const Tensor& a, bool ta, const Tensor& b, bool tb) {
  const std::size_t m = c.rows(), n = c.cols();
  const std::size_t k = ta ? a.rows() : a.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a.at(p, i) : a.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        c.at(i, j) += av * (tb ? b.at(j, p) : b.at(p, j));
      }
    }
  }
}

}  // namespace

Var Tape::leaf(Tensor value) { return record(Op::Leaf, std::move(value), {}); }

Var Tape::constant(Tensor value) {
  Var v;
  v.value = std::move(value);
  return v;
}

Tape::Arg Tape::make_arg(const Var& v) const {
  Arg a;
  if (v.tracked()) {
    a.id = v.id;
  } else {
    a.stored = v.value;
  }
  return a;
}

void Tape::check_owner(const Var& v, const char* op_name) const {
  if (v.tracked() && v.owner != this) {
    throw std::invalid_argument(std::string(op_name) + ": operand was recorded on a different tape");
  }
}

Var Tape::record(Op op, Tensor value, std::vector<Arg> args) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.args = std::move(args);
  nodes_.push_back(std::move(n));
  Var v;
  v.id = static_cast<int>(nodes_.size()) - 1;
  v.owner = this;
  v.value = nodes_.back().value;
  return v;
}

const Tensor& Tape::arg_value(const Node& n, std::size_t i) const {
  const Arg& a = n.args[i];
  return a.id >= 0 ? nodes_[static_cast<std::size_t>(a.id)].value : a.stored;
}

Var Tape::binary_elementwise(Op op, const char* name, const Var& a, const Var& b) {
  check_owner(a, name);
  check_owner(b, name);
  BMap ma, mb;
  std::vector<std::size_t> oshape = resolve_broadcast(name, a.value, b.value, ma, mb);
  if (op == Op::Div) {
    for (double d : b.value.data()) {
      if (d == 0.0) throw std::domain_error("div: zero entry in divisor");
    }
  }
  Tensor out(oshape);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.value.at(ma(i));
    const double y = b.value.at(mb(i));
    double r = 0.0;
    switch (op) {
      case Op::Add: r = x + y; break;
      case Op::Sub: r = x - y; break;
      case Op::Mul: r = x * y; break;
      case Op::Div: r = x / y; break;
      default: break;
    }
    out.at(i) = r;
  }
  Var v = record(op, std::move(out), {make_arg(a), make_arg(b)});
  return v;
}

Var Tape::add(const Var& a, const Var& b) { return binary_elementwise(Op::Add, "add", a, b); }
Var Tape::sub(const Var& a, const Var& b) { return binary_elementwise(Op::Sub, "sub", a, b); }
Var Tape::mul(const Var& a, const Var& b) { return binary_elementwise(Op::Mul, "mul", a, b); }
Var Tape::div(const Var& a, const Var& b) { return binary_elementwise(Op::Div, "div", a, b); }

Var Tape::neg(const Var& a) {
  check_owner(a, "neg");
  Tensor out = a.value;
  for (double& x : out.data()) x = -x;
  return record(Op::Neg, std::move(out), {make_arg(a)});
}

Var Tape::scale(const Var& a, double c) {
  check_owner(a, "scale");
  Tensor out = a.value;
  for (double& x : out.data()) x *= c;
  Var v = record(Op::Scale, std::move(out), {make_arg(a)});
  nodes_.back().x0 = c;
  return v;
}

Var Tape::add_scalar(const Var& a, double c) {
  check_owner(a, "add_scalar");
  Tensor out = a.value;
  for (double& x : out.data()) x += c;
  Var v = record(Op::AddScalar, std::move(out), {make_arg(a)});
  nodes_.back().x0 = c;
  return v;
}

Var Tape::exp(const Var& a) {
  check_owner(a, "exp");
  Tensor out = a.value;
  for (double& x : out.data()) x = std::exp(x);
  return record(Op::Exp, std::move(out), {make_arg(a)});
}

Var Tape::log(const Var& a) {
  check_owner(a, "log");
  Tensor out = a.value;
  for (double& x : out.data()) {
    if (x <= 0.0) throw std::domain_error("log: non-positive input " + std::to_string(x));
    x = std::log(std::max(x, kLogFloor));
  }
  return record(Op::Log, std::move(out), {make_arg(a)});
}

Var Tape::sigmoid(const Var& a) {
  check_owner(a, "sigmoid");
  Tensor out = a.value;
  for (double& x : out.data()) x = stable_sigmoid(x);
  return record(Op::Sigmoid, std::move(out), {make_arg(a)});
}

Var Tape::tanh(const Var& a) {
  check_owner(a, "tanh");
  Tensor out = a.value;
  for (double& x : out.data()) x = std::tanh(x);
  return record(Op::Tanh, std::move(out), {make_arg(a)});
}

Var Tape::relu(const Var& a) {
  check_owner(a, "relu");
  Tensor out = a.value;
  for (double& x : out.data()) x = std::max(x, 0.0);
  return record(Op::Relu, std::move(out), {make_arg(a)});
}

Var Tape::softplus(const Var& a) {
  check_owner(a, "softplus");
  Tensor out = a.value;
  for (double& x : out.data()) x = stable_softplus(x);
  return record(Op::Softplus, std::move(out), {make_arg(a)});
}

Var Tape::logsigmoid(const Var& a) {
  check_owner(a, "logsigmoid");
  Tensor out = a.value;
  for (double& x : out.data()) x = stable_logsigmoid(x);
  return record(Op::LogSigmoid, std::move(out), {make_arg(a)});
}

Var Tape::clamp(const Var& a, double lo, double hi) {
  check_owner(a, "clamp");
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  Tensor out = a.value;
  for (double& x : out.data()) x = std::min(std::max(x, lo), hi);
  Var v = record(Op::Clamp, std::move(out), {make_arg(a)});
  nodes_.back().x0 = lo;
  nodes_.back().x1 = hi;
  return v;
}

Var Tape::matmul(const Var& a, const Var& b) {
  check_owner(a, "matmul");
  check_owner(b, "matmul");
  if (a.value.rank() != 2 || b.value.rank() != 2 || a.value.cols() != b.value.rows()) {
    throw std::invalid_argument("matmul: shapes " + shape_str(a.value.shape()) + " and " +
                                shape_str(b.value.shape()) + " do not conform");
  }
  Tensor out({a.value.rows(), b.value.cols()});
  gemm_acc(out, a.value, false, b.value, false);
  return record(Op::Matmul, std::move(out), {make_arg(a), make_arg(b)});
}

Var Tape::sum(const Var& a) {
  check_owner(a, "sum");
  double s = 0.0;
  for (double x : a.value.data()) s += x;
  return record(Op::Sum, Tensor::scalar(s), {make_arg(a)});
}

Var Tape::mean(const Var& a) {
  check_owner(a, "mean");
  if (a.value.size() == 0) throw std::invalid_argument("mean: empty tensor");
  double s = 0.0;
  for (double x : a.value.data()) s += x;
  return record(Op::Mean, Tensor::scalar(s / static_cast<double>(a.value.size())),
                {make_arg(a)});
}

Var Tape::sum_rows(const Var& a) {
  check_owner(a, "sum_rows");
  if (a.value.rank() != 2) {
    throw std::invalid_argument("sum_rows: expected rank 2, got " + shape_str(a.value.shape()));
  }
  const std::size_t b = a.value.rows(), d = a.value.cols();
  Tensor out({b});
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a.value.at(i, j);
    out.at(i) = s;
  }
  return record(Op::SumRows, std::move(out), {make_arg(a)});
}

Var Tape::broadcast(const Var& a, std::size_t copies) {
  check_owner(a, "broadcast");
  if (a.value.rank() != 1 || copies == 0) {
    throw std::invalid_argument("broadcast: expected rank-1 input and copies > 0, got " +
                                shape_str(a.value.shape()) + " x " + std::to_string(copies));
  }
  const std::size_t d = a.value.size();
  Tensor out({copies, d});
  for (std::size_t i = 0; i < copies; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = a.value.at(j);
  }
  Var v = record(Op::Broadcast, std::move(out), {make_arg(a)});
  nodes_.back().s0 = copies;
  return v;
}

Var Tape::reshape(const Var& a, std::vector<std::size_t> shape) {
  check_owner(a, "reshape");
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != a.value.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.value.shape()) + " as " +
                                shape_str(shape));
  }
  Tensor out(shape, a.value.data());
  Var v = record(Op::Reshape, std::move(out), {make_arg(a)});
  nodes_.back().in_shape = a.value.shape();
  return v;
}

Var Tape::concat(const Var& a, const Var& b, int axis) {
  check_owner(a, "concat");
  check_owner(b, "concat");
  const auto& sa = a.value.shape();
  const auto& sb = b.value.shape();
  Tensor out;
  if (axis == 0 && sa.size() == 1 && sb.size() == 1) {
    out = Tensor({sa[0] + sb[0]});
    for (std::size_t i = 0; i < sa[0]; ++i) out.at(i) = a.value.at(i);
    for (std::size_t i = 0; i < sb[0]; ++i) out.at(sa[0] + i) = b.value.at(i);
  } else if (axis == 0 && sa.size() == 2 && sb.size() == 2 && sa[1] == sb[1]) {
    out = Tensor({sa[0] + sb[0], sa[1]});
    std::size_t k = 0;
    for (double x : a.value.data()) out.at(k++) = x;
    for (double x : b.value.data()) out.at(k++) = x;
  } else if (axis == 1 && sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0]) {
    out = Tensor({sa[0], sa[1] + sb[1]});
    for (std::size_t i = 0; i < sa[0]; ++i) {
      for (std::size_t j = 0; j < sa[1]; ++j) out.at(i, j) = a.value.at(i, j);
      for (std::size_t j = 0; j < sb[1]; ++j) out.at(i, sa[1] + j) = b.value.at(i, j);
    }
  } else {
    throw std::invalid_argument("concat: shapes " + shape_str(sa) + " and " + shape_str(sb) +
                                " do not conform along axis " + std::to_string(axis));
  }
  Var v = record(Op::Concat, std::move(out), {make_arg(a), make_arg(b)});
  nodes_.back().axis = axis;
  nodes_.back().s0 = axis == 0 ? sa[0] : sa[1];
  return v;
}

Var Tape::slice(const Var& a, int axis, std::size_t start, std::size_t len) {
  check_owner(a, "slice");
  const auto& s = a.value.shape();
  Tensor out;
  if (axis == 0 && s.size() == 1 && start + len <= s[0]) {
    out = Tensor({len});
    for (std::size_t i = 0; i < len; ++i) out.at(i) = a.value.at(start + i);
  } else if (axis == 0 && s.size() == 2 && start + len <= s[0]) {
    out = Tensor({len, s[1]});
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < s[1]; ++j) out.at(i, j) = a.value.at(start + i, j);
    }
  } else if (axis == 1 && s.size() == 2 && start + len <= s[1]) {
    out = Tensor({s[0], len});
    for (std::size_t i = 0; i < s[0]; ++i) {
      for (std::size_t j = 0; j < len; ++j) out.at(i, j) = a.value.at(i, start + j);
    }
  } else {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") along axis " +
                                std::to_string(axis) + " is invalid for shape " + shape_str(s));
  }
  Var v = record(Op::Slice, std::move(out), {make_arg(a)});
  nodes_.back().axis = axis;
  nodes_.back().s0 = start;
  nodes_.back().s1 = len;
  nodes_.back().in_shape = s;
  return v;
}

Tensor& Tape::grad_buf(int id) {
  auto i = static_cast<std::size_t>(id);
  if (!touched_[i]) {
    grads_[i] = Tensor::zeros(nodes_[i].value.shape());
    touched_[i] = 1;
  }
  return grads_[i];
}

void Tape::backward(const Var& root) {
  if (nodes_.empty()) throw std::logic_error("backward: tape is empty");
  if (backward_run_) {
    throw std::logic_error("backward: tape was already differentiated; rebuild the tape");
  }
  if (!root.tracked() || root.owner != this) {
    throw std::invalid_argument("backward: root is not recorded on this tape");
  }
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " +
                                shape_str(root.value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor{});
  touched_.assign(nodes_.size(), 0);
  grad_buf(root.id).at(0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    if (touched_[idx] && nodes_[idx].op != Op::Leaf) backprop_node(idx);
  }
  backward_run_ = true;
}

void Tape::backprop_node(std::size_t i) {
  const Node& n = nodes_[i];
  const Tensor& g = grads_[i];

  auto arg_grad = [&](std::size_t which) -> Tensor* {
    const Arg& a = n.args[which];
    return a.id >= 0 ? &grad_buf(a.id) : nullptr;
  };

  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const Tensor& av = arg_value(n, 0);
      const Tensor& bv = arg_value(n, 1);
      BMap ma, mb;
      resolve_broadcast("backward", av, bv, ma, mb);
      Tensor* ga = arg_grad(0);
      Tensor* gb = arg_grad(1);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = g.at(k);
        if (gk == 0.0) continue;
        const double x = av.at(ma(k));
        const double y = bv.at(mb(k));
        switch (n.op) {
          case Op::Add:
            if (ga) ga->at(ma(k)) += gk;
            if (gb) gb->at(mb(k)) += gk;
            break;
          case Op::Sub:
            if (ga) ga->at(ma(k)) += gk;
            if (gb) gb->at(mb(k)) -= gk;
            break;
          case Op::Mul:
            if (ga) ga->at(ma(k)) += gk * y;
            if (gb) gb->at(mb(k)) += gk * x;
            break;
          case Op::Div:
            if (ga) ga->at(ma(k)) += gk / y;
            if (gb) gb->at(mb(k)) -= gk * x / (y * y);
            break;
          default:
            break;
        }
      }
      return;
    }
    case Op::Neg:
    case Op::Scale:
    case Op::AddScalar:
    case Op::Exp:
    case Op::Log:
    case Op::Sigmoid:
    case Op::Tanh:
    case Op::Relu:
    case Op::Softplus:
    case Op::LogSigmoid:
    case Op::Clamp: {
      Tensor* ga = arg_grad(0);
      if (!ga) return;
      const Tensor& xin = arg_value(n, 0);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = g.at(k);
        if (gk == 0.0) continue;
        const double x = xin.at(k);
        double d = 0.0;
        switch (n.op) {
          case Op::Neg: d = -1.0; break;
          case Op::Scale: d = n.x0; break;
          case Op::AddScalar: d = 1.0; break;
          case Op::Exp: d = n.value.at(k); break;
          case Op::Log: d = x >= kLogFloor ? 1.0 / x : 0.0; break;
          case Op::Sigmoid: {
            const double s = n.value.at(k);
            d = s * (1.0 - s);
            break;
          }
          case Op::Tanh: {
            const double t = n.value.at(k);
            d = 1.0 - t * t;
            break;
          }
          case Op::Relu: d = x > 0.0 ? 1.0 : 0.0; break;
          case Op::Softplus: d = stable_sigmoid(x); break;
          case Op::LogSigmoid: d = stable_sigmoid(-x); break;
          case Op::Clamp: d = (x >= n.x0 && x <= n.x1) ? 1.0 : 0.0; break;
          default: break;
        }
        ga->at(k) += gk * d;
      }
      return;
    }
    case Op::Matmul: {
      const Tensor& av = arg_value(n, 0);
      const Tensor& bv = arg_value(n, 1);
      if (Tensor* ga = arg_grad(0)) gemm_acc(*ga, g, false, bv, true);
      if (Tensor* gb = arg_grad(1)) gemm_acc(*gb, av, true, g, false);
      return;
    }
    case Op::Sum:
    case Op::Mean: {
      Tensor* ga = arg_grad(0);
      if (!ga) return;
      const double gk =
          n.op == Op::Sum ? g.at(0) : g.at(0) / static_cast<double>(ga->size());
      for (double& x : ga->data()) x += gk;
      return;
    }
    case Op::SumRows: {
      Tensor* ga = arg_grad(0);
      if (!ga) return;
      const std::size_t b = ga->rows(), d = ga->cols();
      for (std::size_t r = 0; r < b; ++r) {
        const double gk = g.at(r);
        if (gk == 0.0) continue;
        for (std::size_t c = 0; c < d; ++c) ga->at(r, c) += gk;
      }
      return;
    }
    case Op::Broadcast: {
      Tensor* ga = arg_grad(0);
      if (!ga) return;
      const std::size_t d = ga->size();
      for (std::size_t r = 0; r < n.s0; ++r) {
        for (std::size_t c = 0; c < d; ++c) ga->at(c) += g.at(r * d + c);
      }
      return;
    }
    case Op::Reshape: {
      Tensor* ga = arg_grad(0);
      if (!ga) return;
      for (std::size_t k = 0; k < g.size(); ++k) ga->at(k) += g.at(k);
      return;
    }
    case Op::Concat: {
      const Tensor& av = arg_value(n, 0);
      const Tensor& bv = arg_value(n, 1);
      Tensor* ga = arg_grad(0);
      Tensor* gb = arg_grad(1);
      if (n.axis == 0) {
        const std::size_t na = av.size();
        if (ga) {
          for (std::size_t k = 0; k < na; ++k) ga->at(k) += g.at(k);
        }
        if (gb) {
          for (std::size_t k = 0; k < bv.size(); ++k) gb->at(k) += g.at(na + k);
        }
      } else {
        const std::size_t rows = av.rows(), da = av.cols(), db = bv.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          if (ga) {
            for (std::size_t c = 0; c < da; ++c) ga->at(r, c) += g.at(r * (da + db) + c);
          }
          if (gb) {
            for (std::size_t c = 0; c < db; ++c) gb->at(r, c) += g.at(r * (da + db) + da + c);
          }
        }
      }
      return;
    }
    case Op::Slice: {
      Tensor* ga = arg_grad(0);
      if (!ga) return;
      const auto& s = n.in_shape;
      if (n.axis == 0 && s.size() == 1) {
        for (std::size_t k = 0; k < n.s1; ++k) ga->at(n.s0 + k) += g.at(k);
      } else if (n.axis == 0) {
        for (std::size_t r = 0; r < n.s1; ++r) {
          for (std::size_t c = 0; c < s[1]; ++c) ga->at(n.s0 + r, c) += g.at(r * s[1] + c);
        }
      } else {
        for (std::size_t r = 0; r < s[0]; ++r) {
          for (std::size_t c = 0; c < n.s1; ++c) ga->at(r, n.s0 + c) += g.at(r * n.s1 + c);
        }
      }
      return;
    }
  }
}

Tensor Tape::grad(const Var& v) const {
  if (!v.tracked() || v.owner != this) return Tensor::zeros(v.value.shape());
  if (!backward_run_) throw std::logic_error("grad: backward has not been run on this tape");
  const auto i = static_cast<std::size_t>(v.id);
  if (!touched_[i]) return Tensor::zeros(v.value.shape());
  return grads_[i];
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  touched_.clear();
  backward_run_ = false;
}

}  // namespace unigen
