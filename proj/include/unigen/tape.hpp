#pragma once

#include <cstddef>
#include <vector>

#include "unigen/tensor.hpp"

namespace unigen {

class Tape;

/// Handle to a value that may be tracked on a tape. Detached handles
/// (constants, or anything built from Tape::constant) carry id == -1 and are
/// never recorded; gradients for them are identically zero.
struct Var {
  Tensor value;
  int id = -1;
  const Tape* owner = nullptr;

  bool tracked() const { return id >= 0; }
  const std::vector<std::size_t>& shape() const { return value.shape(); }
};

/// Define-by-run reverse-mode tape. A tape is built fresh for every loss
/// evaluation: record leaves and ops forward, call backward(root) once on a
/// scalar root, read gradients, then discard or reset().
class Tape {
 public:
  /// Tracked input; allocates a tape node.
  Var leaf(Tensor value);
  /// Untracked value; no node is allocated on any tape.
  static Var constant(Tensor value);

  // Arithmetic. Shapes must match, with two broadcast forms: [D] against
  // [B,D] (stretched across the leading batch dimension) and [1] against
  // anything.
  Var add(const Var& a, const Var& b);
  Var sub(const Var& a, const Var& b);
  Var mul(const Var& a, const Var& b);
  /// Elementwise division; any zero in the divisor is a domain error.
  Var div(const Var& a, const Var& b);
  Var neg(const Var& a);
  Var scale(const Var& a, double c);
  Var add_scalar(const Var& a, double c);

  // Elementwise nonlinearities.
  Var exp(const Var& a);
  /// Natural log. Inputs must be positive (domain error otherwise); values
  /// below 1e-12 are floored there and get zero gradient.
  Var log(const Var& a);
  Var sigmoid(const Var& a);
  Var tanh(const Var& a);
  Var relu(const Var& a);
  Var softplus(const Var& a);
  /// log(sigmoid(x)), computed in stable fused form.
  Var logsigmoid(const Var& a);
  Var clamp(const Var& a, double lo, double hi);

  /// [m,k] x [k,n] -> [m,n].
  Var matmul(const Var& a, const Var& b);

  // Reductions and shape ops.
  Var sum(const Var& a);   // -> [1]
  Var mean(const Var& a);  // -> [1]
  /// [B,D] -> [B], summing each row.
  Var sum_rows(const Var& a);
  /// [D] -> [copies, D].
  Var broadcast(const Var& a, std::size_t copies);
  Var reshape(const Var& a, std::vector<std::size_t> shape);
  /// Concatenate along axis 0 (rank 1 or 2) or axis 1 (rank 2).
  Var concat(const Var& a, const Var& b, int axis);
  /// Contiguous slice [start, start+len) along axis 0 or 1.
  Var slice(const Var& a, int axis, std::size_t start, std::size_t len);

  /// Run reverse accumulation from a scalar root recorded on this tape.
  /// Errors: empty tape, detached or foreign root, non-scalar root, or a
  /// second call without rebuilding the tape.
  void backward(const Var& root);

  /// Gradient of the last backward() root with respect to v. Zero tensor of
  /// matching shape for detached handles or untouched nodes.
  Tensor grad(const Var& v) const;

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_run() const { return backward_run_; }
  void reset();

 private:
  enum class Op {
    Leaf, Add, Sub, Mul, Div, Neg, Scale, AddScalar,
    Exp, Log, Sigmoid, Tanh, Relu, Softplus, LogSigmoid, Clamp,
    Matmul, Sum, Mean, SumRows, Broadcast, Reshape, Concat, Slice,
  };

  struct Arg {
    int id = -1;     // node id, or -1 for a stored constant
    Tensor stored;   // operand value when id == -1
  };

  struct Node {
    Op op;
    Tensor value;
    std::vector<Arg> args;
    double x0 = 0.0, x1 = 0.0;       // scalar attributes (scale factor, clamp bounds)
    std::size_t s0 = 0, s1 = 0;      // structural attributes (start, len, copies)
    int axis = 0;
    std::vector<std::size_t> in_shape;  // input shape for reshape/slice grads
  };

  const Tensor& arg_value(const Node& n, std::size_t i) const;
  Var record(Op op, Tensor value, std::vector<Arg> args);
  Arg make_arg(const Var& v) const;
  void check_owner(const Var& v, const char* op_name) const;
  Tensor& grad_buf(int id);

  Var binary_elementwise(Op op, const char* name, const Var& a, const Var& b);
  void backprop_node(std::size_t i);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> touched_;
  bool backward_run_ = false;
};

}  // namespace unigen
