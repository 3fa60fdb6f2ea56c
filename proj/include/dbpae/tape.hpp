#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dbpae/tensor.hpp"

namespace dbpae {

// Thrown by recording ops when input shapes are invalid for the op.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; invalidated if the tape is
// truncated past it.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  // By value: the tape's node storage reallocates as ops record.
  Tensor value() const;
  Shape shape() const;
};

// Gradients of one backward sweep, keyed by the differentiated variables.
// Variables the sweep did not reach map to zero tensors. When the sweep was
// run with create_graph, each gradient is also available as a tape node so
// that a further backward can differentiate through it.
class GradientMap {
 public:
  const Tensor& value(Var v) const;
  Var node(Var v) const;
  bool has_graph() const { return graph_; }

 private:
  friend class Tape;
  std::unordered_map<int, Tensor> values_;
  std::unordered_map<int, Var> nodes_;
  bool graph_ = false;
};

// Recorded computation over tensors (define-by-run). A tape and its nodes are
// confined to one thread; distinct tapes may be used concurrently.
class Tape {
 public:
  enum class Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Transpose,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Square,
    Softplus,
    ScalarMul,
    BroadcastTo,
    ReduceSumTo,
    ConcatCols,
    SliceCols,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var div(Var a, Var b);  // elementwise
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  Var softplus(Var a);
  Var scalar_mul(Var a, double c);
  Var neg(Var a) { return scalar_mul(a, -1.0); }
  Var broadcast_to(Var a, Shape target);
  Var reduce_sum_to(Var a, Shape target);
  Var sum(Var a) { return reduce_sum_to(a, Shape{}); }
  Var mean(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);

  // Reverse-mode sweep from a scalar loss. With create_graph the returned
  // gradients are themselves tape nodes (differentiable); without it the
  // sweep's bookkeeping is discarded from the tape once values are extracted.
  GradientMap backward(Var loss, std::span<const Var> wrt, bool create_graph);
  GradientMap backward(Var loss, std::initializer_list<Var> wrt, bool create_graph) {
    return backward(loss, std::span<const Var>(wrt.begin(), wrt.size()), create_graph);
  }

  std::size_t size() const { return nodes_.size(); }
  void truncate(std::size_t n);
  Tensor value_of(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }

 private:
  struct Node {
    Op op;
    std::vector<int> parents;
    Tensor value;
    bool requires_grad = false;
    double scalar = 0.0;        // ScalarMul factor
    std::size_t s0 = 0, s1 = 0; // SliceCols bounds
  };

  Var push(Op op, std::vector<int> parents, Tensor value, double scalar = 0.0, std::size_t s0 = 0,
           std::size_t s1 = 0);
  void check_owned(const char* op, Var v) const;
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void emit_vjps(int id, Var g, std::vector<int>& adj, const std::vector<char>& active);
  void accumulate(int parent, Var contrib, std::vector<int>& adj, const std::vector<char>& active);

  std::vector<Node> nodes_;
};

inline Tensor Var::value() const { return tape->value_of(id); }
inline Shape Var::shape() const { return value().shape(); }

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }

}  // namespace dbpae
