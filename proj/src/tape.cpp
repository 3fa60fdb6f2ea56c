#include "dbpae/tape.hpp"

#include <cstring>

#include "dbpae/kernels.hpp"

namespace dbpae {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

[[noreturn]] void shape_error1(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": invalid shape " + shape_str(a) + " (" + why + ")");
}

// Broadcast validity: align trailing axes; each source extent must equal the
// target extent or be 1; the source may have fewer axes.
bool broadcastable(const Shape& src, const Shape& dst) {
  if (src.size() > dst.size()) return false;
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::size_t s = src[src.size() - 1 - i];
    std::size_t d = dst[dst.size() - 1 - i];
    if (s != d && s != 1) return false;
  }
  return true;
}

}  // namespace

const Tensor& GradientMap::value(Var v) const {
  auto it = values_.find(v.id);
  if (it == values_.end()) throw std::logic_error("GradientMap: variable was not differentiated");
  return it->second;
}

Var GradientMap::node(Var v) const {
  if (!graph_) throw std::logic_error("GradientMap: built without create_graph");
  auto it = nodes_.find(v.id);
  if (it == nodes_.end()) throw std::logic_error("GradientMap: variable was not differentiated");
  return it->second;
}

Var Tape::push(Op op, std::vector<int> parents, Tensor value, double scalar, std::size_t s0,
               std::size_t s1) {
  bool rg = false;
  for (int p : parents) rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
  nodes_.push_back(Node{op, std::move(parents), std::move(value), rg, scalar, s0, s1});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::check_owned(const char* op, Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::logic_error(std::string(op) + ": operand is not a node of this tape");
}

void Tape::truncate(std::size_t n) {
  if (n > nodes_.size()) throw std::logic_error("Tape::truncate beyond end");
  nodes_.resize(n);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (value.empty()) throw std::logic_error("leaf: empty tensor");
  Var v = push(Op::Leaf, {}, std::move(value));
  nodes_.back().requires_grad = requires_grad;
  return v;
}

Var Tape::add(Var a, Var b) {
  check_owned("add", a);
  check_owned("add", b);
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  std::vector<double> out(a.value().size());
  kernels::binary_map(kernels::Binary::Add, a.value().data().data(), b.value().data().data(),
                      out.data(), out.size());
  return push(Op::Add, {a.id, b.id}, Tensor(a.shape(), std::move(out)));
}

Var Tape::sub(Var a, Var b) {
  check_owned("subtract", a);
  check_owned("subtract", b);
  if (a.shape() != b.shape()) shape_error("subtract", a.shape(), b.shape());
  std::vector<double> out(a.value().size());
  kernels::binary_map(kernels::Binary::Sub, a.value().data().data(), b.value().data().data(),
                      out.data(), out.size());
  return push(Op::Sub, {a.id, b.id}, Tensor(a.shape(), std::move(out)));
}

Var Tape::mul(Var a, Var b) {
  check_owned("elementwise-multiply", a);
  check_owned("elementwise-multiply", b);
  if (a.shape() != b.shape()) shape_error("elementwise-multiply", a.shape(), b.shape());
  std::vector<double> out(a.value().size());
  kernels::binary_map(kernels::Binary::Mul, a.value().data().data(), b.value().data().data(),
                      out.data(), out.size());
  return push(Op::Mul, {a.id, b.id}, Tensor(a.shape(), std::move(out)));
}

Var Tape::div(Var a, Var b) {
  check_owned("elementwise-divide", a);
  check_owned("elementwise-divide", b);
  if (a.shape() != b.shape()) shape_error("elementwise-divide", a.shape(), b.shape());
  std::vector<double> out(a.value().size());
  kernels::binary_map(kernels::Binary::Div, a.value().data().data(), b.value().data().data(),
                      out.data(), out.size());
  return push(Op::Div, {a.id, b.id}, Tensor(a.shape(), std::move(out)));
}

Var Tape::matmul(Var a, Var b) {
  check_owned("matrix-multiply", a);
  check_owned("matrix-multiply", b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    shape_error("matrix-multiply", sa, sb);
  std::size_t n = sa[0], k = sa[1], m = sb[1];
  std::vector<double> out(n * m);
  kernels::matmul(a.value().data().data(), b.value().data().data(), out.data(), n, k, m);
  return push(Op::MatMul, {a.id, b.id}, Tensor({n, m}, std::move(out)));
}

Var Tape::transpose(Var a) {
  check_owned("transpose", a);
  const Shape& s = a.shape();
  if (s.size() != 2) shape_error1("transpose", s, "rank-2 required");
  std::vector<double> out(a.value().size());
  kernels::transpose(a.value().data().data(), out.data(), s[0], s[1]);
  return push(Op::Transpose, {a.id}, Tensor({s[1], s[0]}, std::move(out)));
}

namespace {
Tensor unary_tensor(kernels::Unary op, const Tensor& in) {
  std::vector<double> out(in.size());
  kernels::unary_map(op, in.data().data(), out.data(), out.size());
  return Tensor(in.shape(), std::move(out));
}
}  // namespace

Var Tape::sigmoid(Var a) {
  check_owned("sigmoid", a);
  return push(Op::Sigmoid, {a.id}, unary_tensor(kernels::Unary::Sigmoid, a.value()));
}

Var Tape::tanh(Var a) {
  check_owned("tanh", a);
  return push(Op::Tanh, {a.id}, unary_tensor(kernels::Unary::Tanh, a.value()));
}

Var Tape::exp(Var a) {
  check_owned("exp", a);
  return push(Op::Exp, {a.id}, unary_tensor(kernels::Unary::Exp, a.value()));
}

Var Tape::log(Var a) {
  check_owned("log", a);
  return push(Op::Log, {a.id}, unary_tensor(kernels::Unary::Log, a.value()));
}

Var Tape::square(Var a) {
  check_owned("square", a);
  return push(Op::Square, {a.id}, unary_tensor(kernels::Unary::Square, a.value()));
}

Var Tape::softplus(Var a) {
  check_owned("softplus", a);
  return push(Op::Softplus, {a.id}, unary_tensor(kernels::Unary::Softplus, a.value()));
}

Var Tape::scalar_mul(Var a, double c) {
  check_owned("scalar-multiply", a);
  std::vector<double> out(a.value().size());
  kernels::scalar_mul(a.value().data().data(), c, out.data(), out.size());
  return push(Op::ScalarMul, {a.id}, Tensor(a.shape(), std::move(out)), c);
}

Var Tape::broadcast_to(Var a, Shape target) {
  check_owned("broadcast", a);
  const Shape& s = a.shape();
  if (!broadcastable(s, target)) shape_error("broadcast", s, target);
  const Tensor& in = a.value();
  std::size_t outn = shape_size(target);
  std::vector<double> out(outn);
  if (in.size() == 1) {
    std::fill(out.begin(), out.end(), in[0]);
  } else if (in.size() == outn) {
    std::memcpy(out.data(), in.data().data(), outn * sizeof(double));
  } else if (target.size() == 2 && in.size() == target[1]) {
    kernels::tile_rows(in.data().data(), out.data(), target[0], target[1]);
  } else if (target.size() == 2 && s.size() == 2 && s[0] == target[0] && s[1] == 1) {
    kernels::tile_cols(in.data().data(), out.data(), target[0], target[1]);
  } else {
    shape_error("broadcast", s, target);
  }
  return push(Op::BroadcastTo, {a.id}, Tensor(std::move(target), std::move(out)));
}

Var Tape::reduce_sum_to(Var a, Shape target) {
  check_owned("sum", a);
  const Shape& s = a.shape();
  if (!broadcastable(target, s)) shape_error("sum", s, target);
  const Tensor& in = a.value();
  std::size_t outn = shape_size(target);
  std::vector<double> out(outn);
  if (outn == 1) {
    out[0] = kernels::total_sum(in.data().data(), in.size());
  } else if (outn == in.size()) {
    std::memcpy(out.data(), in.data().data(), outn * sizeof(double));
  } else if (s.size() == 2 && outn == s[1]) {
    kernels::col_sums(in.data().data(), out.data(), s[0], s[1]);
  } else if (s.size() == 2 && target.size() == 2 && target[0] == s[0] && target[1] == 1) {
    kernels::row_sums(in.data().data(), out.data(), s[0], s[1]);
  } else {
    shape_error("sum", s, target);
  }
  return push(Op::ReduceSumTo, {a.id}, Tensor(std::move(target), std::move(out)));
}

Var Tape::mean(Var a) {
  check_owned("mean", a);
  std::size_t n = a.value().size();
  return scalar_mul(sum(a), 1.0 / static_cast<double>(n));
}

Var Tape::concat_cols(Var a, Var b) {
  Var parts[2] = {a, b};
  return concat_cols(std::span<const Var>(parts, 2));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  for (Var p : parts) check_owned("concat", p);
  const Shape& first = parts[0].shape();
  std::size_t rank = first.size();
  if (rank != 1 && rank != 2) shape_error1("concat", first, "rank-1 or rank-2 required");
  std::size_t rows = rank == 2 ? first[0] : 1;
  std::size_t total_cols = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    const Shape& s = p.shape();
    if (s.size() != rank || (rank == 2 && s[0] != rows)) shape_error("concat", first, s);
    total_cols += s[rank - 1];
    ids.push_back(p.id);
  }
  std::vector<double> out(rows * total_cols);
  std::size_t off = 0;
  for (Var p : parts) {
    std::size_t w = p.shape()[rank - 1];
    const double* src = p.value().data().data();
    for (std::size_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * total_cols + off, src + r * w, w * sizeof(double));
    off += w;
  }
  Shape target = rank == 2 ? Shape{rows, total_cols} : Shape{total_cols};
  return push(Op::ConcatCols, std::move(ids), Tensor(std::move(target), std::move(out)));
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t end) {
  check_owned("slice", a);
  const Shape& s = a.shape();
  std::size_t rank = s.size();
  if (rank != 1 && rank != 2) shape_error1("slice", s, "rank-1 or rank-2 required");
  std::size_t cols = s[rank - 1];
  if (begin >= end || end > cols)
    shape_error1("slice", s,
                 "bounds [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  std::size_t rows = rank == 2 ? s[0] : 1;
  std::size_t w = end - begin;
  std::vector<double> out(rows * w);
  const double* src = a.value().data().data();
  for (std::size_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * w, src + r * cols + begin, w * sizeof(double));
  Shape target = rank == 2 ? Shape{rows, w} : Shape{w};
  return push(Op::SliceCols, {a.id}, Tensor(std::move(target), std::move(out)), 0.0, begin, end);
}

void Tape::accumulate(int parent, Var contrib, std::vector<int>& adj,
                      const std::vector<char>& active) {
  if (!active[static_cast<std::size_t>(parent)]) return;
  int& slot = adj[static_cast<std::size_t>(parent)];
  slot = slot < 0 ? contrib.id : add(Var{this, slot}, contrib).id;
}

void Tape::emit_vjps(int id, Var g, std::vector<int>& adj, const std::vector<char>& active) {
  // Local copy: recording vjp ops may reallocate nodes_.
  const Node n = nodes_[static_cast<std::size_t>(id)];
  Var self{this, id};
  auto parent = [&](std::size_t i) { return Var{this, n.parents[i]}; };
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Add:
      accumulate(n.parents[0], g, adj, active);
      accumulate(n.parents[1], g, adj, active);
      break;
    case Op::Sub:
      accumulate(n.parents[0], g, adj, active);
      accumulate(n.parents[1], neg(g), adj, active);
      break;
    case Op::Mul:
      if (active[static_cast<std::size_t>(n.parents[0])])
        accumulate(n.parents[0], mul(g, parent(1)), adj, active);
      if (active[static_cast<std::size_t>(n.parents[1])])
        accumulate(n.parents[1], mul(g, parent(0)), adj, active);
      break;
    case Op::Div:
      if (active[static_cast<std::size_t>(n.parents[0])])
        accumulate(n.parents[0], div(g, parent(1)), adj, active);
      if (active[static_cast<std::size_t>(n.parents[1])])
        accumulate(n.parents[1], neg(mul(g, div(self, parent(1)))), adj, active);
      break;
    case Op::MatMul:
      if (active[static_cast<std::size_t>(n.parents[0])])
        accumulate(n.parents[0], matmul(g, transpose(parent(1))), adj, active);
      if (active[static_cast<std::size_t>(n.parents[1])])
        accumulate(n.parents[1], matmul(transpose(parent(0)), g), adj, active);
      break;
    case Op::Transpose:
      accumulate(n.parents[0], transpose(g), adj, active);
      break;
    case Op::Sigmoid: {
      Var t = mul(g, self);
      accumulate(n.parents[0], sub(t, mul(t, self)), adj, active);
      break;
    }
    case Op::Tanh:
      accumulate(n.parents[0], sub(g, mul(mul(g, self), self)), adj, active);
      break;
    case Op::Exp:
      accumulate(n.parents[0], mul(g, self), adj, active);
      break;
    case Op::Log:
      accumulate(n.parents[0], div(g, parent(0)), adj, active);
      break;
    case Op::Square:
      accumulate(n.parents[0], scalar_mul(mul(g, parent(0)), 2.0), adj, active);
      break;
    case Op::Softplus:
      accumulate(n.parents[0], mul(g, sigmoid(parent(0))), adj, active);
      break;
    case Op::ScalarMul:
      accumulate(n.parents[0], scalar_mul(g, n.scalar), adj, active);
      break;
    case Op::BroadcastTo:
      accumulate(n.parents[0], reduce_sum_to(g, parent(0).shape()), adj, active);
      break;
    case Op::ReduceSumTo:
      accumulate(n.parents[0], broadcast_to(g, parent(0).shape()), adj, active);
      break;
    case Op::ConcatCols: {
      std::size_t off = 0;
      for (std::size_t i = 0; i < n.parents.size(); ++i) {
        Var p = parent(i);
        std::size_t w = p.shape()[p.shape().size() - 1];
        if (active[static_cast<std::size_t>(n.parents[i])])
          accumulate(n.parents[i], slice_cols(g, off, off + w), adj, active);
        off += w;
      }
      break;
    }
    case Op::SliceCols: {
      Var p = parent(0);
      const Shape& ps = p.shape();
      std::size_t rank = ps.size();
      std::size_t cols = ps[rank - 1];
      std::size_t rows = rank == 2 ? ps[0] : 1;
      std::vector<Var> parts;
      auto zeros = [&](std::size_t w) {
        Shape zs = rank == 2 ? Shape{rows, w} : Shape{w};
        return constant(Tensor::zeros(std::move(zs)));
      };
      if (n.s0 > 0) parts.push_back(zeros(n.s0));
      parts.push_back(g);
      if (n.s1 < cols) parts.push_back(zeros(cols - n.s1));
      Var padded = parts.size() == 1 ? g : concat_cols(parts);
      accumulate(n.parents[0], padded, adj, active);
      break;
    }
  }
}

GradientMap Tape::backward(Var loss, std::span<const Var> wrt, bool create_graph) {
  check_owned("backward", loss);
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  for (Var w : wrt) {
    if (w.tape != this || w.id < 0 || static_cast<std::size_t>(w.id) >= nodes_.size())
      throw std::logic_error("backward: wrt node not on tape");
  }

  const std::size_t mark = nodes_.size();
  const int top = loss.id;

  // Restrict the sweep to nodes on some path from a wrt variable to the loss.
  std::vector<char> from_wrt(mark, 0);
  for (Var w : wrt) from_wrt[static_cast<std::size_t>(w.id)] = 1;
  for (std::size_t i = 0; i < mark; ++i) {
    if (from_wrt[i]) continue;
    for (int p : nodes_[i].parents) {
      if (from_wrt[static_cast<std::size_t>(p)]) {
        from_wrt[i] = 1;
        break;
      }
    }
  }
  std::vector<char> active(mark, 0);
  {
    std::vector<char> anc(mark, 0);
    anc[static_cast<std::size_t>(top)] = 1;
    for (int i = top; i >= 0; --i) {
      if (!anc[static_cast<std::size_t>(i)]) continue;
      for (int p : nodes_[static_cast<std::size_t>(i)].parents)
        anc[static_cast<std::size_t>(p)] = 1;
    }
    for (std::size_t i = 0; i < mark; ++i) active[i] = anc[i] && from_wrt[i];
  }

  std::vector<int> adj(mark, -1);
  adj[static_cast<std::size_t>(top)] = constant(Tensor::full(loss.shape(), 1.0)).id;

  for (int i = top; i >= 0; --i) {
    if (adj[static_cast<std::size_t>(i)] < 0) continue;
    if (!active[static_cast<std::size_t>(i)] && i != top) continue;
    if (i == top && !active[static_cast<std::size_t>(i)]) break;  // loss independent of wrt
    emit_vjps(i, Var{this, adj[static_cast<std::size_t>(i)]}, adj, active);
  }

  GradientMap gm;
  gm.graph_ = create_graph;
  for (Var w : wrt) {
    int a = adj[static_cast<std::size_t>(w.id)];
    if (a >= 0) {
      gm.values_[w.id] = value_of(a);
      if (create_graph) gm.nodes_[w.id] = Var{this, a};
    } else {
      Tensor z = Tensor::zeros(w.shape());
      if (create_graph) gm.nodes_[w.id] = constant(z);
      gm.values_[w.id] = std::move(z);
    }
  }
  if (!create_graph) truncate(mark);
  return gm;
}

}  // namespace dbpae
