#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ptdt/diffcore/ndarray.hpp"
#include "ptdt/diffcore/params.hpp"

namespace ptdt::diff {

// Handle to a node on a Graph. Only meaningful together with the graph that
// produced it.
struct Var {
  int id = -1;
};

// Reverse-mode tape. Nodes are appended in execution order, which is a valid
// topological order; `backward` walks them once in reverse.
//
// No operator broadcasts. Shapes must match exactly except where an op
// documents an explicit expansion (add_rowwise, layer_norm gain/bias).
template <typename T>
class Graph {
 public:
  struct Node {
    std::string_view op;
    std::vector<int> inputs;
    NdArray<T> value;
    NdArray<T> grad;
    std::vector<T> cache;
    std::vector<int> index_cache;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    std::function<void(Graph&, Node&)> backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Parameters enter as leaves that require grad unless grad is disabled
  // (inference), in which case they behave like constants.
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  // When set, every forward op verifies its output is finite and throws
  // NumericError otherwise.
  void set_check_finite(bool on) { check_finite_ = on; }

  Var input(NdArray<T> value);
  Var param(Parameter<T>& p);

  // [n,k] x [k,m] -> [n,m]
  Var matmul(Var a, Var b);
  // [B,n,k] x [B,k,m] -> [B,n,m]; with transpose_b, b is [B,m,k].
  Var bmm(Var a, Var b, bool transpose_b = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T s);
  // a[..., m] + v[m] on every row.
  Var add_rowwise(Var a, Var v);
  Var relu(Var a);
  Var tanh(Var a);
  // Softmax over the last axis of (a + mask). Entries whose mask is -inf get
  // exactly zero weight; a fully masked row yields all zeros.
  Var masked_softmax(Var a, const NdArray<T>& mask);
  // Normalizes each row of x[..., d] then applies gain[d], bias[d].
  Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-5));
  // rows of table[N,d] selected by idx -> [len(idx), d]
  Var gather_rows(Var table, std::span<const int> idx);
  // stacks [n_i, d] blocks -> [sum n_i, d]
  Var concat_rows(std::span<const Var> parts);
  Var reshape(Var a, Shape shape);
  // [B*T, H*dh] -> [B*H, T, dh] and back.
  Var split_heads(Var x, int batch, int steps, int heads);
  Var merge_heads(Var x, int batch, int steps, int heads);
  // sum(w * (pred - target)^2) / sum(w); scalar [1].
  Var mse(Var pred, const NdArray<T>& target, const NdArray<T>& weights);
  Var sum(Var a);

  // Composite: x[n,k] W[k,m] + b[m].
  Var linear(Var x, Var w, Var b) { return add_rowwise(matmul(x, w), b); }

  const NdArray<T>& value(Var v) const { return nodes_.at(v.id).value; }
  const NdArray<T>& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::string_view op(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const { return nodes_.size(); }

  // Accumulates d(loss)/d(param) into each reachable Parameter::grad. Leaves
  // not reached receive nothing, i.e. keep a zero grad after zero_grad().
  void backward(Var loss);

 private:
  Node& node(Var v) { return nodes_.at(v.id); }
  Var push(std::string_view op, std::vector<int> inputs, NdArray<T> value);
  NdArray<T>& grad_of(int id);
  void require_same_shape(std::string_view op, Var a, Var b) const;

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool check_finite_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace ptdt::diff
