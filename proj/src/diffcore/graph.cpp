#include "ptdt/diffcore/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace ptdt::diff {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
MapMat<T> as_mat(T* p, Eigen::Index r, Eigen::Index c) {
  return MapMat<T>(p, r, c);
}
template <typename T>
CMapMat<T> as_mat(const T* p, Eigen::Index r, Eigen::Index c) {
  return CMapMat<T>(p, r, c);
}

std::string mismatch(std::string_view op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b);
}

}  // namespace

template <typename T>
Var Graph<T>::push(std::string_view op, std::vector<int> inputs, NdArray<T> value) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite output");
  }
  Node n;
  n.op = op;
  n.requires_grad = false;
  for (int i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
NdArray<T>& Graph<T>::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = NdArray<T>(n.value.shape(), T{0});
  return n.grad;
}

template <typename T>
void Graph<T>::require_same_shape(std::string_view op, Var a, Var b) const {
  const auto& sa = nodes_.at(a.id).value.shape();
  const auto& sb = nodes_.at(b.id).value.shape();
  if (sa != sb) throw ShapeError(mismatch(op, sa, sb));
}

template <typename T>
Var Graph<T>::input(NdArray<T> value) {
  return push("input", {}, std::move(value));
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  Var v = push("param", {}, p.value);
  Node& n = node(v);
  n.param = &p;
  n.requires_grad = grad_enabled_;
  return v;
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    throw ShapeError(mismatch("matmul", A.shape(), B.shape()));
  }
  const int n = A.dim(0), k = A.dim(1), m = B.dim(1);
  NdArray<T> out(Shape{n, m});
  as_mat(out.raw(), n, m).noalias() = as_mat(A.raw(), n, k) * as_mat(B.raw(), k, m);
  Var v = push("matmul", {a.id, b.id}, std::move(out));
  node(v).backward = [n, k, m](Graph& g, Node& self) {
    const int ia = self.inputs[0], ib = self.inputs[1];
    auto G = as_mat(self.grad.raw(), n, m);
    if (g.nodes_[ia].requires_grad) {
      auto& ga = g.grad_of(ia);
      as_mat(ga.raw(), n, k).noalias() += G * as_mat(g.nodes_[ib].value.raw(), k, m).transpose();
    }
    if (g.nodes_[ib].requires_grad) {
      auto& gb = g.grad_of(ib);
      as_mat(gb.raw(), k, m).noalias() += as_mat(g.nodes_[ia].value.raw(), n, k).transpose() * G;
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::bmm(Var a, Var b, bool transpose_b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.rank() != 3 || B.rank() != 3 || A.dim(0) != B.dim(0) ||
      A.dim(2) != (transpose_b ? B.dim(2) : B.dim(1))) {
    throw ShapeError(mismatch("bmm", A.shape(), B.shape()));
  }
  const int batch = A.dim(0), n = A.dim(1), k = A.dim(2);
  const int m = transpose_b ? B.dim(1) : B.dim(2);
  NdArray<T> out(Shape{batch, n, m});
  for (int i = 0; i < batch; ++i) {
    auto Ai = as_mat(A.raw() + std::size_t(i) * n * k, n, k);
    auto Oi = as_mat(out.raw() + std::size_t(i) * n * m, n, m);
    if (transpose_b) {
      Oi.noalias() = Ai * as_mat(B.raw() + std::size_t(i) * m * k, m, k).transpose();
    } else {
      Oi.noalias() = Ai * as_mat(B.raw() + std::size_t(i) * k * m, k, m);
    }
  }
  Var v = push("bmm", {a.id, b.id}, std::move(out));
  node(v).backward = [batch, n, k, m, transpose_b](Graph& g, Node& self) {
    const int ia = self.inputs[0], ib = self.inputs[1];
    const bool need_a = g.nodes_[ia].requires_grad, need_b = g.nodes_[ib].requires_grad;
    T* ga = need_a ? g.grad_of(ia).raw() : nullptr;
    T* gb = need_b ? g.grad_of(ib).raw() : nullptr;
    const T* A = g.nodes_[ia].value.raw();
    const T* B = g.nodes_[ib].value.raw();
    for (int i = 0; i < batch; ++i) {
      auto G = as_mat(self.grad.raw() + std::size_t(i) * n * m, n, m);
      auto Ai = as_mat(A + std::size_t(i) * n * k, n, k);
      if (transpose_b) {
        // out = A B^T with B [m,k]
        auto Bi = as_mat(B + std::size_t(i) * m * k, m, k);
        if (need_a) as_mat(ga + std::size_t(i) * n * k, n, k).noalias() += G * Bi;
        if (need_b) as_mat(gb + std::size_t(i) * m * k, m, k).noalias() += G.transpose() * Ai;
      } else {
        auto Bi = as_mat(B + std::size_t(i) * k * m, k, m);
        if (need_a) as_mat(ga + std::size_t(i) * n * k, n, k).noalias() += G * Bi.transpose();
        if (need_b) as_mat(gb + std::size_t(i) * k * m, k, m).noalias() += Ai.transpose() * G;
      }
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  require_same_shape("add", a, b);
  NdArray<T> out = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  Var v = push("add", {a.id, b.id}, std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    for (int in : self.inputs) {
      if (!g.nodes_[in].requires_grad) continue;
      auto& gi = g.grad_of(in);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  NdArray<T> out = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  Var v = push("sub", {a.id, b.id}, std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    const T sign[2] = {T{1}, T{-1}};
    for (int s = 0; s < 2; ++s) {
      const int in = self.inputs[s];
      if (!g.nodes_[in].requires_grad) continue;
      auto& gi = g.grad_of(in);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += sign[s] * self.grad[i];
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  NdArray<T> out = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  Var v = push("mul", {a.id, b.id}, std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    const int ia = self.inputs[0], ib = self.inputs[1];
    if (g.nodes_[ia].requires_grad) {
      auto& ga = g.grad_of(ia);
      const auto& B = g.nodes_[ib].value;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * B[i];
    }
    if (g.nodes_[ib].requires_grad) {
      auto& gb = g.grad_of(ib);
      const auto& A = g.nodes_[ia].value;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * A[i];
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::scale(Var a, T s) {
  NdArray<T> out = value(a);
  for (auto& x : out.data()) x *= s;
  Var v = push("scale", {a.id}, std::move(out));
  node(v).backward = [s](Graph& g, Node& self) {
    const int ia = self.inputs[0];
    if (!g.nodes_[ia].requires_grad) return;
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * self.grad[i];
  };
  return v;
}

template <typename T>
Var Graph<T>::add_rowwise(Var a, Var vec) {
  const auto& A = value(a);
  const auto& V = value(vec);
  if (V.rank() != 1 || A.rank() < 1 || static_cast<std::size_t>(V.dim(0)) != A.last()) {
    throw ShapeError(mismatch("add_rowwise", A.shape(), V.shape()));
  }
  NdArray<T> out = A;
  const std::size_t cols = A.last(), rows = A.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += V[c];
  }
  Var v = push("add_rowwise", {a.id, vec.id}, std::move(out));
  node(v).backward = [rows, cols](Graph& g, Node& self) {
    const int ia = self.inputs[0], iv = self.inputs[1];
    if (g.nodes_[ia].requires_grad) {
      auto& ga = g.grad_of(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    }
    if (g.nodes_[iv].requires_grad) {
      auto& gv = g.grad_of(iv);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gv[c] += self.grad[r * cols + c];
      }
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::relu(Var a) {
  NdArray<T> out = value(a);
  for (auto& x : out.data()) x = x > T{0} ? x : T{0};
  Var v = push("relu", {a.id}, std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    const int ia = self.inputs[0];
    if (!g.nodes_[ia].requires_grad) return;
    auto& ga = g.grad_of(ia);
    const auto& A = g.nodes_[ia].value;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (A[i] > T{0}) ga[i] += self.grad[i];
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::tanh(Var a) {
  NdArray<T> out = value(a);
  for (auto& x : out.data()) x = std::tanh(x);
  Var v = push("tanh", {a.id}, std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    const int ia = self.inputs[0];
    if (!g.nodes_[ia].requires_grad) return;
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const T y = self.value[i];
      ga[i] += self.grad[i] * (T{1} - y * y);
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::masked_softmax(Var a, const NdArray<T>& mask) {
  const auto& A = value(a);
  if (mask.shape() != A.shape()) throw ShapeError(mismatch("masked_softmax", A.shape(), mask.shape()));
  NdArray<T> out(A.shape(), T{0});
  const std::size_t cols = A.last(), rows = A.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = A.raw() + r * cols;
    const T* mk = mask.raw() + r * cols;
    T* y = out.raw() + r * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (std::isinf(mk[c]) && mk[c] < 0) continue;
      mx = std::max(mx, x[c] + mk[c]);
    }
    if (std::isinf(mx)) continue;
    T total{0};
    for (std::size_t c = 0; c < cols; ++c) {
      if (std::isinf(mk[c]) && mk[c] < 0) continue;
      y[c] = std::exp(x[c] + mk[c] - mx);
      total += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
  }
  Var v = push("masked_softmax", {a.id}, std::move(out));
  node(v).backward = [rows, cols](Graph& g, Node& self) {
    const int ia = self.inputs[0];
    if (!g.nodes_[ia].requires_grad) return;
    auto& ga = g.grad_of(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.value.raw() + r * cols;
      const T* gy = self.grad.raw() + r * cols;
      T dot{0};
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * gy[c];
      T* gx = ga.raw() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  const auto& X = value(x);
  const auto& G = value(gain);
  const auto& Bv = value(bias);
  const std::size_t d = X.last(), rows = X.rows();
  if (G.rank() != 1 || Bv.rank() != 1 || static_cast<std::size_t>(G.dim(0)) != d ||
      static_cast<std::size_t>(Bv.dim(0)) != d) {
    throw ShapeError(mismatch("layer_norm", X.shape(), G.shape()));
  }
  NdArray<T> out(X.shape());
  // cache: normalized values (rows*d) followed by inverse std per row.
  std::vector<T> cache(rows * d + rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = X.raw() + r * d;
    T mean{0};
    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
    mean /= static_cast<T>(d);
    T var{0};
    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    cache[rows * d + r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const T xh = (xr[c] - mean) * inv;
      cache[r * d + c] = xh;
      out[r * d + c] = xh * G[c] + Bv[c];
    }
  }
  Var v = push("layer_norm", {x.id, gain.id, bias.id}, std::move(out));
  node(v).cache = std::move(cache);
  node(v).backward = [rows, d](Graph& g, Node& self) {
    const int ix = self.inputs[0], ig = self.inputs[1], ib = self.inputs[2];
    const auto& Gv = g.nodes_[ig].value;
    const T* xhat = self.cache.data();
    const T* inv = self.cache.data() + rows * d;
    if (g.nodes_[ig].requires_grad) {
      auto& gg = g.grad_of(ig);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c) gg[c] += self.grad[r * d + c] * xhat[r * d + c];
    }
    if (g.nodes_[ib].requires_grad) {
      auto& gb = g.grad_of(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c) gb[c] += self.grad[r * d + c];
    }
    if (g.nodes_[ix].requires_grad) {
      auto& gx = g.grad_of(ix);
      const T dn = static_cast<T>(d);
      for (std::size_t r = 0; r < rows; ++r) {
        T sum_dy{0}, sum_dy_xh{0};
        for (std::size_t c = 0; c < d; ++c) {
          const T dy = self.grad[r * d + c] * Gv[c];
          sum_dy += dy;
          sum_dy_xh += dy * xhat[r * d + c];
        }
        for (std::size_t c = 0; c < d; ++c) {
          const T dy = self.grad[r * d + c] * Gv[c];
          gx[r * d + c] += inv[r] * (dy - sum_dy / dn - xhat[r * d + c] * sum_dy_xh / dn);
        }
      }
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::gather_rows(Var table, std::span<const int> idx) {
  const auto& Tb = value(table);
  if (Tb.rank() != 2) throw ShapeError("gather_rows: table must be 2-D, got " + to_string(Tb.shape()));
  const int n = Tb.dim(0), d = Tb.dim(1);
  if (idx.empty()) throw ShapeError("gather_rows: empty index list");
  NdArray<T> out(Shape{static_cast<int>(idx.size()), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                       to_string(Tb.shape()));
    }
    std::copy_n(Tb.raw() + std::size_t(idx[i]) * d, d, out.raw() + i * d);
  }
  Var v = push("gather_rows", {table.id}, std::move(out));
  node(v).index_cache.assign(idx.begin(), idx.end());
  node(v).backward = [d](Graph& g, Node& self) {
    const int it = self.inputs[0];
    if (!g.nodes_[it].requires_grad) return;
    auto& gt = g.grad_of(it);
    for (std::size_t i = 0; i < self.index_cache.size(); ++i) {
      T* dst = gt.raw() + std::size_t(self.index_cache[i]) * d;
      const T* src = self.grad.raw() + i * d;
      for (int c = 0; c < d; ++c) dst[c] += src[c];
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const auto& first = value(parts[0]);
  if (first.rank() != 2) throw ShapeError("concat_rows: inputs must be 2-D, got " + to_string(first.shape()));
  const int d = first.dim(1);
  int total = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    const auto& P = value(p);
    if (P.rank() != 2 || P.dim(1) != d) throw ShapeError(mismatch("concat_rows", first.shape(), P.shape()));
    total += P.dim(0);
    ids.push_back(p.id);
  }
  NdArray<T> out(Shape{total, d});
  std::size_t off = 0;
  for (Var p : parts) {
    const auto& P = value(p);
    std::copy(P.data().begin(), P.data().end(), out.raw() + off);
    off += P.size();
  }
  Var v = push("concat_rows", std::move(ids), std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    std::size_t off = 0;
    for (int in : self.inputs) {
      const std::size_t n = g.nodes_[in].value.size();
      if (g.nodes_[in].requires_grad) {
        auto& gi = g.grad_of(in);
        for (std::size_t i = 0; i < n; ++i) gi[i] += self.grad[off + i];
      }
      off += n;
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::reshape(Var a, Shape shape) {
  NdArray<T> out = value(a).reshaped(std::move(shape));
  Var v = push("reshape", {a.id}, std::move(out));
  node(v).backward = [](Graph& g, Node& self) {
    const int ia = self.inputs[0];
    if (!g.nodes_[ia].requires_grad) return;
    auto& ga = g.grad_of(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  };
  return v;
}

template <typename T>
Var Graph<T>::split_heads(Var x, int batch, int steps, int heads) {
  const auto& X = value(x);
  if (X.rank() != 2 || X.dim(0) != batch * steps || X.dim(1) % heads != 0) {
    throw ShapeError("split_heads: cannot split " + to_string(X.shape()) + " into " +
                     std::to_string(heads) + " heads over batch " + std::to_string(batch));
  }
  const int dh = X.dim(1) / heads;
  NdArray<T> out(Shape{batch * heads, steps, dh});
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < steps; ++t)
      for (int h = 0; h < heads; ++h)
        std::copy_n(X.raw() + (std::size_t(b) * steps + t) * heads * dh + std::size_t(h) * dh, dh,
                    out.raw() + ((std::size_t(b) * heads + h) * steps + t) * dh);
  Var v = push("split_heads", {x.id}, std::move(out));
  node(v).backward = [batch, steps, heads, dh](Graph& g, Node& self) {
    const int ix = self.inputs[0];
    if (!g.nodes_[ix].requires_grad) return;
    auto& gx = g.grad_of(ix);
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < steps; ++t)
        for (int h = 0; h < heads; ++h) {
          T* dst = gx.raw() + (std::size_t(b) * steps + t) * heads * dh + std::size_t(h) * dh;
          const T* src = self.grad.raw() + ((std::size_t(b) * heads + h) * steps + t) * dh;
          for (int c = 0; c < dh; ++c) dst[c] += src[c];
        }
  };
  return v;
}

template <typename T>
Var Graph<T>::merge_heads(Var x, int batch, int steps, int heads) {
  const auto& X = value(x);
  if (X.rank() != 3 || X.dim(0) != batch * heads || X.dim(1) != steps) {
    throw ShapeError("merge_heads: unexpected shape " + to_string(X.shape()));
  }
  const int dh = X.dim(2);
  NdArray<T> out(Shape{batch * steps, heads * dh});
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < steps; ++t)
      for (int h = 0; h < heads; ++h)
        std::copy_n(X.raw() + ((std::size_t(b) * heads + h) * steps + t) * dh, dh,
                    out.raw() + (std::size_t(b) * steps + t) * heads * dh + std::size_t(h) * dh);
  Var v = push("merge_heads", {x.id}, std::move(out));
  node(v).backward = [batch, steps, heads, dh](Graph& g, Node& self) {
    const int ix = self.inputs[0];
    if (!g.nodes_[ix].requires_grad) return;
    auto& gx = g.grad_of(ix);
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < steps; ++t)
        for (int h = 0; h < heads; ++h) {
          T* dst = gx.raw() + ((std::size_t(b) * heads + h) * steps + t) * dh;
          const T* src = self.grad.raw() + (std::size_t(b) * steps + t) * heads * dh + std::size_t(h) * dh;
          for (int c = 0; c < dh; ++c) dst[c] += src[c];
        }
  };
  return v;
}

template <typename T>
Var Graph<T>::mse(Var pred, const NdArray<T>& target, const NdArray<T>& weights) {
  const auto& P = value(pred);
  if (P.shape() != target.shape()) throw ShapeError(mismatch("mse", P.shape(), target.shape()));
  if (P.shape() != weights.shape()) throw ShapeError(mismatch("mse", P.shape(), weights.shape()));
  T wsum{0}, acc{0};
  for (std::size_t i = 0; i < P.size(); ++i) {
    const T e = P[i] - target[i];
    acc += weights[i] * e * e;
    wsum += weights[i];
  }
  if (wsum <= T{0}) throw ContractError("mse: weights sum to zero");
  Var v = push("mse", {pred.id}, NdArray<T>::scalar(acc / wsum));
  node(v).cache.assign(target.data().begin(), target.data().end());
  node(v).cache.insert(node(v).cache.end(), weights.data().begin(), weights.data().end());
  node(v).cache.push_back(wsum);
  node(v).backward = [](Graph& g, Node& self) {
    const int ip = self.inputs[0];
    if (!g.nodes_[ip].requires_grad) return;
    auto& gp = g.grad_of(ip);
    const auto& Pv = g.nodes_[ip].value;
    const std::size_t n = Pv.size();
    const T wsum = self.cache[2 * n];
    const T up = self.grad[0];
    for (std::size_t i = 0; i < n; ++i) {
      gp[i] += up * T{2} * self.cache[n + i] * (Pv[i] - self.cache[i]) / wsum;
    }
  };
  return v;
}

template <typename T>
Var Graph<T>::sum(Var a) {
  T acc{0};
  for (T x : value(a).data()) acc += x;
  Var v = push("sum", {a.id}, NdArray<T>::scalar(acc));
  node(v).backward = [](Graph& g, Node& self) {
    const int ia = self.inputs[0];
    if (!g.nodes_[ia].requires_grad) return;
    auto& ga = g.grad_of(ia);
    for (auto& x : ga.data()) x += self.grad[0];
  };
  return v;
}

template <typename T>
void Graph<T>::backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + to_string(root.value.shape()));
  }
  if (!root.requires_grad) return;
  grad_of(loss.id)[0] = T{1};
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    } else if (n.backward) {
      n.backward(*this, n);
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ptdt::diff
