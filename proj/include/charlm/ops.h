#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "charlm/common.h"
#include "charlm/kernels.h"
#include "charlm/tensor.h"

// Differentiable ops over TensorT. Shapes are explicit; the only broadcast
// is a bias vector added to matrix rows. Every backward accumulates (+=)
// into parent grads.

namespace charlm::ops {

namespace detail {

template <typename T>
inline void expect_rank(const TensorT<T>& t, size_t rank, const char* op) {
  if (t.shape().size() != rank)
    throw ShapeError(std::string(op) + ": expected rank-" + std::to_string(rank) + " tensor, got " +
                     shape_str(t.shape()));
}

template <typename T>
inline void expect_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// Sorts lookup positions by destination id so scatter groups have disjoint
// destinations; summation order within a group follows lookup order.
struct IdGroups {
  std::vector<int32_t> dst_ids;
  std::vector<int32_t> src_rows;
  std::vector<size_t> offsets;
};

inline IdGroups group_by_id(const std::vector<int32_t>& ids) {
  IdGroups g;
  g.src_rows.resize(ids.size());
  std::iota(g.src_rows.begin(), g.src_rows.end(), 0);
  std::stable_sort(g.src_rows.begin(), g.src_rows.end(),
                   [&](int32_t a, int32_t b) { return ids[a] < ids[b]; });
  g.offsets.push_back(0);
  for (size_t i = 0; i < g.src_rows.size(); ++i) {
    const int32_t id = ids[g.src_rows[i]];
    if (g.dst_ids.empty() || g.dst_ids.back() != id) {
      if (!g.dst_ids.empty()) g.offsets.push_back(i);
      g.dst_ids.push_back(id);
    }
  }
  g.offsets.push_back(g.src_rows.size());
  return g;
}

}  // namespace detail

// C[M,N] = A[M,K] * B[K,N]
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::expect_rank(a, 2, "matmul");
  detail::expect_rank(b, 2, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n);
  kernels::matmul_nn(a.data(), b.data(), out.data(), m, k, n, false);
  return make_op<T>(
      {m, n}, std::move(out), {a, b},
      [a = a, b = b, m, k, n](Node<T>& self) mutable {
        if (a.requires_grad())
          kernels::matmul_nt(self.grad.data(), b.data(), a.grad().data(), m, n, k, true);
        if (b.requires_grad())
          kernels::matmul_tn(a.data(), self.grad.data(), b.grad().data(), m, k, n, true);
      },
      "matmul");
}

// C[M,N] = A[M,K] * B[N,K]^T
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  detail::expect_rank(a, 2, "matmul_nt");
  detail::expect_rank(b, 2, "matmul_nt");
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<T> out(m * n);
  kernels::matmul_nt(a.data(), b.data(), out.data(), m, k, n, false);
  return make_op<T>(
      {m, n}, std::move(out), {a, b},
      [a = a, b = b, m, k, n](Node<T>& self) mutable {
        if (a.requires_grad())
          kernels::matmul_nn(self.grad.data(), b.data(), a.grad().data(), m, n, k, true);
        if (b.requires_grad())
          kernels::matmul_tn(self.grad.data(), a.data(), b.grad().data(), m, n, k, true);
      },
      "matmul_nt");
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  detail::expect_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  kernels::vadd(a.data(), b.data(), out.data(), a.size());
  return make_op<T>(
      a.shape(), std::move(out), {a, b},
      [a = a, b = b](Node<T>& self) mutable {
        if (a.requires_grad()) kernels::vaxpy(T(1), self.grad.data(), a.grad().data(), self.size());
        if (b.requires_grad()) kernels::vaxpy(T(1), self.grad.data(), b.grad().data(), self.size());
      },
      "add");
}

// X[M,N] + bias[N] broadcast over rows.
template <typename T>
TensorT<T> add_bias_rows(const TensorT<T>& x, const TensorT<T>& bias) {
  detail::expect_rank(x, 2, "add_bias_rows");
  detail::expect_rank(bias, 1, "add_bias_rows");
  if (x.cols() != bias.shape()[0])
    throw ShapeError("add_bias_rows: shape mismatch " + shape_str(x.shape()) + " vs " +
                     shape_str(bias.shape()));
  const size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n);
  for (size_t r = 0; r < m; ++r)
    kernels::vadd_serial(x.data() + r * n, bias.data(), out.data() + r * n, n);
  return make_op<T>(
      {m, n}, std::move(out), {x, bias},
      [x = x, bias = bias, m, n](Node<T>& self) mutable {
        if (x.requires_grad()) kernels::vaxpy(T(1), self.grad.data(), x.grad().data(), m * n);
        if (bias.requires_grad()) kernels::col_sums_acc(self.grad.data(), bias.grad().data(), m, n);
      },
      "add_bias_rows");
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  detail::expect_same_shape(a, b, "mul_elementwise");
  std::vector<T> out(a.size());
  kernels::vmul(a.data(), b.data(), out.data(), a.size());
  return make_op<T>(
      a.shape(), std::move(out), {a, b},
      [a = a, b = b](Node<T>& self) mutable {
        if (a.requires_grad()) kernels::vmul_acc(self.grad.data(), b.data(), a.grad().data(), self.size());
        if (b.requires_grad()) kernels::vmul_acc(self.grad.data(), a.data(), b.grad().data(), self.size());
      },
      "mul_elementwise");
}

template <typename T>
TensorT<T> scale_const(const TensorT<T>& x, T alpha) {
  std::vector<T> out(x.size());
  kernels::vscale(x.data(), alpha, out.data(), x.size());
  return make_op<T>(
      x.shape(), std::move(out), {x},
      [x = x, alpha](Node<T>& self) mutable {
        if (x.requires_grad()) kernels::vaxpy(alpha, self.grad.data(), x.grad().data(), self.size());
      },
      "scale_const");
}

template <typename T>
TensorT<T> tanh_op(const TensorT<T>& x) {
  std::vector<T> out(x.size());
  kernels::tanh_fwd(x.data(), out.data(), x.size());
  return make_op<T>(
      x.shape(), std::move(out), {x},
      [x = x](Node<T>& self) mutable {
        if (x.requires_grad())
          kernels::tanh_bwd_acc(self.value.data(), self.grad.data(), x.grad().data(), self.size());
      },
      "tanh");
}

template <typename T>
TensorT<T> sigmoid_op(const TensorT<T>& x) {
  std::vector<T> out(x.size());
  kernels::sigmoid_fwd(x.data(), out.data(), x.size());
  return make_op<T>(
      x.shape(), std::move(out), {x},
      [x = x](Node<T>& self) mutable {
        if (x.requires_grad())
          kernels::sigmoid_bwd_acc(self.value.data(), self.grad.data(), x.grad().data(), self.size());
      },
      "sigmoid");
}

template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const size_t n = parts[0].shape().size() == 2 ? parts[0].cols() : 0;
  size_t m = 0;
  for (const auto& p : parts) {
    detail::expect_rank(p, 2, "concat_rows");
    if (p.cols() != n)
      throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    m += p.rows();
  }
  std::vector<T> out(m * n);
  size_t row = 0;
  for (const auto& p : parts) {
    std::memcpy(out.data() + row * n, p.data(), p.size() * sizeof(T));
    row += p.rows();
  }
  auto parts_copy = parts;
  return make_op<T>(
      {m, n}, std::move(out), parts,
      [parts_copy, n](Node<T>& self) mutable {
        size_t row = 0;
        for (auto& p : parts_copy) {
          if (p.requires_grad())
            kernels::vaxpy(T(1), self.grad.data() + row * n, p.grad().data(), p.size());
          row += p.rows();
        }
      },
      "concat_rows");
}

template <typename T>
TensorT<T> slice_rows(const TensorT<T>& x, size_t start, size_t count) {
  detail::expect_rank(x, 2, "slice_rows");
  if (start + count > x.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + "," +
                     std::to_string(start + count) + ") out of range for " + shape_str(x.shape()));
  const size_t n = x.cols();
  std::vector<T> out(count * n);
  std::memcpy(out.data(), x.data() + start * n, count * n * sizeof(T));
  return make_op<T>(
      {count, n}, std::move(out), {x},
      [x = x, start, n](Node<T>& self) mutable {
        if (x.requires_grad())
          kernels::vaxpy(T(1), self.grad.data(), x.grad().data() + start * n, self.size());
      },
      "slice_rows");
}

template <typename T>
TensorT<T> embedding_lookup(const TensorT<T>& table, std::vector<int32_t> ids) {
  detail::expect_rank(table, 2, "embedding_lookup");
  const size_t rows = table.rows(), dim = table.cols();
  for (int32_t id : ids)
    if (id < 0 || static_cast<size_t>(id) >= rows)
      throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of range [0," +
                       std::to_string(rows) + ")");
  std::vector<T> out(ids.size() * dim);
  kernels::gather_rows(table.data(), ids.data(), out.data(), ids.size(), dim);
  const size_t nids = ids.size();
  return make_op<T>(
      {nids, dim}, std::move(out), {table},
      [table = table, ids = std::move(ids), dim](Node<T>& self) mutable {
        if (!table.requires_grad()) return;
        const auto groups = detail::group_by_id(ids);
        kernels::scatter_add_grouped(table.grad().data(), self.grad.data(), groups.dst_ids.data(),
                                     groups.src_rows.data(), groups.offsets.data(),
                                     groups.dst_ids.size(), dim);
      },
      "embedding_lookup");
}

// Softmax along the chosen axis of a matrix (axis 1 = within each row,
// axis 0 = within each column); rank-1 inputs are treated as a single row.
template <typename T>
TensorT<T> softmax(const TensorT<T>& x, size_t axis) {
  const bool vec = x.shape().size() == 1;
  if (!vec) detail::expect_rank(x, 2, "softmax");
  const size_t m = vec ? 1 : x.rows();
  const size_t n = vec ? x.shape()[0] : x.cols();
  if (axis > 1) throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for rank-2");
  for (const T v : x.values())
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError("softmax: non-finite input");
  std::vector<T> out(x.size());
  const size_t whole_block[2] = {0, m};
  if (axis == 1 || vec)
    kernels::softmax_rows(x.data(), out.data(), m, n);
  else
    kernels::softmax_block_cols(x.data(), out.data(), whole_block, 1, n);
  const bool by_rows = (axis == 1 || vec);
  return make_op<T>(
      x.shape(), std::move(out), {x},
      [x = x, m, n, by_rows](Node<T>& self) mutable {
        if (!x.requires_grad()) return;
        if (by_rows) {
          kernels::softmax_rows_bwd_acc(self.value.data(), self.grad.data(), x.grad().data(), m, n);
        } else {
          const size_t whole[2] = {0, m};
          kernels::softmax_block_cols_bwd_acc(self.value.data(), self.grad.data(), x.grad().data(),
                                              whole, 1, n);
        }
      },
      "softmax");
}

// Mean negative log-probability with fused log-softmax.
template <typename T>
TensorT<T> cross_entropy_mean(const TensorT<T>& logits, std::vector<int32_t> targets) {
  detail::expect_rank(logits, 2, "cross_entropy");
  const size_t m = logits.rows(), v = logits.cols();
  if (targets.size() != m)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(m) + " rows");
  for (int32_t t : targets)
    if (t < 0 || static_cast<size_t>(t) >= v)
      throw ShapeError("cross_entropy: target " + std::to_string(t) + " out of range [0," +
                       std::to_string(v) + ")");
  auto lse = std::make_shared<std::vector<T>>(m);
  const double loss = kernels::ce_forward(logits.data(), targets.data(), m, v, lse->data(), nullptr);
  return make_op<T>(
      {}, {static_cast<T>(loss)}, {logits},
      [logits = logits, targets = std::move(targets), lse, m, v](Node<T>& self) mutable {
        if (!logits.requires_grad()) return;
        const T scale = self.grad[0] / static_cast<T>(m);
        kernels::ce_backward(logits.data(), targets.data(), lse->data(), scale,
                             logits.grad().data(), m, v);
      },
      "cross_entropy");
}

// Inverted dropout; identity (and no RNG draw) at rate 0 or when disabled.
template <typename T>
TensorT<T> dropout(const TensorT<T>& x, double rate, Rng& rng, bool enabled) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (!enabled || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.size());
  for (auto& v : *mask) v = rng.bernoulli(rate) ? T(0) : keep_scale;
  std::vector<T> out(x.size());
  kernels::vmul(x.data(), mask->data(), out.data(), x.size());
  return make_op<T>(
      x.shape(), std::move(out), {x},
      [x = x, mask](Node<T>& self) mutable {
        if (x.requires_grad())
          kernels::vmul_acc(self.grad.data(), mask->data(), x.grad().data(), self.size());
      },
      "dropout");
}

// Y[r,:] = X[r,:] * s[r]
template <typename T>
TensorT<T> scale_rows(const TensorT<T>& x, const TensorT<T>& s) {
  detail::expect_rank(x, 2, "scale_rows");
  if (s.size() != x.rows())
    throw ShapeError("scale_rows: " + std::to_string(s.size()) + " scales for " +
                     std::to_string(x.rows()) + " rows");
  const size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n);
  for (size_t r = 0; r < m; ++r)
    kernels::vscale(x.data() + r * n, s.data()[r], out.data() + r * n, n);
  return make_op<T>(
      {m, n}, std::move(out), {x, s},
      [x = x, s = s, m, n](Node<T>& self) mutable {
        if (x.requires_grad())
          for (size_t r = 0; r < m; ++r)
            kernels::vaxpy(s.data()[r], self.grad.data() + r * n, x.grad().data() + r * n, n);
        if (s.requires_grad())
          for (size_t r = 0; r < m; ++r) {
            double d = 0.0;
            const T* g = self.grad.data() + r * n;
            const T* xr = x.data() + r * n;
            for (size_t j = 0; j < n; ++j) d += static_cast<double>(g[j]) * xr[j];
            s.grad()[r] += static_cast<T>(d);
          }
      },
      "scale_rows");
}

// Sum a matrix along an axis: axis 0 collapses rows (result [N]),
// axis 1 collapses columns (result [M]).
template <typename T>
TensorT<T> sum_axis(const TensorT<T>& x, size_t axis) {
  detail::expect_rank(x, 2, "sum_over_axis");
  if (axis > 1) throw ShapeError("sum_over_axis: axis " + std::to_string(axis) + " invalid");
  const size_t m = x.rows(), n = x.cols();
  std::vector<T> out(axis == 0 ? n : m, T(0));
  if (axis == 0) {
    kernels::col_sums_acc(x.data(), out.data(), m, n);
  } else {
    for (size_t r = 0; r < m; ++r) {
      double acc = 0.0;
      const T* xr = x.data() + r * n;
      for (size_t j = 0; j < n; ++j) acc += static_cast<double>(xr[j]);
      out[r] = static_cast<T>(acc);
    }
  }
  return make_op<T>(
      {axis == 0 ? n : m}, std::move(out), {x},
      [x = x, m, n, axis](Node<T>& self) mutable {
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        if (axis == 0) {
          for (size_t r = 0; r < m; ++r)
            kernels::vaxpy(T(1), self.grad.data(), gx.data() + r * n, n);
        } else {
          for (size_t r = 0; r < m; ++r) {
            const T g = self.grad[r];
            T* row = gx.data() + r * n;
            for (size_t j = 0; j < n; ++j) row[j] += g;
          }
        }
      },
      "sum_over_axis");
}

// Same data, new shape; backward passes the gradient through.
template <typename T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<size_t> new_shape) {
  if (shape_product(new_shape) != x.size())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                     " changes element count");
  std::vector<T> out = x.values();
  return make_op<T>(
      std::move(new_shape), std::move(out), {x},
      [x = x](Node<T>& self) mutable {
        if (x.requires_grad()) kernels::vaxpy(T(1), self.grad.data(), x.grad().data(), self.size());
      },
      "reshape");
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
  double acc = 0.0;
  for (const T v : x.values()) acc += static_cast<double>(v);
  return make_op<T>(
      {}, {static_cast<T>(acc)}, {x},
      [x = x](Node<T>& self) mutable {
        if (!x.requires_grad()) return;
        const T g = self.grad[0];
        auto& gx = x.grad();
        for (auto& v : gx) v += g;
      },
      "sum_all");
}

// Standard LSTM cell, one coupled bias per gate.
template <typename T>
struct LstmParams {
  TensorT<T> w_xi, w_hi, b_i;
  TensorT<T> w_xf, w_hf, b_f;
  TensorT<T> w_xo, w_ho, b_o;
  TensorT<T> w_xg, w_hg, b_g;
};

template <typename T>
std::pair<TensorT<T>, TensorT<T>> lstm_cell(const TensorT<T>& x, const TensorT<T>& h_prev,
                                            const TensorT<T>& c_prev, const LstmParams<T>& p) {
  auto gate = [&](const TensorT<T>& wx, const TensorT<T>& wh, const TensorT<T>& b) {
    return add_bias_rows(add(matmul_nt(x, wx), matmul_nt(h_prev, wh)), b);
  };
  auto i = sigmoid_op(gate(p.w_xi, p.w_hi, p.b_i));
  auto f = sigmoid_op(gate(p.w_xf, p.w_hf, p.b_f));
  auto o = sigmoid_op(gate(p.w_xo, p.w_ho, p.b_o));
  auto g = tanh_op(gate(p.w_xg, p.w_hg, p.b_g));
  auto c = add(mul(f, c_prev), mul(i, g));
  auto h = mul(o, tanh_op(c));
  return {h, c};
}

}  // namespace charlm::ops
