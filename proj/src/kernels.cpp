#include "charlm/kernels.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace charlm::kernels {

namespace {

std::atomic<Exec> g_exec{Exec::Parallel};

// Loop bodies shared by the serial and parallel wrappers so both flavours
// compute every output element with identical instruction sequences.

template <typename T>
inline void nn_row(const T* arow, const T* b, T* crow, size_t k, size_t n, bool acc) {
  if (!acc) std::fill(crow, crow + n, T(0));
  for (size_t p = 0; p < k; ++p) {
    const T av = arow[p];
    const T* brow = b + p * n;
#pragma omp simd
    for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

template <typename T>
inline T dot(const T* a, const T* b, size_t k) {
  T s = T(0);
#pragma omp simd reduction(+ : s)
  for (size_t p = 0; p < k; ++p) s += a[p] * b[p];
  return s;
}

template <typename T>
inline void nt_row(const T* arow, const T* b, T* crow, size_t k, size_t n, bool acc) {
  for (size_t j = 0; j < n; ++j) {
    const T s = dot(arow, b + j * k, k);
    crow[j] = acc ? crow[j] + s : s;
  }
}

// A^T * B by rank-1 updates over a fixed-size row chunk. Chunking is a
// function of m only, so the summation order (and hence the bits) does not
// depend on the thread count.
constexpr size_t kTnChunk = 4096;
constexpr size_t kTnOuterThreshold = 8192;

template <typename T>
inline void tn_outer_chunk(const T* a, const T* b, T* cpart, size_t m0, size_t m1, size_t k,
                           size_t n) {
  std::fill(cpart, cpart + k * n, T(0));
  for (size_t r = m0; r < m1; ++r) {
    const T* arow = a + r * k;
    const T* brow = b + r * n;
    for (size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = cpart + p * n;
#pragma omp simd
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
inline void tn_axpy_row(const T* a, const T* b, T* crow, size_t m, size_t k, size_t n, size_t p,
                        bool acc) {
  if (!acc) std::fill(crow, crow + n, T(0));
  for (size_t r = 0; r < m; ++r) {
    const T av = a[r * k + p];
    const T* brow = b + r * n;
#pragma omp simd
    for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

template <typename T>
inline void softmax_row(const T* x, T* y, size_t n) {
  T mx = x[0];
  for (size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  double sum = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const T e = std::exp(x[j] - mx);
    y[j] = e;
    sum += static_cast<double>(e);
  }
  const T inv = static_cast<T>(1.0 / sum);
  for (size_t j = 0; j < n; ++j) y[j] *= inv;
}

template <typename T>
inline void softmax_block(const T* x, T* y, size_t r0, size_t r1, size_t n, std::vector<T>& mx,
                          std::vector<double>& sum) {
  if (r1 <= r0) return;
  mx.assign(n, T(0));
  sum.assign(n, 0.0);
  std::memcpy(mx.data(), x + r0 * n, n * sizeof(T));
  for (size_t r = r0 + 1; r < r1; ++r) {
    const T* xr = x + r * n;
    for (size_t j = 0; j < n; ++j) mx[j] = std::max(mx[j], xr[j]);
  }
  for (size_t r = r0; r < r1; ++r) {
    const T* xr = x + r * n;
    T* yr = y + r * n;
    for (size_t j = 0; j < n; ++j) {
      const T e = std::exp(xr[j] - mx[j]);
      yr[j] = e;
      sum[j] += static_cast<double>(e);
    }
  }
  for (size_t r = r0; r < r1; ++r) {
    T* yr = y + r * n;
    for (size_t j = 0; j < n; ++j) yr[j] = static_cast<T>(yr[j] / sum[j]);
  }
}

template <typename T>
inline void softmax_block_bwd(const T* y, const T* dy, T* dx, size_t r0, size_t r1, size_t n,
                              std::vector<double>& dotb) {
  dotb.assign(n, 0.0);
  for (size_t r = r0; r < r1; ++r) {
    const T* yr = y + r * n;
    const T* dyr = dy + r * n;
    for (size_t j = 0; j < n; ++j) dotb[j] += static_cast<double>(yr[j]) * dyr[j];
  }
  for (size_t r = r0; r < r1; ++r) {
    const T* yr = y + r * n;
    const T* dyr = dy + r * n;
    T* dxr = dx + r * n;
    for (size_t j = 0; j < n; ++j) dxr[j] += yr[j] * (dyr[j] - static_cast<T>(dotb[j]));
  }
}

template <typename T>
inline void ce_row(const T* xr, int32_t tgt, size_t v, T* lse_out, double* nll_out) {
  T mx = xr[0];
  for (size_t j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
  double sum = 0.0;
  for (size_t j = 0; j < v; ++j) sum += static_cast<double>(std::exp(xr[j] - mx));
  const double lse = static_cast<double>(mx) + std::log(sum);
  *lse_out = static_cast<T>(lse);
  *nll_out = lse - static_cast<double>(xr[tgt]);
}

}  // namespace

void set_exec(Exec e) { g_exec.store(e); }
Exec exec() { return g_exec.load(); }

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename T>
void matmul_nn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  for (size_t i = 0; i < m; ++i) nn_row(a + i * k, b, c + i * n, k, n, acc);
}

template <typename T>
void matmul_nn_parallel(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(m); ++i)
    nn_row(a + i * k, b, c + i * n, k, n, acc);
}

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  if (exec() == Exec::Parallel)
    matmul_nn_parallel(a, b, c, m, k, n, acc);
  else
    matmul_nn_serial(a, b, c, m, k, n, acc);
}

template <typename T>
void matmul_nt_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  for (size_t i = 0; i < m; ++i) nt_row(a + i * k, b, c + i * n, k, n, acc);
}

template <typename T>
void matmul_nt_parallel(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(m); ++i)
    nt_row(a + i * k, b, c + i * n, k, n, acc);
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  if (exec() == Exec::Parallel)
    matmul_nt_parallel(a, b, c, m, k, n, acc);
  else
    matmul_nt_serial(a, b, c, m, k, n, acc);
}

namespace {

template <typename T>
void tn_outer(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc,
              bool parallel) {
  const size_t nchunks = (m + kTnChunk - 1) / kTnChunk;
  std::vector<T> parts(nchunks * k * n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (ptrdiff_t ch = 0; ch < static_cast<ptrdiff_t>(nchunks); ++ch) {
    const size_t m0 = static_cast<size_t>(ch) * kTnChunk;
    const size_t m1 = std::min(m0 + kTnChunk, m);
    tn_outer_chunk(a, b, parts.data() + static_cast<size_t>(ch) * k * n, m0, m1, k, n);
  }
  if (!acc) std::fill(c, c + k * n, T(0));
  for (size_t ch = 0; ch < nchunks; ++ch) {
    const T* part = parts.data() + ch * k * n;
    for (size_t i = 0; i < k * n; ++i) c[i] += part[i];
  }
}

}  // namespace

template <typename T>
void matmul_tn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  if (m > kTnOuterThreshold) {
    tn_outer(a, b, c, m, k, n, acc, false);
    return;
  }
  for (size_t p = 0; p < k; ++p) tn_axpy_row(a, b, c + p * n, m, k, n, p, acc);
}

template <typename T>
void matmul_tn_parallel(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  if (m > kTnOuterThreshold) {
    tn_outer(a, b, c, m, k, n, acc, true);
    return;
  }
#pragma omp parallel for schedule(static)
  for (ptrdiff_t p = 0; p < static_cast<ptrdiff_t>(k); ++p)
    tn_axpy_row(a, b, c + p * n, m, k, n, static_cast<size_t>(p), acc);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  if (exec() == Exec::Parallel)
    matmul_tn_parallel(a, b, c, m, k, n, acc);
  else
    matmul_tn_serial(a, b, c, m, k, n, acc);
}

constexpr size_t kElemwiseParallelMin = 1 << 15;

#define CHARLM_ELEMWISE(name, expr)                                            \
  template <typename T>                                                        \
  void name##_serial(const T* x, T* y, size_t n) {                            \
    for (size_t i = 0; i < n; ++i) y[i] = (expr);                             \
  }                                                                            \
  template <typename T>                                                        \
  void name##_parallel(const T* x, T* y, size_t n) {                          \
    _Pragma("omp parallel for schedule(static)")                              \
    for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) y[i] = (expr);  \
  }                                                                            \
  template <typename T>                                                        \
  void name(const T* x, T* y, size_t n) {                                     \
    if (exec() == Exec::Parallel && n >= kElemwiseParallelMin)                \
      name##_parallel(x, y, n);                                               \
    else                                                                       \
      name##_serial(x, y, n);                                                 \
  }

CHARLM_ELEMWISE(tanh_fwd, std::tanh(x[i]))
CHARLM_ELEMWISE(sigmoid_fwd, T(1) / (T(1) + std::exp(-x[i])))
#undef CHARLM_ELEMWISE

template <typename T>
void vfill(T* y, T v, size_t n) {
  std::fill(y, y + n, v);
}

template <typename T>
void vadd_serial(const T* a, const T* b, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void vadd_parallel(const T* a, const T* b, T* y, size_t n) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) y[i] = a[i] + b[i];
}

template <typename T>
void vadd(const T* a, const T* b, T* y, size_t n) {
  if (exec() == Exec::Parallel && n >= kElemwiseParallelMin)
    vadd_parallel(a, b, y, n);
  else
    vadd_serial(a, b, y, n);
}

template <typename T>
void vmul_serial(const T* a, const T* b, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <typename T>
void vmul_parallel(const T* a, const T* b, T* y, size_t n) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(n); ++i) y[i] = a[i] * b[i];
}

template <typename T>
void vmul(const T* a, const T* b, T* y, size_t n) {
  if (exec() == Exec::Parallel && n >= kElemwiseParallelMin)
    vmul_parallel(a, b, y, n);
  else
    vmul_serial(a, b, y, n);
}

template <typename T>
void vmul_acc(const T* a, const T* b, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void vaxpy(T alpha, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void vscale(const T* x, T alpha, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

template <typename T>
void tanh_bwd_acc(const T* y, const T* dy, T* dx, size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void sigmoid_bwd_acc(const T* y, const T* dy, T* dx, size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void gather_rows_serial(const T* table, const int32_t* ids, T* out, size_t nids, size_t dim) {
  for (size_t i = 0; i < nids; ++i)
    std::memcpy(out + i * dim, table + static_cast<size_t>(ids[i]) * dim, dim * sizeof(T));
}

template <typename T>
void gather_rows_parallel(const T* table, const int32_t* ids, T* out, size_t nids, size_t dim) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t i = 0; i < static_cast<ptrdiff_t>(nids); ++i)
    std::memcpy(out + i * dim, table + static_cast<size_t>(ids[i]) * dim, dim * sizeof(T));
}

template <typename T>
void gather_rows(const T* table, const int32_t* ids, T* out, size_t nids, size_t dim) {
  if (exec() == Exec::Parallel && nids * dim >= kElemwiseParallelMin)
    gather_rows_parallel(table, ids, out, nids, dim);
  else
    gather_rows_serial(table, ids, out, nids, dim);
}

namespace {

template <typename T>
inline void scatter_group(T* dst, const T* src, int32_t dst_id, const int32_t* src_rows,
                          size_t i0, size_t i1, size_t dim) {
  T* drow = dst + static_cast<size_t>(dst_id) * dim;
  for (size_t idx = i0; idx < i1; ++idx) {
    const T* srow = src + static_cast<size_t>(src_rows[idx]) * dim;
#pragma omp simd
    for (size_t j = 0; j < dim; ++j) drow[j] += srow[j];
  }
}

}  // namespace

template <typename T>
void scatter_add_grouped_serial(T* dst, const T* src, const int32_t* dst_ids,
                                const int32_t* src_rows, const size_t* off, size_t ngroups,
                                size_t dim) {
  for (size_t g = 0; g < ngroups; ++g)
    scatter_group(dst, src, dst_ids[g], src_rows, off[g], off[g + 1], dim);
}

template <typename T>
void scatter_add_grouped_parallel(T* dst, const T* src, const int32_t* dst_ids,
                                  const int32_t* src_rows, const size_t* off, size_t ngroups,
                                  size_t dim) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t g = 0; g < static_cast<ptrdiff_t>(ngroups); ++g)
    scatter_group(dst, src, dst_ids[g], src_rows, off[g], off[g + 1], dim);
}

template <typename T>
void scatter_add_grouped(T* dst, const T* src, const int32_t* dst_ids, const int32_t* src_rows,
                         const size_t* off, size_t ngroups, size_t dim) {
  if (exec() == Exec::Parallel)
    scatter_add_grouped_parallel(dst, src, dst_ids, src_rows, off, ngroups, dim);
  else
    scatter_add_grouped_serial(dst, src, dst_ids, src_rows, off, ngroups, dim);
}

template <typename T>
void softmax_rows_serial(const T* x, T* y, size_t m, size_t n) {
  for (size_t r = 0; r < m; ++r) softmax_row(x + r * n, y + r * n, n);
}

template <typename T>
void softmax_rows_parallel(const T* x, T* y, size_t m, size_t n) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t r = 0; r < static_cast<ptrdiff_t>(m); ++r)
    softmax_row(x + r * n, y + r * n, n);
}

template <typename T>
void softmax_rows(const T* x, T* y, size_t m, size_t n) {
  if (exec() == Exec::Parallel && m > 1)
    softmax_rows_parallel(x, y, m, n);
  else
    softmax_rows_serial(x, y, m, n);
}

template <typename T>
void softmax_rows_bwd_acc(const T* y, const T* dy, T* dx, size_t m, size_t n) {
  for (size_t r = 0; r < m; ++r) {
    const T* yr = y + r * n;
    const T* dyr = dy + r * n;
    T* dxr = dx + r * n;
    double d = 0.0;
    for (size_t j = 0; j < n; ++j) d += static_cast<double>(yr[j]) * dyr[j];
    for (size_t j = 0; j < n; ++j) dxr[j] += yr[j] * (dyr[j] - static_cast<T>(d));
  }
}

template <typename T>
void softmax_block_cols_serial(const T* x, T* y, const size_t* off, size_t nblocks, size_t n) {
  std::vector<T> mx;
  std::vector<double> sum;
  for (size_t b = 0; b < nblocks; ++b) softmax_block(x, y, off[b], off[b + 1], n, mx, sum);
}

template <typename T>
void softmax_block_cols_parallel(const T* x, T* y, const size_t* off, size_t nblocks, size_t n) {
#pragma omp parallel
  {
    std::vector<T> mx;
    std::vector<double> sum;
#pragma omp for schedule(static)
    for (ptrdiff_t b = 0; b < static_cast<ptrdiff_t>(nblocks); ++b)
      softmax_block(x, y, off[b], off[b + 1], n, mx, sum);
  }
}

template <typename T>
void softmax_block_cols(const T* x, T* y, const size_t* off, size_t nblocks, size_t n) {
  if (exec() == Exec::Parallel && nblocks > 1)
    softmax_block_cols_parallel(x, y, off, nblocks, n);
  else
    softmax_block_cols_serial(x, y, off, nblocks, n);
}

template <typename T>
void softmax_block_cols_bwd_acc_serial(const T* y, const T* dy, T* dx, const size_t* off,
                                       size_t nblocks, size_t n) {
  std::vector<double> dotb;
  for (size_t b = 0; b < nblocks; ++b) softmax_block_bwd(y, dy, dx, off[b], off[b + 1], n, dotb);
}

template <typename T>
void softmax_block_cols_bwd_acc_parallel(const T* y, const T* dy, T* dx, const size_t* off,
                                         size_t nblocks, size_t n) {
#pragma omp parallel
  {
    std::vector<double> dotb;
#pragma omp for schedule(static)
    for (ptrdiff_t b = 0; b < static_cast<ptrdiff_t>(nblocks); ++b)
      softmax_block_bwd(y, dy, dx, off[b], off[b + 1], n, dotb);
  }
}

template <typename T>
void softmax_block_cols_bwd_acc(const T* y, const T* dy, T* dx, const size_t* off, size_t nblocks,
                                size_t n) {
  if (exec() == Exec::Parallel && nblocks > 1)
    softmax_block_cols_bwd_acc_parallel(y, dy, dx, off, nblocks, n);
  else
    softmax_block_cols_bwd_acc_serial(y, dy, dx, off, nblocks, n);
}

template <typename T>
double ce_forward_serial(const T* logits, const int32_t* targets, size_t m, size_t v, T* lse,
                         double* per_row) {
  std::vector<double> nll(m);
  for (size_t r = 0; r < m; ++r) ce_row(logits + r * v, targets[r], v, &lse[r], &nll[r]);
  double total = 0.0;
  for (size_t r = 0; r < m; ++r) {
    total += nll[r];
    if (per_row) per_row[r] = nll[r];
  }
  return total / static_cast<double>(m);
}

template <typename T>
double ce_forward_parallel(const T* logits, const int32_t* targets, size_t m, size_t v, T* lse,
                           double* per_row) {
  std::vector<double> nll(m);
#pragma omp parallel for schedule(static)
  for (ptrdiff_t r = 0; r < static_cast<ptrdiff_t>(m); ++r)
    ce_row(logits + r * v, targets[r], v, &lse[r], &nll[r]);
  double total = 0.0;
  for (size_t r = 0; r < m; ++r) {
    total += nll[r];
    if (per_row) per_row[r] = nll[r];
  }
  return total / static_cast<double>(m);
}

template <typename T>
double ce_forward(const T* logits, const int32_t* targets, size_t m, size_t v, T* lse,
                  double* per_row) {
  if (exec() == Exec::Parallel && m > 1) return ce_forward_parallel(logits, targets, m, v, lse, per_row);
  return ce_forward_serial(logits, targets, m, v, lse, per_row);
}

namespace {

template <typename T>
inline void ce_bwd_row(const T* xr, int32_t tgt, T lse, T scale, T* dxr, size_t v) {
#pragma omp simd
  for (size_t j = 0; j < v; ++j) dxr[j] += scale * std::exp(xr[j] - lse);
  dxr[static_cast<size_t>(tgt)] -= scale;
}

}  // namespace

template <typename T>
void ce_backward_serial(const T* logits, const int32_t* targets, const T* lse, T scale,
                        T* dlogits, size_t m, size_t v) {
  for (size_t r = 0; r < m; ++r) ce_bwd_row(logits + r * v, targets[r], lse[r], scale, dlogits + r * v, v);
}

template <typename T>
void ce_backward_parallel(const T* logits, const int32_t* targets, const T* lse, T scale,
                          T* dlogits, size_t m, size_t v) {
#pragma omp parallel for schedule(static)
  for (ptrdiff_t r = 0; r < static_cast<ptrdiff_t>(m); ++r)
    ce_bwd_row(logits + r * v, targets[r], lse[r], scale, dlogits + r * v, v);
}

template <typename T>
void ce_backward(const T* logits, const int32_t* targets, const T* lse, T scale, T* dlogits,
                 size_t m, size_t v) {
  if (exec() == Exec::Parallel && m > 1)
    ce_backward_parallel(logits, targets, lse, scale, dlogits, m, v);
  else
    ce_backward_serial(logits, targets, lse, scale, dlogits, m, v);
}

template <typename T>
void col_sums_acc(const T* x, T* y, size_t m, size_t n) {
  for (size_t r = 0; r < m; ++r) {
    const T* xr = x + r * n;
    for (size_t j = 0; j < n; ++j) y[j] += xr[j];
  }
}

#define CHARLM_INSTANTIATE(T)                                                                     \
  template void matmul_nn_serial<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);       \
  template void matmul_nn_parallel<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);     \
  template void matmul_nn<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);              \
  template void matmul_nt_serial<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);       \
  template void matmul_nt_parallel<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);     \
  template void matmul_nt<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);              \
  template void matmul_tn_serial<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);       \
  template void matmul_tn_parallel<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);     \
  template void matmul_tn<T>(const T*, const T*, T*, size_t, size_t, size_t, bool);              \
  template void vfill<T>(T*, T, size_t);                                                         \
  template void vadd_serial<T>(const T*, const T*, T*, size_t);                                  \
  template void vadd_parallel<T>(const T*, const T*, T*, size_t);                                \
  template void vadd<T>(const T*, const T*, T*, size_t);                                         \
  template void vmul_serial<T>(const T*, const T*, T*, size_t);                                  \
  template void vmul_parallel<T>(const T*, const T*, T*, size_t);                                \
  template void vmul<T>(const T*, const T*, T*, size_t);                                         \
  template void vmul_acc<T>(const T*, const T*, T*, size_t);                                     \
  template void vaxpy<T>(T, const T*, T*, size_t);                                               \
  template void vscale<T>(const T*, T, T*, size_t);                                              \
  template void tanh_fwd_serial<T>(const T*, T*, size_t);                                        \
  template void tanh_fwd_parallel<T>(const T*, T*, size_t);                                      \
  template void tanh_fwd<T>(const T*, T*, size_t);                                               \
  template void tanh_bwd_acc<T>(const T*, const T*, T*, size_t);                                 \
  template void sigmoid_fwd_serial<T>(const T*, T*, size_t);                                     \
  template void sigmoid_fwd_parallel<T>(const T*, T*, size_t);                                   \
  template void sigmoid_fwd<T>(const T*, T*, size_t);                                            \
  template void sigmoid_bwd_acc<T>(const T*, const T*, T*, size_t);                              \
  template void gather_rows_serial<T>(const T*, const int32_t*, T*, size_t, size_t);             \
  template void gather_rows_parallel<T>(const T*, const int32_t*, T*, size_t, size_t);           \
  template void gather_rows<T>(const T*, const int32_t*, T*, size_t, size_t);                    \
  template void scatter_add_grouped_serial<T>(T*, const T*, const int32_t*, const int32_t*,      \
                                              const size_t*, size_t, size_t);                    \
  template void scatter_add_grouped_parallel<T>(T*, const T*, const int32_t*, const int32_t*,    \
                                                const size_t*, size_t, size_t);                  \
  template void scatter_add_grouped<T>(T*, const T*, const int32_t*, const int32_t*,             \
                                       const size_t*, size_t, size_t);                           \
  template void softmax_rows_serial<T>(const T*, T*, size_t, size_t);                            \
  template void softmax_rows_parallel<T>(const T*, T*, size_t, size_t);                          \
  template void softmax_rows<T>(const T*, T*, size_t, size_t);                                   \
  template void softmax_rows_bwd_acc<T>(const T*, const T*, T*, size_t, size_t);                 \
  template void softmax_block_cols_serial<T>(const T*, T*, const size_t*, size_t, size_t);       \
  template void softmax_block_cols_parallel<T>(const T*, T*, const size_t*, size_t, size_t);     \
  template void softmax_block_cols<T>(const T*, T*, const size_t*, size_t, size_t);              \
  template void softmax_block_cols_bwd_acc_serial<T>(const T*, const T*, T*, const size_t*,      \
                                                     size_t, size_t);                            \
  template void softmax_block_cols_bwd_acc_parallel<T>(const T*, const T*, T*, const size_t*,    \
                                                       size_t, size_t);                          \
  template void softmax_block_cols_bwd_acc<T>(const T*, const T*, T*, const size_t*, size_t,     \
                                              size_t);                                           \
  template double ce_forward_serial<T>(const T*, const int32_t*, size_t, size_t, T*, double*);   \
  template double ce_forward_parallel<T>(const T*, const int32_t*, size_t, size_t, T*, double*); \
  template double ce_forward<T>(const T*, const int32_t*, size_t, size_t, T*, double*);          \
  template void ce_backward_serial<T>(const T*, const int32_t*, const T*, T, T*, size_t, size_t); \
  template void ce_backward_parallel<T>(const T*, const int32_t*, const T*, T, T*, size_t,       \
                                        size_t);                                                 \
  template void ce_backward<T>(const T*, const int32_t*, const T*, T, T*, size_t, size_t);       \
  template void col_sums_acc<T>(const T*, T*, size_t, size_t);

CHARLM_INSTANTIATE(float)
CHARLM_INSTANTIATE(double)
#undef CHARLM_INSTANTIATE

}  // namespace charlm::kernels
