#pragma once

#include <cstddef>
#include <cstdint>

// Dense-array kernels behind the tensor ops. Every kernel comes in a serial
// and an OpenMP-parallel flavour; the unsuffixed name dispatches on the
// process-wide execution mode. Parallel variants partition work so that each
// output element is produced by exactly one thread with the same inner loop
// order as the serial code, so both flavours produce bitwise-identical
// results for any thread count. The serial flavour is the reference the test
// suite checks the parallel one against.

namespace charlm::kernels {

enum class Exec { Serial, Parallel };

void set_exec(Exec e);
Exec exec();
void set_threads(int n);  // 0 = runtime default
int threads();

// C[m x n] = A[m x k] * B[k x n]; accumulates into C when acc.
template <typename T>
void matmul_nn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc);
template <typename T>
void matmul_nn_parallel(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc);
template <typename T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc = false);

// C[m x n] = A[m x k] * B[n x k]^T
template <typename T>
void matmul_nt_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc);
template <typename T>
void matmul_nt_parallel(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc);
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc = false);

// C[k x n] = A[m x k]^T * B[m x n]
template <typename T>
void matmul_tn_serial(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc);
template <typename T>
void matmul_tn_parallel(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc);
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc = false);

// Elementwise.
template <typename T> void vfill(T* y, T v, size_t n);
template <typename T> void vadd_serial(const T* a, const T* b, T* y, size_t n);
template <typename T> void vadd_parallel(const T* a, const T* b, T* y, size_t n);
template <typename T> void vadd(const T* a, const T* b, T* y, size_t n);
template <typename T> void vmul_serial(const T* a, const T* b, T* y, size_t n);
template <typename T> void vmul_parallel(const T* a, const T* b, T* y, size_t n);
template <typename T> void vmul(const T* a, const T* b, T* y, size_t n);
template <typename T> void vmul_acc(const T* a, const T* b, T* y, size_t n);     // y += a*b
template <typename T> void vaxpy(T alpha, const T* x, T* y, size_t n);           // y += alpha*x
template <typename T> void vscale(const T* x, T alpha, T* y, size_t n);          // y = alpha*x
template <typename T> void tanh_fwd_serial(const T* x, T* y, size_t n);
template <typename T> void tanh_fwd_parallel(const T* x, T* y, size_t n);
template <typename T> void tanh_fwd(const T* x, T* y, size_t n);
template <typename T> void tanh_bwd_acc(const T* y, const T* dy, T* dx, size_t n);
template <typename T> void sigmoid_fwd_serial(const T* x, T* y, size_t n);
template <typename T> void sigmoid_fwd_parallel(const T* x, T* y, size_t n);
template <typename T> void sigmoid_fwd(const T* x, T* y, size_t n);
template <typename T> void sigmoid_bwd_acc(const T* y, const T* dy, T* dx, size_t n);

// out[i, :] = table[ids[i], :]
template <typename T>
void gather_rows_serial(const T* table, const int32_t* ids, T* out, size_t nids, size_t dim);
template <typename T>
void gather_rows_parallel(const T* table, const int32_t* ids, T* out, size_t nids, size_t dim);
template <typename T>
void gather_rows(const T* table, const int32_t* ids, T* out, size_t nids, size_t dim);

// For each group g: dst[dst_ids[g], :] += sum over idx in [off[g], off[g+1])
// of src[src_rows[idx], :]. Groups have disjoint destinations, so the
// parallel variant runs one group per iteration without races.
template <typename T>
void scatter_add_grouped_serial(T* dst, const T* src, const int32_t* dst_ids,
                                const int32_t* src_rows, const size_t* off, size_t ngroups,
                                size_t dim);
template <typename T>
void scatter_add_grouped_parallel(T* dst, const T* src, const int32_t* dst_ids,
                                  const int32_t* src_rows, const size_t* off, size_t ngroups,
                                  size_t dim);
template <typename T>
void scatter_add_grouped(T* dst, const T* src, const int32_t* dst_ids, const int32_t* src_rows,
                         const size_t* off, size_t ngroups, size_t dim);

// Row-wise softmax of X[m x n] with max subtraction.
template <typename T> void softmax_rows_serial(const T* x, T* y, size_t m, size_t n);
template <typename T> void softmax_rows_parallel(const T* x, T* y, size_t m, size_t n);
template <typename T> void softmax_rows(const T* x, T* y, size_t m, size_t n);
// dx[r,:] += y[r,:] * (dy[r,:] - dot(y[r,:], dy[r,:]))
template <typename T> void softmax_rows_bwd_acc(const T* y, const T* dy, T* dx, size_t m, size_t n);

// Column-wise softmax within row blocks. Blocks are rows [off[b], off[b+1]);
// within a block, each of the n columns is normalised over the block's rows.
// A single block spanning all rows gives a plain column softmax.
template <typename T>
void softmax_block_cols_serial(const T* x, T* y, const size_t* off, size_t nblocks, size_t n);
template <typename T>
void softmax_block_cols_parallel(const T* x, T* y, const size_t* off, size_t nblocks, size_t n);
template <typename T>
void softmax_block_cols(const T* x, T* y, const size_t* off, size_t nblocks, size_t n);
template <typename T>
void softmax_block_cols_bwd_acc_serial(const T* y, const T* dy, T* dx, const size_t* off,
                                       size_t nblocks, size_t n);
template <typename T>
void softmax_block_cols_bwd_acc_parallel(const T* y, const T* dy, T* dx, const size_t* off,
                                         size_t nblocks, size_t n);
template <typename T>
void softmax_block_cols_bwd_acc(const T* y, const T* dy, T* dx, const size_t* off, size_t nblocks,
                                size_t n);

// Fused log-softmax cross entropy over rows of logits[m x v].
// Returns mean negative log-probability. lse[r] receives the row's
// log-sum-exp; per_row (optional) the row's NLL.
template <typename T>
double ce_forward_serial(const T* logits, const int32_t* targets, size_t m, size_t v, T* lse,
                         double* per_row);
template <typename T>
double ce_forward_parallel(const T* logits, const int32_t* targets, size_t m, size_t v, T* lse,
                           double* per_row);
template <typename T>
double ce_forward(const T* logits, const int32_t* targets, size_t m, size_t v, T* lse,
                  double* per_row);

// dlogits[r,j] += scale * (exp(logits[r,j] - lse[r]) - [j == targets[r]])
template <typename T>
void ce_backward_serial(const T* logits, const int32_t* targets, const T* lse, T scale,
                        T* dlogits, size_t m, size_t v);
template <typename T>
void ce_backward_parallel(const T* logits, const int32_t* targets, const T* lse, T scale,
                          T* dlogits, size_t m, size_t v);
template <typename T>
void ce_backward(const T* logits, const int32_t* targets, const T* lse, T scale, T* dlogits,
                 size_t m, size_t v);

// y[j] += sum over rows of X[m x n] column j.
template <typename T> void col_sums_acc(const T* x, T* y, size_t m, size_t n);

}  // namespace charlm::kernels
