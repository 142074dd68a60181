#include "charlm/composer.h"

#include <cmath>
#include <cstring>

namespace charlm {

const char* encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::None: return "none";
    case EncoderKind::MS: return "ms";
    case EncoderKind::SS: return "ss";
    case EncoderKind::Sum: return "sum";
  }
  return "none";
}

EncoderKind encoder_from_name(const std::string& name) {
  if (name == "none") return EncoderKind::None;
  if (name == "ms") return EncoderKind::MS;
  if (name == "ss") return EncoderKind::SS;
  if (name == "sum") return EncoderKind::Sum;
  throw ConfigError("unknown encoder '" + name + "' (expected ms, ss, sum or none)");
}

namespace {

void require_grams(const std::vector<int32_t>& gram_ids) {
  if (gram_ids.empty()) throw ShapeError("compose called on gramless word");
}

}  // namespace

template <typename T>
ComposeOut<T> compose_ms(const std::vector<int32_t>& gram_ids, const TensorT<T>& table,
                         const TensorT<T>& w_c) {
  require_grams(gram_ids);
  const size_t dim = table.cols();
  auto s = ops::embedding_lookup(table, gram_ids);     // [I, D]
  auto a = ops::matmul_nt(s, w_c);                     // [I, D], a[i,j] = (W_c s_i)_j
  auto g = ops::softmax(a, 0);                         // normalise over grams per dimension
  auto c = ops::sum_axis(ops::mul(g, s), 0);           // [D]
  ComposeOut<T> out;
  out.c = std::move(c);
  out.record.gram_ids = gram_ids;
  out.record.weights = g.values();
  out.record.dim = dim;
  return out;
}

template <typename T>
ComposeOut<T> compose_ss(const std::vector<int32_t>& gram_ids, const TensorT<T>& table,
                         const TensorT<T>& w_att) {
  require_grams(gram_ids);
  const size_t count = gram_ids.size();
  auto s = ops::embedding_lookup(table, gram_ids);                        // [I, D]
  auto scores = ops::matmul_nt(s, ops::reshape(w_att, {1, w_att.size()}));  // [I, 1]
  auto alpha = ops::softmax(scores, 0);
  auto alpha_vec = ops::reshape(alpha, {count});
  auto c = ops::sum_axis(ops::scale_rows(s, alpha_vec), 0);
  ComposeOut<T> out;
  out.c = std::move(c);
  out.record.gram_ids = gram_ids;
  out.record.weights = alpha.values();
  out.record.dim = 1;
  return out;
}

template <typename T>
TensorT<T> compose_sum(const std::vector<int32_t>& gram_ids, const TensorT<T>& table) {
  require_grams(gram_ids);
  return ops::sum_axis(ops::embedding_lookup(table, gram_ids), 0);
}

template <typename T>
VocabComposerT<T>::VocabComposerT(const NgramIndex& index, EncoderKind kind)
    : index_(&index), kind_(kind) {
  if (kind == EncoderKind::None) throw ConfigError("vocabulary composer requires an encoder");
  std::vector<int32_t> all(index.word_count());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int32_t>(i);
  all_words_ = make_layout(index, all);
}

template <typename T>
auto VocabComposerT<T>::make_layout(const NgramIndex& index, const std::vector<int32_t>& word_ids)
    -> std::shared_ptr<const Layout> {
  auto layout = std::make_shared<Layout>();
  layout->out_rows = word_ids.size();
  layout->block_off.reserve(word_ids.size() + 1);
  layout->block_off.push_back(0);
  for (size_t i = 0; i < word_ids.size(); ++i) {
    const auto& grams = index.grams_of(word_ids[i]);
    for (int32_t g : grams) {
      layout->gram_ids.push_back(g);
      layout->row_word.push_back(static_cast<int32_t>(i));
    }
    layout->block_off.push_back(layout->gram_ids.size());
  }
  layout->groups = ops::detail::group_by_id(layout->gram_ids);
  return layout;
}

namespace {

// C[w,:] += sum over block rows of weight(r,:) * S[r,:]. Blocks are
// independent, so the parallel path is bitwise-identical to the serial one.
template <typename T>
void weighted_block_rowsum(const T* s, const T* g, const T* alpha, T* c, const size_t* off,
                           size_t nblocks, size_t dim) {
#pragma omp parallel for schedule(static) if (kernels::exec() == kernels::Exec::Parallel)
  for (ptrdiff_t b = 0; b < static_cast<ptrdiff_t>(nblocks); ++b) {
    T* crow = c + static_cast<size_t>(b) * dim;
    for (size_t r = off[b]; r < off[b + 1]; ++r) {
      const T* srow = s + r * dim;
      if (g) {
        const T* grow = g + r * dim;
#pragma omp simd
        for (size_t j = 0; j < dim; ++j) crow[j] += grow[j] * srow[j];
      } else if (alpha) {
        const T a = alpha[r];
#pragma omp simd
        for (size_t j = 0; j < dim; ++j) crow[j] += a * srow[j];
      } else {
#pragma omp simd
        for (size_t j = 0; j < dim; ++j) crow[j] += srow[j];
      }
    }
  }
}

}  // namespace

template <typename T>
TensorT<T> VocabComposerT<T>::compose_rows(std::shared_ptr<const Layout> layout,
                                           const TensorT<T>& table, const TensorT<T>& attn) const {
  const size_t dim = table.cols();
  const size_t nrows = layout->gram_ids.size();
  const size_t out_rows = layout->out_rows;
  const EncoderKind kind = kind_;

  auto s_buf = std::make_shared<std::vector<T>>(nrows * dim);
  kernels::gather_rows(table.data(), layout->gram_ids.data(), s_buf->data(), nrows, dim);

  // Attention weights, shared with backward: [N, D] for MS, [N, 1] for SS.
  std::shared_ptr<std::vector<T>> g_buf;
  std::vector<T> out(out_rows * dim, T(0));

  if (kind == EncoderKind::MS) {
    g_buf = std::make_shared<std::vector<T>>(nrows * dim);
    std::vector<T> a_buf(nrows * dim);
    kernels::matmul_nt(s_buf->data(), attn.data(), a_buf.data(), nrows, dim, dim, false);
    kernels::softmax_block_cols(a_buf.data(), g_buf->data(), layout->block_off.data(), out_rows,
                                dim);
    weighted_block_rowsum<T>(s_buf->data(), g_buf->data(), nullptr, out.data(),
                             layout->block_off.data(), out_rows, dim);
  } else if (kind == EncoderKind::SS) {
    g_buf = std::make_shared<std::vector<T>>(nrows);
    std::vector<T> scores(nrows);
    kernels::matmul_nt(s_buf->data(), attn.data(), scores.data(), nrows, dim, 1, false);
    kernels::softmax_block_cols(scores.data(), g_buf->data(), layout->block_off.data(), out_rows,
                                1);
    weighted_block_rowsum<T>(s_buf->data(), nullptr, g_buf->data(), out.data(),
                             layout->block_off.data(), out_rows, dim);
  } else {
    weighted_block_rowsum<T>(s_buf->data(), nullptr, nullptr, out.data(), layout->block_off.data(),
                             out_rows, dim);
  }

  std::vector<TensorT<T>> parents{table};
  if (kind != EncoderKind::Sum) parents.push_back(attn);
  TensorT<T> attn_h = attn;
  TensorT<T> table_h = table;

  return make_op<T>(
      {out_rows, dim}, std::move(out), parents,
      [table_h, attn_h, layout, s_buf, g_buf, kind, nrows, dim, out_rows](Node<T>& self) mutable {
        const T* dc = self.grad.data();
        std::vector<T> ds(nrows * dim, T(0));

        if (kind == EncoderKind::MS) {
          // dG = dC(word) .* S ; dS = dC(word) .* G
          std::vector<T> dg(nrows * dim);
#pragma omp parallel for schedule(static) if (kernels::exec() == kernels::Exec::Parallel)
          for (ptrdiff_t r = 0; r < static_cast<ptrdiff_t>(nrows); ++r) {
            const T* dcrow = dc + static_cast<size_t>(layout->row_word[r]) * dim;
            const T* srow = s_buf->data() + r * dim;
            const T* grow = g_buf->data() + r * dim;
            T* dgrow = dg.data() + r * dim;
            T* dsrow = ds.data() + r * dim;
            for (size_t j = 0; j < dim; ++j) {
              dgrow[j] = dcrow[j] * srow[j];
              dsrow[j] = dcrow[j] * grow[j];
            }
          }
          std::vector<T> da(nrows * dim, T(0));
          kernels::softmax_block_cols_bwd_acc(g_buf->data(), dg.data(), da.data(),
                                              layout->block_off.data(), out_rows, dim);
          kernels::matmul_nn(da.data(), attn_h.data(), ds.data(), nrows, dim, dim, true);
          if (attn_h.requires_grad())
            kernels::matmul_tn(da.data(), s_buf->data(), attn_h.grad().data(), nrows, dim, dim,
                               true);
        } else if (kind == EncoderKind::SS) {
          std::vector<T> dalpha(nrows);
#pragma omp parallel for schedule(static) if (kernels::exec() == kernels::Exec::Parallel)
          for (ptrdiff_t r = 0; r < static_cast<ptrdiff_t>(nrows); ++r) {
            const T* dcrow = dc + static_cast<size_t>(layout->row_word[r]) * dim;
            const T* srow = s_buf->data() + r * dim;
            const T a = (*g_buf)[static_cast<size_t>(r)];
            T* dsrow = ds.data() + r * dim;
            double d = 0.0;
            for (size_t j = 0; j < dim; ++j) {
              d += static_cast<double>(dcrow[j]) * srow[j];
              dsrow[j] = a * dcrow[j];
            }
            dalpha[static_cast<size_t>(r)] = static_cast<T>(d);
          }
          std::vector<T> dscores(nrows, T(0));
          kernels::softmax_block_cols_bwd_acc(g_buf->data(), dalpha.data(), dscores.data(),
                                              layout->block_off.data(), out_rows, 1);
          for (size_t r = 0; r < nrows; ++r)
            kernels::vaxpy(dscores[r], attn_h.data(), ds.data() + r * dim, dim);
          if (attn_h.requires_grad())
            kernels::matmul_tn(dscores.data(), s_buf->data(), attn_h.grad().data(), nrows, 1, dim,
                               true);
        } else {
#pragma omp parallel for schedule(static) if (kernels::exec() == kernels::Exec::Parallel)
          for (ptrdiff_t r = 0; r < static_cast<ptrdiff_t>(nrows); ++r)
            std::memcpy(ds.data() + static_cast<size_t>(r) * dim,
                        dc + static_cast<size_t>(layout->row_word[r]) * dim, dim * sizeof(T));
        }

        if (table_h.requires_grad())
          kernels::scatter_add_grouped(table_h.grad().data(), ds.data(),
                                       layout->groups.dst_ids.data(),
                                       layout->groups.src_rows.data(),
                                       layout->groups.offsets.data(),
                                       layout->groups.dst_ids.size(), dim);
      },
      "compose_vocab");
}

template <typename T>
TensorT<T> VocabComposerT<T>::compose_all(const TensorT<T>& table, const TensorT<T>& attn) const {
  return compose_rows(all_words_, table, attn);
}

template <typename T>
TensorT<T> VocabComposerT<T>::compose_subset(const std::vector<int32_t>& word_ids,
                                             const TensorT<T>& table,
                                             const TensorT<T>& attn) const {
  return compose_rows(make_layout(*index_, word_ids), table, attn);
}

template struct ComposeOut<float>;
template struct ComposeOut<double>;
template ComposeOut<float> compose_ms<float>(const std::vector<int32_t>&, const TensorT<float>&,
                                             const TensorT<float>&);
template ComposeOut<double> compose_ms<double>(const std::vector<int32_t>&, const TensorT<double>&,
                                               const TensorT<double>&);
template ComposeOut<float> compose_ss<float>(const std::vector<int32_t>&, const TensorT<float>&,
                                             const TensorT<float>&);
template ComposeOut<double> compose_ss<double>(const std::vector<int32_t>&, const TensorT<double>&,
                                               const TensorT<double>&);
template TensorT<float> compose_sum<float>(const std::vector<int32_t>&, const TensorT<float>&);
template TensorT<double> compose_sum<double>(const std::vector<int32_t>&, const TensorT<double>&);
template class VocabComposerT<float>;
template class VocabComposerT<double>;

}  // namespace charlm
