#pragma once

#include <memory>
#include <string>
#include <vector>

#include "charlm/corpus.h"
#include "charlm/ops.h"
#include "charlm/tensor.h"

// Builds a word vector from the word's character n-gram embeddings.
// Three encoders:
//   MS  — multi-dimensional self-attention: a weight per embedding dimension
//         per n-gram, softmax-normalised over the word's n-grams within each
//         dimension, then an element-wise weighted sum.
//   SS  — scalar self-attention: one weight per n-gram.
//   Sum — unweighted summation.
// Per-word functions build the computation from primitive ops and also
// report the attention weights; VocabComposerT is a fused batched path over
// many words that produces identical values and gradients.

namespace charlm {

enum class EncoderKind { None, MS, SS, Sum };

const char* encoder_name(EncoderKind k);
EncoderKind encoder_from_name(const std::string& name);

template <typename T>
struct AttentionRecord {
  int32_t word_id = -1;
  std::vector<int32_t> gram_ids;
  // MS: I x D row-major (weight of gram i in dimension j at [i*dim + j]);
  // SS: I entries, dim == 1.
  std::vector<T> weights;
  size_t dim = 0;
};

template <typename T>
struct ComposeOut {
  TensorT<T> c;  // [D]
  AttentionRecord<T> record;
};

template <typename T>
ComposeOut<T> compose_ms(const std::vector<int32_t>& gram_ids, const TensorT<T>& table,
                         const TensorT<T>& w_c);

template <typename T>
ComposeOut<T> compose_ss(const std::vector<int32_t>& gram_ids, const TensorT<T>& table,
                         const TensorT<T>& w_att);

template <typename T>
TensorT<T> compose_sum(const std::vector<int32_t>& gram_ids, const TensorT<T>& table);

template <typename T>
class VocabComposerT {
 public:
  VocabComposerT(const NgramIndex& index, EncoderKind kind);

  // Composed vectors for every word, row per word id; special (gramless)
  // rows are zero. attn is W_c [D,D] for MS, w [D] for SS, ignored for Sum.
  TensorT<T> compose_all(const TensorT<T>& table, const TensorT<T>& attn) const;

  // Composed vectors for the given word ids (row i = word_ids[i]).
  TensorT<T> compose_subset(const std::vector<int32_t>& word_ids, const TensorT<T>& table,
                            const TensorT<T>& attn) const;

  EncoderKind kind() const { return kind_; }
  const NgramIndex& index() const { return *index_; }

 private:
  struct Layout {
    std::vector<int32_t> gram_ids;   // concatenated gram ids, word blocks in order
    std::vector<size_t> block_off;   // out_rows + 1 offsets into gram_ids
    std::vector<int32_t> row_word;   // gram row -> output row
    ops::detail::IdGroups groups;    // gram-id scatter groups over gram rows
    size_t out_rows = 0;
  };

  static std::shared_ptr<const Layout> make_layout(const NgramIndex& index,
                                                   const std::vector<int32_t>& word_ids);
  TensorT<T> compose_rows(std::shared_ptr<const Layout> layout, const TensorT<T>& table,
                          const TensorT<T>& attn) const;

  const NgramIndex* index_;
  EncoderKind kind_;
  std::shared_ptr<const Layout> all_words_;
};

using VocabComposer32 = VocabComposerT<float>;
using VocabComposer64 = VocabComposerT<double>;

}  // namespace charlm
