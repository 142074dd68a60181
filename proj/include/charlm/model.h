#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "charlm/composer.h"
#include "charlm/corpus.h"
#include "charlm/ops.h"
#include "charlm/tensor.h"

// Word-level LSTM language model. The input embedding is, per input mode,
// the word embedding, the composed character vector, their sum, or the sum
// of two word embeddings; the output projection can be untied, tied to E,
// or tied to E + C where C holds the composed vector of every word. With
// E + C tying the full-vocabulary composition is rebuilt once per forward
// (i.e. once per optimizer step), and gradients reach the n-gram table and
// the attention parameters through both the input and the output path.

namespace charlm {

enum class InputMode { WordOnly, WordPlusChar, CharOnly, TwoWordEmbeds };
enum class TyingMode { TieE, TieEPlusC, Untied };

const char* input_mode_name(InputMode m);
InputMode input_mode_from_name(const std::string& s);
const char* tying_name(TyingMode m);
TyingMode tying_from_name(const std::string& s);

struct ModelConfig {
  int32_t vocab_size = 0;  // derived from the training vocabulary
  size_t embed_dim = 200;
  size_t hidden_dim = 200;
  size_t layers = 2;
  int ngram = 3;  // 0 = no character units
  EncoderKind encoder = EncoderKind::MS;
  InputMode input_mode = InputMode::WordPlusChar;
  TyingMode tying = TyingMode::TieEPlusC;
  double dropout_input = 0.2;
  double dropout_hidden = 0.2;
  double dropout_output = 0.2;

  bool uses_char_input() const {
    return input_mode == InputMode::WordPlusChar || input_mode == InputMode::CharOnly;
  }
  bool has_word_embedding() const { return input_mode != InputMode::CharOnly; }
  bool needs_encoder() const { return uses_char_input() || tying == TyingMode::TieEPlusC; }
  // Tied modes project from embed_dim, so the last LSTM layer emits embed_dim.
  size_t lstm_out_dim() const { return tying == TyingMode::Untied ? hidden_dim : embed_dim; }
  size_t layer_out_dim(size_t layer) const {
    return layer + 1 == layers ? lstm_out_dim() : hidden_dim;
  }
  size_t layer_in_dim(size_t layer) const {
    return layer == 0 ? embed_dim : layer_out_dim(layer - 1);
  }

  // Throws ConfigError naming the conflicting keys on invalid combinations.
  void validate() const;
};

template <typename T>
struct NamedParam {
  std::string name;
  TensorT<T> tensor;
};

template <typename T>
class LanguageModelT {
 public:
  LanguageModelT(ModelConfig cfg, std::shared_ptr<const Vocabulary> vocab,
                 std::shared_ptr<const NgramIndex> index, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocab_ptr() const { return vocab_; }
  const std::shared_ptr<const NgramIndex>& index_ptr() const { return index_; }
  const VocabComposerT<T>* composer() const { return composer_.get(); }

  std::vector<NamedParam<T>>& parameters() { return params_; }
  const std::vector<NamedParam<T>>& parameters() const { return params_; }
  // Throws if absent.
  TensorT<T> param(const std::string& name) const;
  void zero_grads();

  struct State {
    std::vector<std::pair<TensorT<T>, TensorT<T>>> layers;  // (h, c), detached
  };
  State initial_state(size_t batch_rows) const;

  // Detached output-side values for repeated evaluation of frozen weights.
  struct FrozenOutput {
    TensorT<T> c_all;  // [V, D_e]; undefined when no encoder
    TensorT<T> out_w;  // [V, lstm_out_dim]
  };
  FrozenOutput freeze_outputs() const;

  // Logits [seq_len * batch, V] in time-major row order; carries state
  // across calls (detached between calls, so gradients stop at batch
  // boundaries).
  TensorT<T> forward(const Batch& batch, State& state, bool train,
                     const FrozenOutput* frozen = nullptr);

  TensorT<T> sequence_loss(const TensorT<T>& logits, const std::vector<int32_t>& targets) const;

  // Input embedding of a single word under the configured input mode
  // (no dropout). Shape [1, D_e].
  TensorT<T> embed_input(int32_t word_id);

  // Composed vectors of all words with current parameters, no graph.
  TensorT<T> compose_all_nograd() const;

  Rng& dropout_rng() { return dropout_rng_; }

 private:
  TensorT<T> attn_param() const;
  TensorT<T> embed_rows(const std::vector<int32_t>& ids, bool train, const FrozenOutput* frozen);
  TensorT<T> output_rows(const FrozenOutput* frozen);  // [V, lstm_out_dim]

  ModelConfig cfg_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::shared_ptr<const NgramIndex> index_;
  std::unique_ptr<VocabComposerT<T>> composer_;
  std::vector<NamedParam<T>> params_;
  std::vector<ops::LstmParams<T>> lstm_;
  TensorT<T> e_, e2_, table_, w_c_, w_att_, w_out_, b_out_;
  Rng dropout_rng_;
  // Set by forward() for the step's full-vocabulary composition when tying
  // needs it; shared between the input lookup and the output projection.
  TensorT<T> step_c_all_;
};

using LanguageModel32 = LanguageModelT<float>;
using LanguageModel64 = LanguageModelT<double>;

}  // namespace charlm
