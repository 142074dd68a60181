#include "charlm/model.h"

#include <algorithm>
#include <unordered_map>

namespace charlm {

const char* input_mode_name(InputMode m) {
  switch (m) {
    case InputMode::WordOnly: return "word_only";
    case InputMode::WordPlusChar: return "word_plus_char";
    case InputMode::CharOnly: return "char_only";
    case InputMode::TwoWordEmbeds: return "two_word_embeds";
  }
  return "word_only";
}

InputMode input_mode_from_name(const std::string& s) {
  if (s == "word_only") return InputMode::WordOnly;
  if (s == "word_plus_char") return InputMode::WordPlusChar;
  if (s == "char_only") return InputMode::CharOnly;
  if (s == "two_word_embeds") return InputMode::TwoWordEmbeds;
  throw ConfigError("unknown input_mode '" + s +
                    "' (expected word_only, word_plus_char, char_only or two_word_embeds)");
}

const char* tying_name(TyingMode m) {
  switch (m) {
    case TyingMode::TieE: return "tie_E";
    case TyingMode::TieEPlusC: return "tie_E_plus_C";
    case TyingMode::Untied: return "untied";
  }
  return "untied";
}

TyingMode tying_from_name(const std::string& s) {
  if (s == "tie_E") return TyingMode::TieE;
  if (s == "tie_E_plus_C") return TyingMode::TieEPlusC;
  if (s == "untied") return TyingMode::Untied;
  throw ConfigError("unknown tying '" + s + "' (expected tie_E, tie_E_plus_C or untied)");
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0 || layers == 0)
    throw ConfigError("embed_dim, hidden_dim and layers must be positive");
  for (double d : {dropout_input, dropout_hidden, dropout_output})
    if (d < 0.0 || d >= 1.0) throw ConfigError("dropout rates must be in [0,1)");
  if (encoder == EncoderKind::None) {
    if (ngram != 0)
      throw ConfigError("encoder required when ngram > 0 (keys: encoder, ngram)");
    if (uses_char_input())
      throw ConfigError("input_mode '" + std::string(input_mode_name(input_mode)) +
                        "' requires a character encoder (keys: input_mode, encoder)");
    if (tying == TyingMode::TieEPlusC)
      throw ConfigError("tying 'tie_E_plus_C' requires a character encoder "
                        "(keys: tying, encoder)");
  } else {
    if (ngram < 2)
      throw ConfigError("character encoder requires ngram >= 2 (keys: encoder, ngram), got " +
                        std::to_string(ngram));
    if (!needs_encoder())
      throw ConfigError("encoder '" + std::string(encoder_name(encoder)) +
                        "' is unused: input_mode '" + input_mode_name(input_mode) +
                        "' takes no character vector and tying is '" + tying_name(tying) +
                        "' (keys: encoder, input_mode, tying)");
  }
  if (input_mode == InputMode::CharOnly && tying == TyingMode::TieE)
    throw ConfigError("tying 'tie_E' needs word embeddings but input_mode is 'char_only' "
                      "(keys: tying, input_mode)");
}

template <typename T>
LanguageModelT<T>::LanguageModelT(ModelConfig cfg, std::shared_ptr<const Vocabulary> vocab,
                                  std::shared_ptr<const NgramIndex> index, uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)), index_(std::move(index)),
      dropout_rng_(Rng(seed).fork(1)) {
  cfg_.vocab_size = vocab_->size();
  cfg_.validate();
  if (cfg_.vocab_size <= 0) throw ConfigError("model requires a non-empty vocabulary");
  const size_t v = static_cast<size_t>(cfg_.vocab_size);
  const size_t de = cfg_.embed_dim;

  if (cfg_.encoder != EncoderKind::None) {
    if (!index_) throw ConfigError("character encoder configured but no n-gram index given");
    if (index_->order() != cfg_.ngram)
      throw ConfigError("n-gram index order " + std::to_string(index_->order()) +
                        " does not match config ngram " + std::to_string(cfg_.ngram));
    composer_ = std::make_unique<VocabComposerT<T>>(*index_, cfg_.encoder);
  }

  Rng init(Rng(seed).fork(0));
  auto mat = [&](std::vector<size_t> shape) { return TensorT<T>::param(shape, init, -0.1, 0.1); };
  auto reg = [&](const std::string& name, TensorT<T> t) {
    params_.push_back({name, t});
    return t;
  };

  if (cfg_.has_word_embedding()) e_ = reg("E", mat({v, de}));
  if (cfg_.input_mode == InputMode::TwoWordEmbeds) e2_ = reg("E2", mat({v, de}));
  if (cfg_.encoder != EncoderKind::None) {
    table_ = reg("ngram_table", mat({static_cast<size_t>(index_->gram_count()), de}));
    if (cfg_.encoder == EncoderKind::MS) w_c_ = reg("W_c", mat({de, de}));
    if (cfg_.encoder == EncoderKind::SS) w_att_ = reg("w_att", mat({de}));
  }
  lstm_.resize(cfg_.layers);
  for (size_t l = 0; l < cfg_.layers; ++l) {
    const size_t din = cfg_.layer_in_dim(l);
    const size_t dout = cfg_.layer_out_dim(l);
    const std::string p = "lstm" + std::to_string(l) + ".";
    auto& lp = lstm_[l];
    lp.w_xi = reg(p + "w_xi", mat({dout, din}));
    lp.w_hi = reg(p + "w_hi", mat({dout, dout}));
    lp.b_i = reg(p + "b_i", TensorT<T>::param_const({dout}, T(0)));
    lp.w_xf = reg(p + "w_xf", mat({dout, din}));
    lp.w_hf = reg(p + "w_hf", mat({dout, dout}));
    lp.b_f = reg(p + "b_f", TensorT<T>::param_const({dout}, T(1)));
    lp.w_xo = reg(p + "w_xo", mat({dout, din}));
    lp.w_ho = reg(p + "w_ho", mat({dout, dout}));
    lp.b_o = reg(p + "b_o", TensorT<T>::param_const({dout}, T(0)));
    lp.w_xg = reg(p + "w_xg", mat({dout, din}));
    lp.w_hg = reg(p + "w_hg", mat({dout, dout}));
    lp.b_g = reg(p + "b_g", TensorT<T>::param_const({dout}, T(0)));
  }
  if (cfg_.tying == TyingMode::Untied) w_out_ = reg("W_out", mat({v, cfg_.lstm_out_dim()}));
  b_out_ = reg("b_out", TensorT<T>::param_const({v}, T(0)));
}

template <typename T>
TensorT<T> LanguageModelT<T>::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw ConfigError("no parameter named '" + name + "'");
}

template <typename T>
void LanguageModelT<T>::zero_grads() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
typename LanguageModelT<T>::State LanguageModelT<T>::initial_state(size_t batch_rows) const {
  State s;
  s.layers.reserve(cfg_.layers);
  for (size_t l = 0; l < cfg_.layers; ++l) {
    const size_t d = cfg_.layer_out_dim(l);
    s.layers.emplace_back(TensorT<T>::zeros({batch_rows, d}), TensorT<T>::zeros({batch_rows, d}));
  }
  return s;
}

template <typename T>
TensorT<T> LanguageModelT<T>::attn_param() const {
  return cfg_.encoder == EncoderKind::MS ? w_c_ : w_att_;
}

template <typename T>
TensorT<T> LanguageModelT<T>::compose_all_nograd() const {
  if (!composer_) throw ConfigError("model has no character encoder");
  NoGradGuard ng;
  return composer_->compose_all(table_, attn_param());
}

template <typename T>
typename LanguageModelT<T>::FrozenOutput LanguageModelT<T>::freeze_outputs() const {
  NoGradGuard ng;
  FrozenOutput f;
  if (composer_) f.c_all = composer_->compose_all(table_, attn_param()).detached();
  switch (cfg_.tying) {
    case TyingMode::TieE:
      f.out_w = e_.detached();
      break;
    case TyingMode::TieEPlusC:
      f.out_w = cfg_.has_word_embedding() ? ops::add(e_, f.c_all).detached() : f.c_all;
      break;
    case TyingMode::Untied:
      f.out_w = w_out_.detached();
      break;
  }
  return f;
}

template <typename T>
TensorT<T> LanguageModelT<T>::embed_rows(const std::vector<int32_t>& ids, bool train,
                                         const FrozenOutput* frozen) {
  TensorT<T> char_part;
  if (cfg_.uses_char_input()) {
    if (frozen) {
      char_part = ops::embedding_lookup(frozen->c_all, ids);
    } else if (step_c_all_.defined()) {
      char_part = ops::embedding_lookup(step_c_all_, ids);
    } else {
      // No full-vocabulary composition this step: compose just the words in
      // the batch.
      std::vector<int32_t> uniq(ids);
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      std::unordered_map<int32_t, int32_t> pos;
      pos.reserve(uniq.size());
      for (size_t i = 0; i < uniq.size(); ++i) pos.emplace(uniq[i], static_cast<int32_t>(i));
      std::vector<int32_t> remapped(ids.size());
      for (size_t i = 0; i < ids.size(); ++i) remapped[i] = pos.at(ids[i]);
      auto c_sub = composer_->compose_subset(uniq, table_, attn_param());
      char_part = ops::embedding_lookup(c_sub, remapped);
    }
  }
  TensorT<T> word_part;
  if (cfg_.has_word_embedding()) {
    word_part = ops::embedding_lookup(e_, ids);
    if (cfg_.input_mode == InputMode::TwoWordEmbeds)
      word_part = ops::add(word_part, ops::embedding_lookup(e2_, ids));
  }
  TensorT<T> out;
  if (cfg_.input_mode == InputMode::CharOnly)
    out = char_part;
  else if (cfg_.input_mode == InputMode::WordPlusChar)
    out = ops::add(word_part, char_part);
  else
    out = word_part;
  return ops::dropout(out, cfg_.dropout_input, dropout_rng_, train);
}

template <typename T>
TensorT<T> LanguageModelT<T>::output_rows(const FrozenOutput* frozen) {
  if (frozen) return frozen->out_w;
  switch (cfg_.tying) {
    case TyingMode::TieE:
      return e_;
    case TyingMode::TieEPlusC:
      return cfg_.has_word_embedding() ? ops::add(e_, step_c_all_) : step_c_all_;
    case TyingMode::Untied:
      return w_out_;
  }
  return w_out_;
}

template <typename T>
TensorT<T> LanguageModelT<T>::forward(const Batch& batch, State& state, bool train,
                                      const FrozenOutput* frozen) {
  if (state.layers.size() != cfg_.layers)
    throw ShapeError("forward: state has " + std::to_string(state.layers.size()) +
                     " layers, model has " + std::to_string(cfg_.layers));
  const size_t b = batch.batch_size, seq = batch.seq_len;

  step_c_all_ = TensorT<T>();
  if (!frozen && cfg_.tying == TyingMode::TieEPlusC)
    step_c_all_ = composer_->compose_all(table_, attn_param());

  auto x_all = embed_rows(batch.inputs, train, frozen);  // [seq*b, D_e]

  std::vector<TensorT<T>> h(cfg_.layers), c(cfg_.layers);
  for (size_t l = 0; l < cfg_.layers; ++l) {
    h[l] = state.layers[l].first;
    c[l] = state.layers[l].second;
  }
  std::vector<TensorT<T>> outputs;
  outputs.reserve(seq);
  for (size_t t = 0; t < seq; ++t) {
    TensorT<T> x = ops::slice_rows(x_all, t * b, b);
    for (size_t l = 0; l < cfg_.layers; ++l) {
      if (l > 0) x = ops::dropout(x, cfg_.dropout_hidden, dropout_rng_, train);
      auto [hn, cn] = ops::lstm_cell(x, h[l], c[l], lstm_[l]);
      h[l] = hn;
      c[l] = cn;
      x = hn;
    }
    outputs.push_back(x);
  }
  for (size_t l = 0; l < cfg_.layers; ++l)
    state.layers[l] = {h[l].detached(), c[l].detached()};

  auto hmat = ops::concat_rows(outputs);  // [seq*b, lstm_out_dim]
  hmat = ops::dropout(hmat, cfg_.dropout_output, dropout_rng_, train);
  auto logits = ops::add_bias_rows(ops::matmul_nt(hmat, output_rows(frozen)), b_out_);
  step_c_all_ = TensorT<T>();
  return logits;
}

template <typename T>
TensorT<T> LanguageModelT<T>::sequence_loss(const TensorT<T>& logits,
                                            const std::vector<int32_t>& targets) const {
  return ops::cross_entropy_mean(logits, targets);
}

template <typename T>
TensorT<T> LanguageModelT<T>::embed_input(int32_t word_id) {
  if (word_id < 0 || word_id >= cfg_.vocab_size)
    throw ShapeError("embed_input: word id " + std::to_string(word_id) + " out of range [0," +
                     std::to_string(cfg_.vocab_size) + ")");
  return embed_rows({word_id}, /*train=*/false, nullptr);
}

template class LanguageModelT<float>;
template class LanguageModelT<double>;

}  // namespace charlm
