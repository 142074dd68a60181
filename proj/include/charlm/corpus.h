#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "charlm/common.h"

// Word and character-n-gram vocabularies plus truncated-BPTT batching.
// Construction is single-threaded and deterministic: ids are assigned by
// first occurrence, so two builds over the same text agree exactly.

namespace charlm {

class Vocabulary {
 public:
  // Tokens of the training stream, in corpus order. `specials` are
  // pre-registered (in the given order) before any text token; any token of
  // the form "<...>" seen in text is also marked special.
  static Vocabulary build(const std::vector<std::string>& tokens,
                          const std::vector<std::string>& specials);

  int32_t size() const { return static_cast<int32_t>(words_.size()); }
  // -1 when absent.
  int32_t id_of(const std::string& w) const;
  const std::string& word(int32_t id) const { return words_.at(static_cast<size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }
  int64_t freq(int32_t id) const { return freq_.at(static_cast<size_t>(id)); }
  const std::vector<int64_t>& freqs() const { return freq_; }
  bool is_special(int32_t id) const { return special_.at(static_cast<size_t>(id)) != 0; }
  std::vector<int32_t> special_ids() const;

  // Maps a token stream to ids; unknown surfaces map to `unk`, which must be
  // in the vocabulary if any unknown occurs.
  std::vector<int32_t> ids_for(const std::vector<std::string>& tokens,
                               const std::string& unk = "<unk>") const;

  void save_tsv(const std::string& path) const;
  static Vocabulary load_tsv(const std::string& path);

  // Used by checkpoint embedding; words in id order, parallel freq array,
  // special ids.
  struct Dump {
    std::vector<std::string> words;
    std::vector<int64_t> freqs;
    std::vector<int32_t> specials;
  };
  Dump dump() const;
  static Vocabulary from_dump(const Dump& d);

 private:
  int32_t add_word(const std::string& w, bool special);

  std::vector<std::string> words_;
  std::vector<int64_t> freq_;
  std::vector<char> special_;
  std::unordered_map<std::string, int32_t> id_of_;
};

// Sliding n-gram windows over "^" + word + "$"; a word whose padded form is
// shorter than n yields the single padded string.
std::vector<std::string> extract_ngrams(const std::string& word, int n);

class NgramIndex {
 public:
  static NgramIndex build(const Vocabulary& vocab, int n);

  int order() const { return n_; }
  int32_t gram_count() const { return static_cast<int32_t>(grams_.size()); }
  const std::string& gram(int32_t gid) const { return grams_.at(static_cast<size_t>(gid)); }
  // Empty for special words.
  const std::vector<int32_t>& grams_of(int32_t word_id) const {
    return grams_of_word_.at(static_cast<size_t>(word_id));
  }
  size_t word_count() const { return grams_of_word_.size(); }

  void save_tsv(const std::string& path) const;

 private:
  int n_ = 0;
  std::vector<std::string> grams_;
  std::unordered_map<std::string, int32_t> gram_id_;
  std::vector<std::vector<int32_t>> grams_of_word_;
};

// Reads whitespace tokens from a text file; with add_eos, appends eos_token
// after each non-empty line's tokens.
std::vector<std::string> read_tokens(const std::string& path, bool add_eos,
                                     const std::string& eos_token);

struct Batch {
  size_t batch_size = 0;
  size_t seq_len = 0;
  // Time-major: entry for (t, b) lives at t * batch_size + b.
  std::vector<int32_t> inputs;
  std::vector<int32_t> targets;
};

// Splits the token stream into batch_size contiguous rows of
// floor(N / batch_size) tokens and walks them in bptt_len windows; row
// remainders that cannot fill a window (or the final target) are dropped.
class BatchStream {
 public:
  BatchStream(std::vector<int32_t> token_ids, size_t batch_size, size_t bptt_len);

  size_t steps() const { return steps_; }
  size_t row_len() const { return row_len_; }
  bool next(Batch& out);
  void reset() { cursor_ = 0; }

 private:
  std::vector<int32_t> ids_;
  size_t batch_size_;
  size_t bptt_len_;
  size_t row_len_;
  size_t steps_;
  size_t cursor_ = 0;
};

}  // namespace charlm
