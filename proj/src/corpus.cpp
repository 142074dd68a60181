#include "charlm/corpus.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace charlm {

namespace {

bool looks_special(const std::string& w) {
  return w.size() >= 2 && w.front() == '<' && w.back() == '>';
}

}  // namespace

int32_t Vocabulary::add_word(const std::string& w, bool special) {
  const int32_t id = static_cast<int32_t>(words_.size());
  words_.push_back(w);
  freq_.push_back(0);
  special_.push_back(special ? 1 : 0);
  id_of_.emplace(w, id);
  return id;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& tokens,
                             const std::vector<std::string>& specials) {
  if (tokens.empty()) throw DataError("empty training corpus");
  Vocabulary v;
  for (const auto& s : specials)
    if (v.id_of(s) < 0) v.add_word(s, true);
  for (const auto& tok : tokens) {
    int32_t id = v.id_of(tok);
    if (id < 0) id = v.add_word(tok, looks_special(tok));
    v.freq_[static_cast<size_t>(id)]++;
  }
  return v;
}

int32_t Vocabulary::id_of(const std::string& w) const {
  auto it = id_of_.find(w);
  return it == id_of_.end() ? -1 : it->second;
}

std::vector<int32_t> Vocabulary::special_ids() const {
  std::vector<int32_t> out;
  for (size_t i = 0; i < special_.size(); ++i)
    if (special_[i]) out.push_back(static_cast<int32_t>(i));
  return out;
}

std::vector<int32_t> Vocabulary::ids_for(const std::vector<std::string>& tokens,
                                         const std::string& unk) const {
  std::vector<int32_t> out;
  out.reserve(tokens.size());
  int32_t unk_id = -2;  // resolved lazily so closed-vocabulary text never needs it
  for (const auto& tok : tokens) {
    int32_t id = id_of(tok);
    if (id < 0) {
      if (unk_id == -2) unk_id = id_of(unk);
      if (unk_id < 0)
        throw DataError("token '" + tok + "' not in vocabulary and no '" + unk + "' token present");
      id = unk_id;
    }
    out.push_back(id);
  }
  return out;
}

void Vocabulary::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (size_t i = 0; i < words_.size(); ++i)
    out << words_[i] << '\t' << i << '\t' << freq_[i] << '\n';
}

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DataError("malformed vocabulary line: " + line);
    const std::string w = line.substr(0, t1);
    const int32_t id = static_cast<int32_t>(std::stol(line.substr(t1 + 1, t2 - t1 - 1)));
    const int64_t f = std::stoll(line.substr(t2 + 1));
    if (id != v.size()) throw DataError("vocabulary ids out of order at: " + line);
    v.add_word(w, looks_special(w));
    v.freq_.back() = f;
  }
  if (v.size() == 0) throw DataError("empty vocabulary file: " + path);
  return v;
}

Vocabulary::Dump Vocabulary::dump() const {
  return Dump{words_, freq_, special_ids()};
}

Vocabulary Vocabulary::from_dump(const Dump& d) {
  Vocabulary v;
  for (const auto& w : d.words) v.add_word(w, false);
  if (d.freqs.size() != d.words.size())
    throw DataError("vocabulary dump: freq count does not match word count");
  v.freq_ = d.freqs;
  for (int32_t s : d.specials) {
    if (s < 0 || s >= v.size()) throw DataError("vocabulary dump: special id out of range");
    v.special_[static_cast<size_t>(s)] = 1;
  }
  return v;
}

std::vector<std::string> extract_ngrams(const std::string& word, int n) {
  if (n < 2) throw ConfigError("n-gram order must be >= 2, got " + std::to_string(n));
  if (word.empty()) throw ConfigError("extract_ngrams: empty word");
  const std::string padded = "^" + word + "$";
  const size_t un = static_cast<size_t>(n);
  if (padded.size() < un) return {padded};
  std::vector<std::string> out;
  out.reserve(padded.size() - un + 1);
  for (size_t i = 0; i + un <= padded.size(); ++i) out.push_back(padded.substr(i, un));
  return out;
}

NgramIndex NgramIndex::build(const Vocabulary& vocab, int n) {
  if (n < 2) throw ConfigError("n-gram order must be >= 2, got " + std::to_string(n));
  NgramIndex idx;
  idx.n_ = n;
  idx.grams_of_word_.resize(static_cast<size_t>(vocab.size()));
  for (int32_t w = 0; w < vocab.size(); ++w) {
    if (vocab.is_special(w)) continue;
    const auto grams = extract_ngrams(vocab.word(w), n);
    auto& list = idx.grams_of_word_[static_cast<size_t>(w)];
    list.reserve(grams.size());
    for (const auto& g : grams) {
      auto it = idx.gram_id_.find(g);
      int32_t gid;
      if (it == idx.gram_id_.end()) {
        gid = static_cast<int32_t>(idx.grams_.size());
        idx.grams_.push_back(g);
        idx.gram_id_.emplace(g, gid);
      } else {
        gid = it->second;
      }
      list.push_back(gid);
    }
  }
  return idx;
}

void NgramIndex::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write n-gram file: " + path);
  std::vector<int64_t> refs(grams_.size(), 0);
  for (const auto& list : grams_of_word_)
    for (int32_t g : list) refs[static_cast<size_t>(g)]++;
  for (size_t i = 0; i < grams_.size(); ++i)
    out << grams_[i] << '\t' << i << '\t' << refs[i] << '\n';
}

std::vector<std::string> read_tokens(const std::string& path, bool add_eos,
                                     const std::string& eos_token) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    bool any = false;
    while (ls >> tok) {
      tokens.push_back(tok);
      any = true;
    }
    if (any && add_eos) tokens.push_back(eos_token);
  }
  return tokens;
}

BatchStream::BatchStream(std::vector<int32_t> token_ids, size_t batch_size, size_t bptt_len)
    : ids_(std::move(token_ids)), batch_size_(batch_size), bptt_len_(bptt_len) {
  if (batch_size == 0 || bptt_len == 0)
    throw ConfigError("batch size and bptt length must be positive");
  const size_t need = batch_size * (bptt_len + 1);
  if (ids_.size() < need)
    throw DataError("corpus too small: need at least " + std::to_string(need) + " tokens (batch " +
                    std::to_string(batch_size) + " x (bptt " + std::to_string(bptt_len) +
                    " + 1)), got " + std::to_string(ids_.size()));
  row_len_ = ids_.size() / batch_size_;
  steps_ = (row_len_ - 1) / bptt_len_;
}

bool BatchStream::next(Batch& out) {
  if (cursor_ >= steps_) return false;
  const size_t col0 = cursor_ * bptt_len_;
  out.batch_size = batch_size_;
  out.seq_len = bptt_len_;
  out.inputs.resize(batch_size_ * bptt_len_);
  out.targets.resize(batch_size_ * bptt_len_);
  for (size_t t = 0; t < bptt_len_; ++t) {
    for (size_t b = 0; b < batch_size_; ++b) {
      const size_t pos = b * row_len_ + col0 + t;
      out.inputs[t * batch_size_ + b] = ids_[pos];
      out.targets[t * batch_size_ + b] = ids_[pos + 1];
    }
  }
  ++cursor_;
  return true;
}

}  // namespace charlm
