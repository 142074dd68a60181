#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "charlm/corpus.h"
#include "charlm/model.h"

// SGD training loop with global-norm gradient clipping, learning-rate decay
// on validation plateau and optional tail parameter averaging (a running
// mean of the iterates, switched on after the validation score stalls; the
// averaged weights are what gets evaluated and checkpointed from then on).

namespace charlm {

struct TrainConfig {
  double lr = 5.0;
  double clip_norm = 0.25;
  int epochs = 10;
  size_t batch_size = 20;
  size_t bptt = 35;
  double decay_factor = 0.25;
  int patience = 2;
  int averaging_patience = 0;  // 0 = averaging off
  uint64_t seed = 1;

  void validate() const;
};

// Global-norm clip followed by p -= lr * g over all trainable parameters.
// Throws NumericError naming the parameter on a non-finite gradient.
template <typename T>
void sgd_step(std::vector<NamedParam<T>>& params, double lr, double clip_norm);

struct EvalResult {
  double ppl = 0.0;
  double mean_nll = 0.0;
  size_t positions = 0;
};

// Per-position evaluation stream, time-major within each batch step.
struct EvalTrace {
  std::vector<double> nll;
  std::vector<int32_t> input_ids;
  std::vector<int32_t> target_ids;
};

// Perplexity over the token stream: dropout off, states carried across
// batches, first token of each stream row is input-only.
template <typename T>
EvalResult evaluate(LanguageModelT<T>& model, const std::vector<int32_t>& ids, size_t batch_size,
                    size_t bptt, EvalTrace* trace = nullptr);

enum class BucketOn { Input, Target };

const char* bucket_on_name(BucketOn b);
BucketOn bucket_on_from_name(const std::string& s);

struct BucketResult {
  bool present = false;
  double ppl = 0.0;
  double mean_nll = 0.0;
  size_t positions = 0;
};

struct FrequencyReport {
  EvalResult overall;
  BucketResult infrequent;  // selected word's training frequency < threshold
  BucketResult frequent;
  int64_t threshold = 0;
  BucketOn on = BucketOn::Input;
};

template <typename T>
FrequencyReport evaluate_by_frequency(LanguageModelT<T>& model, const std::vector<int32_t>& ids,
                                      const Vocabulary& vocab, int64_t threshold, BucketOn on,
                                      size_t batch_size, size_t bptt);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_ppl = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  bool averaged = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_valid_ppl = 0.0;
  int best_epoch = 0;
  std::string checkpoint_stem;  // empty when out_dir was empty
  std::string metrics_path;
};

// Runs the full loop. With a non-empty out_dir, appends one JSON line per
// epoch to a fresh metrics file and keeps the best-validation checkpoint at
// <out_dir>/ckpt_best.{json,bin}. A non-finite loss aborts with
// NumericError after the best checkpoint so far has been preserved.
template <typename T>
TrainResult train_model(LanguageModelT<T>& model, const std::vector<int32_t>& train_ids,
                        const std::vector<int32_t>& valid_ids, const TrainConfig& cfg,
                        const std::string& out_dir);

// First metrics file name that does not exist yet: metrics.jsonl,
// metrics-2.jsonl, ... so reruns never overwrite.
std::string next_metrics_path(const std::string& out_dir);

}  // namespace charlm
