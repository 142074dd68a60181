#include "charlm/trainer.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "charlm/checkpoint.h"
#include "charlm/kernels.h"

namespace charlm {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train.lr must be > 0");
  if (clip_norm <= 0.0) throw ConfigError("train.clip_norm must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (averaging_patience < 0) throw ConfigError("train.averaging_patience must be >= 0");
  if (decay_factor <= 0.0 || decay_factor > 1.0)
    throw ConfigError("train.decay_factor must be in (0,1]");
  if (batch_size == 0 || bptt == 0) throw ConfigError("train.batch_size and train.bptt must be positive");
}

const char* bucket_on_name(BucketOn b) { return b == BucketOn::Input ? "input" : "target"; }

BucketOn bucket_on_from_name(const std::string& s) {
  if (s == "input") return BucketOn::Input;
  if (s == "target") return BucketOn::Target;
  throw ConfigError("unknown bucket_on '" + s + "' (expected input or target)");
}

template <typename T>
void sgd_step(std::vector<NamedParam<T>>& params, double lr, double clip_norm) {
  double norm_sq = 0.0;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (const T g : p.tensor.grad()) {
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("non-finite gradient in parameter '" + p.name + "'");
      norm_sq += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  const double norm = std::sqrt(norm_sq);
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    auto& vals = p.tensor.values();
    const auto& grads = p.tensor.grad();
    const T step = static_cast<T>(lr * scale);
    for (size_t i = 0; i < vals.size(); ++i) vals[i] -= step * grads[i];
  }
}

template <typename T>
EvalResult evaluate(LanguageModelT<T>& model, const std::vector<int32_t>& ids, size_t batch_size,
                    size_t bptt, EvalTrace* trace) {
  NoGradGuard ng;
  const auto frozen = model.freeze_outputs();
  BatchStream stream(ids, batch_size, bptt);
  auto state = model.initial_state(batch_size);
  Batch batch;
  double nll_sum = 0.0;
  size_t count = 0;
  std::vector<double> per_row;
  std::vector<T> lse;
  while (stream.next(batch)) {
    auto logits = model.forward(batch, state, /*train=*/false, &frozen);
    const size_t rows = logits.rows();
    per_row.resize(rows);
    lse.resize(rows);
    kernels::ce_forward(logits.data(), batch.targets.data(), rows, logits.cols(), lse.data(),
                        per_row.data());
    for (size_t r = 0; r < rows; ++r) nll_sum += per_row[r];
    count += rows;
    if (trace) {
      trace->nll.insert(trace->nll.end(), per_row.begin(), per_row.end());
      trace->input_ids.insert(trace->input_ids.end(), batch.inputs.begin(), batch.inputs.end());
      trace->target_ids.insert(trace->target_ids.end(), batch.targets.begin(),
                               batch.targets.end());
    }
  }
  EvalResult res;
  res.positions = count;
  res.mean_nll = count ? nll_sum / static_cast<double>(count) : 0.0;
  res.ppl = std::exp(res.mean_nll);
  return res;
}

template <typename T>
FrequencyReport evaluate_by_frequency(LanguageModelT<T>& model, const std::vector<int32_t>& ids,
                                      const Vocabulary& vocab, int64_t threshold, BucketOn on,
                                      size_t batch_size, size_t bptt) {
  EvalTrace trace;
  FrequencyReport rep;
  rep.overall = evaluate(model, ids, batch_size, bptt, &trace);
  rep.threshold = threshold;
  rep.on = on;
  double sums[2] = {0.0, 0.0};
  size_t counts[2] = {0, 0};
  for (size_t i = 0; i < trace.nll.size(); ++i) {
    const int32_t sel = on == BucketOn::Input ? trace.input_ids[i] : trace.target_ids[i];
    const bool infrequent = vocab.freq(sel) < threshold;
    const int b = infrequent ? 0 : 1;
    sums[b] += trace.nll[i];
    counts[b]++;
  }
  auto fill = [](BucketResult& r, double sum, size_t count) {
    r.present = count > 0;
    r.positions = count;
    if (count) {
      r.mean_nll = sum / static_cast<double>(count);
      r.ppl = std::exp(r.mean_nll);
    }
  };
  fill(rep.infrequent, sums[0], counts[0]);
  fill(rep.frequent, sums[1], counts[1]);
  return rep;
}

std::string next_metrics_path(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::path base(out_dir);
  fs::path candidate = base / "metrics.jsonl";
  for (int k = 2; fs::exists(candidate); ++k)
    candidate = base / ("metrics-" + std::to_string(k) + ".jsonl");
  return candidate.string();
}

namespace {

// Running mean of the parameter iterates in double precision.
template <typename T>
struct TailAverage {
  bool active = false;
  size_t count = 0;
  std::vector<std::vector<double>> mean;

  void start(const std::vector<NamedParam<T>>& params) {
    active = true;
    count = 0;
    mean.clear();
    for (const auto& p : params) mean.emplace_back(p.tensor.size(), 0.0);
  }

  void accumulate(const std::vector<NamedParam<T>>& params) {
    ++count;
    for (size_t i = 0; i < params.size(); ++i) {
      const auto& vals = params[i].tensor.values();
      auto& m = mean[i];
      const double inv = 1.0 / static_cast<double>(count);
      for (size_t j = 0; j < m.size(); ++j) m[j] += (static_cast<double>(vals[j]) - m[j]) * inv;
    }
  }

  // Swaps averaged values in; returns the raw values for restore.
  std::vector<std::vector<T>> swap_in(std::vector<NamedParam<T>>& params) const {
    std::vector<std::vector<T>> backup;
    backup.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      auto& vals = params[i].tensor.values();
      backup.push_back(vals);
      for (size_t j = 0; j < vals.size(); ++j) vals[j] = static_cast<T>(mean[i][j]);
    }
    return backup;
  }

  static void swap_back(std::vector<NamedParam<T>>& params, std::vector<std::vector<T>>& backup) {
    for (size_t i = 0; i < params.size(); ++i) params[i].tensor.values() = std::move(backup[i]);
  }
};

}  // namespace

template <typename T>
TrainResult train_model(LanguageModelT<T>& model, const std::vector<int32_t>& train_ids,
                        const std::vector<int32_t>& valid_ids, const TrainConfig& cfg,
                        const std::string& out_dir) {
  const bool artifacts = !out_dir.empty();
  TrainResult result;
  std::ofstream metrics;
  if (artifacts) {
    std::filesystem::create_directories(out_dir);
    result.metrics_path = next_metrics_path(out_dir);
    metrics.open(result.metrics_path, std::ios::app);
    if (!metrics) throw DataError("cannot write metrics file: " + result.metrics_path);
    result.checkpoint_stem = (std::filesystem::path(out_dir) / "ckpt_best").string();
  }

  BatchStream stream(train_ids, cfg.batch_size, cfg.bptt);
  double lr = cfg.lr;
  double best_ppl = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale_lr = 0;
  int stale_avg = 0;
  TailAverage<T> avg;

  auto save_best = [&](int epoch) {
    if (!artifacts) return;
    save_checkpoint<T>(result.checkpoint_stem, model, train_config_to_json(cfg), epoch,
                       epoch_records_to_json(result.history));
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    stream.reset();
    auto state = model.initial_state(cfg.batch_size);
    Batch batch;
    double loss_sum = 0.0;
    size_t nbatches = 0;
    while (stream.next(batch)) {
      auto logits = model.forward(batch, state, /*train=*/true);
      auto loss = model.sequence_loss(logits, batch.targets);
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv))
        throw NumericError("training aborted: non-finite loss at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(nbatches + 1) +
                           (artifacts ? " (best checkpoint preserved)" : ""));
      model.zero_grads();
      loss.backward();
      sgd_step(model.parameters(), lr, cfg.clip_norm);
      if (avg.active) avg.accumulate(model.parameters());
      loss_sum += lv;
      ++nbatches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = nbatches ? loss_sum / static_cast<double>(nbatches) : 0.0;
    rec.lr = lr;
    rec.averaged = avg.active;

    std::vector<std::vector<T>> backup;
    if (avg.active && avg.count > 0) backup = avg.swap_in(model.parameters());
    rec.valid_ppl = evaluate(model, valid_ids, cfg.batch_size, cfg.bptt).ppl;
    const bool improved = rec.valid_ppl < best_ppl;
    if (improved) {
      best_ppl = rec.valid_ppl;
      best_epoch = epoch;
      save_best(epoch);
    }
    if (avg.active && avg.count > 0) TailAverage<T>::swap_back(model.parameters(), backup);

    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (artifacts) {
      nlohmann::json line = {{"epoch", rec.epoch},       {"train_loss", rec.train_loss},
                             {"valid_ppl", rec.valid_ppl}, {"lr", rec.lr},
                             {"seconds", rec.seconds},   {"averaged", rec.averaged}};
      metrics << line.dump() << "\n";
      metrics.flush();
    }

    if (improved) {
      stale_lr = 0;
      stale_avg = 0;
    } else {
      ++stale_lr;
      ++stale_avg;
      if (cfg.averaging_patience > 0 && !avg.active && stale_avg >= cfg.averaging_patience)
        avg.start(model.parameters());
      if (stale_lr >= cfg.patience) {
        lr *= cfg.decay_factor;
        stale_lr = 0;
      }
    }
  }

  result.best_valid_ppl = best_ppl;
  result.best_epoch = best_epoch;
  return result;
}

#define CHARLM_INSTANTIATE(T)                                                                  \
  template void sgd_step<T>(std::vector<NamedParam<T>>&, double, double);                      \
  template EvalResult evaluate<T>(LanguageModelT<T>&, const std::vector<int32_t>&, size_t,     \
                                  size_t, EvalTrace*);                                         \
  template FrequencyReport evaluate_by_frequency<T>(LanguageModelT<T>&,                        \
                                                    const std::vector<int32_t>&,               \
                                                    const Vocabulary&, int64_t, BucketOn,      \
                                                    size_t, size_t);                           \
  template TrainResult train_model<T>(LanguageModelT<T>&, const std::vector<int32_t>&,         \
                                      const std::vector<int32_t>&, const TrainConfig&,         \
                                      const std::string&);

CHARLM_INSTANTIATE(float)
CHARLM_INSTANTIATE(double)
#undef CHARLM_INSTANTIATE

}  // namespace charlm
