#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "charlm/model.h"
#include "charlm/trainer.h"

// Checkpoint container: <stem>.json holds the manifest (format version,
// model/train config, vocabulary, metrics history and a tensor directory
// with name/shape/dtype/offset/length); <stem>.bin is the concatenation of
// all tensors, row-major little-endian, in directory order. Loading
// cross-checks every entry and the exact payload size, so shape edits and
// truncation are detected and reported by tensor name.

namespace charlm {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json epoch_records_to_json(const std::vector<EpochRecord>& hist);

template <typename T>
void save_checkpoint(const std::string& stem, const LanguageModelT<T>& model,
                     const nlohmann::json& train_config, int epoch,
                     const nlohmann::json& metrics_history);

template <typename T>
struct LoadedCheckpoint {
  std::unique_ptr<LanguageModelT<T>> model;
  nlohmann::json manifest;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& stem);

// Accepts either the stem or one of the two file paths.
std::string checkpoint_stem(const std::string& path);

}  // namespace charlm
