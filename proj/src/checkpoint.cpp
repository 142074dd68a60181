#include "charlm/checkpoint.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace charlm {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts are unsupported");

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + scope);
  }
}

template <typename T>
const char* dtype_tag();
template <>
const char* dtype_tag<float>() { return "f32"; }
template <>
const char* dtype_tag<double>() { return "f64"; }

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"vocab_size", cfg.vocab_size},
              {"embed_dim", cfg.embed_dim},
              {"hidden_dim", cfg.hidden_dim},
              {"layers", cfg.layers},
              {"ngram", cfg.ngram},
              {"encoder", encoder_name(cfg.encoder)},
              {"input_mode", input_mode_name(cfg.input_mode)},
              {"tying", tying_name(cfg.tying)},
              {"dropout_input", cfg.dropout_input},
              {"dropout_hidden", cfg.dropout_hidden},
              {"dropout_output", cfg.dropout_output}};
}

ModelConfig model_config_from_json(const json& j) {
  check_keys(j, {"vocab_size", "embed_dim", "hidden_dim", "layers", "ngram", "encoder",
                 "input_mode", "tying", "dropout_input", "dropout_hidden", "dropout_output"},
             "model config");
  ModelConfig cfg;
  if (j.contains("vocab_size")) cfg.vocab_size = j.at("vocab_size").get<int32_t>();
  if (j.contains("embed_dim")) cfg.embed_dim = j.at("embed_dim").get<size_t>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j.at("hidden_dim").get<size_t>();
  if (j.contains("layers")) cfg.layers = j.at("layers").get<size_t>();
  if (j.contains("ngram")) cfg.ngram = j.at("ngram").get<int>();
  if (j.contains("encoder")) cfg.encoder = encoder_from_name(j.at("encoder").get<std::string>());
  if (j.contains("input_mode"))
    cfg.input_mode = input_mode_from_name(j.at("input_mode").get<std::string>());
  if (j.contains("tying")) cfg.tying = tying_from_name(j.at("tying").get<std::string>());
  if (j.contains("dropout_input")) cfg.dropout_input = j.at("dropout_input").get<double>();
  if (j.contains("dropout_hidden")) cfg.dropout_hidden = j.at("dropout_hidden").get<double>();
  if (j.contains("dropout_output")) cfg.dropout_output = j.at("dropout_output").get<double>();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"lr", cfg.lr},
              {"clip_norm", cfg.clip_norm},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"bptt", cfg.bptt},
              {"decay_factor", cfg.decay_factor},
              {"patience", cfg.patience},
              {"averaging_patience", cfg.averaging_patience},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j, {"lr", "clip_norm", "epochs", "batch_size", "bptt", "decay_factor", "patience",
                 "averaging_patience", "seed"},
             "train config");
  TrainConfig cfg;
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("clip_norm")) cfg.clip_norm = j.at("clip_norm").get<double>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<size_t>();
  if (j.contains("bptt")) cfg.bptt = j.at("bptt").get<size_t>();
  if (j.contains("decay_factor")) cfg.decay_factor = j.at("decay_factor").get<double>();
  if (j.contains("patience")) cfg.patience = j.at("patience").get<int>();
  if (j.contains("averaging_patience"))
    cfg.averaging_patience = j.at("averaging_patience").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

json epoch_records_to_json(const std::vector<EpochRecord>& hist) {
  json arr = json::array();
  for (const auto& r : hist)
    arr.push_back(json{{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"valid_ppl", r.valid_ppl},
                       {"lr", r.lr},
                       {"seconds", r.seconds},
                       {"averaged", r.averaged}});
  return arr;
}

std::string checkpoint_stem(const std::string& path) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
    return path.substr(0, path.size() - 5);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".bin")
    return path.substr(0, path.size() - 4);
  return path;
}

template <typename T>
void save_checkpoint(const std::string& stem, const LanguageModelT<T>& model,
                     const json& train_config, int epoch, const json& metrics_history) {
  const auto& vocab = model.vocab();
  const auto vd = vocab.dump();

  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["dtype"] = dtype_tag<T>();
  manifest["model"] = model_config_to_json(model.config());
  manifest["train"] = train_config;
  manifest["epoch"] = epoch;
  manifest["metrics"] = metrics_history;
  manifest["vocab"] = json{{"words", vd.words}, {"freqs", vd.freqs}, {"specials", vd.specials}};

  json tensors = json::array();
  size_t offset = 0;
  for (const auto& p : model.parameters()) {
    const size_t bytes = p.tensor.size() * sizeof(T);
    tensors.push_back(json{{"name", p.name},
                           {"shape", p.tensor.shape()},
                           {"offset", offset},
                           {"bytes", bytes}});
    offset += bytes;
  }
  manifest["tensors"] = tensors;

  std::ofstream mf(stem + ".json");
  if (!mf) throw DataError("cannot write checkpoint manifest: " + stem + ".json");
  mf << manifest.dump(2) << "\n";
  mf.close();

  std::ofstream bf(stem + ".bin", std::ios::binary | std::ios::trunc);
  if (!bf) throw DataError("cannot write checkpoint payload: " + stem + ".bin");
  for (const auto& p : model.parameters())
    bf.write(reinterpret_cast<const char*>(p.tensor.data()),
             static_cast<std::streamsize>(p.tensor.size() * sizeof(T)));
  bf.close();
  if (!bf) throw DataError("failed writing checkpoint payload: " + stem + ".bin");
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& stem_or_path) {
  const std::string stem = checkpoint_stem(stem_or_path);
  const std::string manifest_path = stem + ".json";
  const std::string payload_path = stem + ".bin";

  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot read checkpoint manifest: " + manifest_path);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint manifest " + manifest_path + ": " + e.what());
  }

  check_keys(manifest,
             {"format_version", "dtype", "model", "train", "epoch", "metrics", "vocab", "tensors"},
             "checkpoint manifest");
  if (!manifest.contains("format_version"))
    throw DataError("checkpoint manifest missing format_version");
  const int version = manifest.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion)
    throw DataError("unsupported checkpoint format version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
  const std::string dtype = manifest.at("dtype").get<std::string>();
  if (dtype != dtype_tag<T>())
    throw DataError("checkpoint dtype is " + dtype + ", loader expects " + dtype_tag<T>());

  const auto& jv = manifest.at("vocab");
  check_keys(jv, {"words", "freqs", "specials"}, "checkpoint vocab");
  Vocabulary::Dump vd;
  vd.words = jv.at("words").get<std::vector<std::string>>();
  vd.freqs = jv.at("freqs").get<std::vector<int64_t>>();
  vd.specials = jv.at("specials").get<std::vector<int32_t>>();
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::from_dump(vd));

  ModelConfig cfg = model_config_from_json(manifest.at("model"));
  if (cfg.vocab_size != vocab->size())
    throw DataError("checkpoint vocab_size " + std::to_string(cfg.vocab_size) +
                    " does not match stored vocabulary of " + std::to_string(vocab->size()));

  std::shared_ptr<const NgramIndex> index;
  if (cfg.encoder != EncoderKind::None)
    index = std::make_shared<const NgramIndex>(NgramIndex::build(*vocab, cfg.ngram));

  auto model = std::make_unique<LanguageModelT<T>>(cfg, vocab, index, /*seed=*/0);

  // Tensor directory must match the model's parameter set exactly.
  const auto& params = model->parameters();
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size())
    throw DataError("checkpoint lists " + std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  size_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = tensors.at(i);
    check_keys(e, {"name", "shape", "offset", "bytes"}, "tensor entry");
    const std::string name = e.at("name").get<std::string>();
    if (name != params[i].name)
      throw DataError("checkpoint tensor '" + name + "' does not match model parameter '" +
                      params[i].name + "'");
    const auto shape = e.at("shape").get<std::vector<size_t>>();
    if (shape != params[i].tensor.shape())
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                      ", model expects " + shape_str(params[i].tensor.shape()));
    if (e.at("offset").get<size_t>() != offset)
      throw DataError("checkpoint tensor '" + name + "' at unexpected offset");
    const size_t bytes = e.at("bytes").get<size_t>();
    if (bytes != params[i].tensor.size() * sizeof(T))
      throw DataError("checkpoint tensor '" + name + "' payload length mismatch");
    offset += bytes;
  }

  std::error_code ec;
  const auto fsize = std::filesystem::file_size(payload_path, ec);
  if (ec) throw DataError("cannot read checkpoint payload: " + payload_path);
  if (fsize != offset)
    throw DataError("checkpoint payload length mismatch: expected " + std::to_string(offset) +
                    " bytes, file has " + std::to_string(fsize));

  std::ifstream bf(payload_path, std::ios::binary);
  if (!bf) throw DataError("cannot read checkpoint payload: " + payload_path);
  for (auto& p : model->parameters()) {
    bf.read(reinterpret_cast<char*>(p.tensor.data()),
            static_cast<std::streamsize>(p.tensor.size() * sizeof(T)));
    if (!bf) throw DataError("checkpoint payload truncated in tensor '" + p.name + "'");
  }

  LoadedCheckpoint<T> out;
  out.model = std::move(model);
  out.manifest = std::move(manifest);
  return out;
}

template void save_checkpoint<float>(const std::string&, const LanguageModelT<float>&,
                                     const json&, int, const json&);
template void save_checkpoint<double>(const std::string&, const LanguageModelT<double>&,
                                      const json&, int, const json&);
template LoadedCheckpoint<float> load_checkpoint<float>(const std::string&);
template LoadedCheckpoint<double> load_checkpoint<double>(const std::string&);
template struct LoadedCheckpoint<float>;
template struct LoadedCheckpoint<double>;

}  // namespace charlm
