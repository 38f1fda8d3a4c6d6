#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dkt/model.hpp"

namespace dkt {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Self-describing model container: config fields plus every parameter tensor
// with its shape. JSON numbers are emitted with round-trip precision, so
// save -> load -> save is bit-exact.
inline void save_checkpoint(std::ostream& out, const ModelParams& params,
                            const ModelConfig& cfg) {
  nlohmann::json doc;
  doc["format"] = "dkt-model";
  doc["version"] = 1;
  doc["cell_kind"] = to_string(cfg.cell_kind);
  doc["num_skills"] = model_num_skills(params);
  doc["hidden_size"] = model_hidden(params);
  doc["encoding"] = to_string(cfg.encoding);
  doc["dropout_rate"] = cfg.dropout_rate;
  doc["init_stddev"] = cfg.init_stddev;
  doc["seed"] = cfg.seed;
  nlohmann::json tensors = nlohmann::json::object();
  auto& mutable_params = const_cast<ModelParams&>(params);
  for (const auto& t : named_tensors(mutable_params)) {
    nlohmann::json entry;
    entry["shape"] = t.shape;
    entry["data"] = std::vector<double>(t.data, t.data + t.size);
    tensors[t.name] = std::move(entry);
  }
  doc["tensors"] = std::move(tensors);
  out << doc.dump() << '\n';
}

struct Checkpoint {
  ModelParams params;
  ModelConfig config;
};

inline Checkpoint load_checkpoint(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "dkt-model")
    throw CheckpointError("not a model checkpoint (missing format tag)");

  ModelConfig cfg;
  Checkpoint result{LstmParams{}, cfg};
  try {
    cfg.cell_kind = cell_kind_from_string(doc.at("cell_kind").get<std::string>());
    cfg.hidden_size = doc.at("hidden_size").get<int>();
    cfg.encoding = encoding_from_string(doc.at("encoding").get<std::string>());
    cfg.dropout_rate = doc.at("dropout_rate").get<double>();
    cfg.init_stddev = doc.at("init_stddev").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    const int m = doc.at("num_skills").get<int>();
    if (m < 1 || cfg.hidden_size < 1) throw CheckpointError("invalid dimensions");

    ModelParams params = cfg.cell_kind == CellKind::lstm
                             ? ModelParams(LstmParams::zeros(m, cfg.hidden_size))
                             : ModelParams(RnnParams::zeros(m, cfg.hidden_size));
    const auto& tensors = doc.at("tensors");
    for (auto& t : named_tensors(params)) {
      if (!tensors.contains(t.name)) throw CheckpointError("missing tensor " + t.name);
      const auto& entry = tensors.at(t.name);
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      if (shape != t.shape)
        throw CheckpointError("tensor " + t.name + " shape mismatch: checkpoint dims disagree with declared M/H");
      const auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != t.size) throw CheckpointError("tensor " + t.name + " size mismatch");
      std::copy(data.begin(), data.end(), t.data);
      if (!all_finite({t.data, t.size}))
        throw CheckpointError("tensor " + t.name + " contains non-finite entries");
    }
    result.params = std::move(params);
    result.config = cfg;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  return result;
}

inline void save_checkpoint_file(const std::string& path, const ModelParams& params,
                                 const ModelConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint file " + path);
  save_checkpoint(out, params, cfg);
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint file " + path);
  return load_checkpoint(in);
}

}  // namespace dkt
