#include "ontosim/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "ontosim/errors.hpp"
#include "ontosim/jsonl.hpp"

namespace ontosim {

namespace {

constexpr char kMagic[8] = {'O', 'S', 'I', 'M', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a_bytes(const char* data, size_t len, uint64_t h = 1469598103934665603ull) {
  for (size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

json train_config_to_json(const TrainConfig& cfg) {
  json j = {{"strategy", to_string(cfg.strategy)},
            {"steps", cfg.steps},
            {"sim_batch_size", cfg.sim_batch_size},
            {"mlm_batch_size", cfg.mlm_batch_size},
            {"learning_rate", cfg.learning_rate},
            {"mlm_mask_prob", cfg.mlm_mask_prob},
            {"sim_margin", cfg.sim_margin},
            {"mix_def", cfg.mix_def},
            {"mix_sent", cfg.mix_sent},
            {"warmup_frac", cfg.warmup_frac},
            {"seed", cfg.seed},
            {"checkpoint_every", cfg.checkpoint_every},
            {"use_relations", cfg.use_relations}};
  if (cfg.weight_decay.has_value()) j["weight_decay"] = *cfg.weight_decay;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  cfg.steps = j.at("steps").get<int>();
  cfg.sim_batch_size = j.at("sim_batch_size").get<int>();
  cfg.mlm_batch_size = j.at("mlm_batch_size").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.mlm_mask_prob = j.at("mlm_mask_prob").get<double>();
  cfg.sim_margin = j.at("sim_margin").get<double>();
  cfg.mix_def = j.at("mix_def").get<int>();
  cfg.mix_sent = j.at("mix_sent").get<int>();
  cfg.warmup_frac = j.at("warmup_frac").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
  cfg.use_relations = j.at("use_relations").get<bool>();
  if (j.contains("weight_decay")) cfg.weight_decay = j.at("weight_decay").get<double>();
  return cfg;
}

json encoder_config_to_json(const EncoderConfig& cfg) {
  return json{{"vocab_size", cfg.vocab_size}, {"d_model", cfg.d_model},
              {"n_layers", cfg.n_layers},     {"n_heads", cfg.n_heads},
              {"d_ff", cfg.d_ff},             {"max_len", cfg.max_len},
              {"dropout", cfg.dropout}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  return cfg;
}

void append_floats(std::string& out, const std::vector<float>& v) {
  size_t old = out.size();
  out.resize(old + v.size() * sizeof(float));
  std::memcpy(out.data() + old, v.data(), v.size() * sizeof(float));
}

std::vector<float> take_floats(const std::string& data, size_t& cursor, size_t count) {
  if (cursor + count * sizeof(float) > data.size()) {
    throw DataError("checkpoint truncated: float payload out of bounds");
  }
  std::vector<float> v(count);
  std::memcpy(v.data(), data.data() + cursor, count * sizeof(float));
  cursor += count * sizeof(float);
  return v;
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::mlm: return "mlm";
    case Strategy::sim: return "sim";
    case Strategy::combined: return "combined";
  }
  return "combined";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "mlm") return Strategy::mlm;
  if (s == "sim") return Strategy::sim;
  if (s == "combined") return Strategy::combined;
  throw UsageError("unknown strategy: " + s + " (expected mlm, sim, or combined)");
}

void TrainConfig::validate() const {
  if (steps <= 0) throw UsageError("train config: steps must be positive");
  if (sim_batch_size < 2) throw UsageError("train config: sim_batch_size must be at least 2");
  if (mlm_batch_size < 1) throw UsageError("train config: mlm_batch_size must be at least 1");
  if (learning_rate <= 0) throw UsageError("train config: learning_rate must be positive");
  if (weight_decay.has_value() && *weight_decay < 0) {
    throw UsageError("train config: weight_decay must be non-negative");
  }
  if (mlm_mask_prob < 0 || mlm_mask_prob > 1) {
    throw UsageError("train config: mlm_mask_prob must lie in [0, 1]");
  }
  if (sim_margin <= 0) throw UsageError("train config: sim_margin must be positive");
  if (mix_def < 0 || mix_sent < 0 || mix_def + mix_sent == 0) {
    throw UsageError("train config: invalid mix ratio");
  }
  if (warmup_frac < 0 || warmup_frac > 1) {
    throw UsageError("train config: warmup_frac must lie in [0, 1]");
  }
}

double TrainConfig::effective_weight_decay() const {
  if (weight_decay.has_value()) return *weight_decay;
  return strategy == Strategy::sim ? 0.0 : 1e-2;  // per-strategy regime
}

Encoder<float> Checkpoint::restore_encoder(uint64_t seed) const {
  Encoder<float> enc = Encoder<float>::init(encoder_config, seed);
  for (auto& [name, tensor] : enc.named_parameters()) {
    auto it = parameters.find(name);
    if (it == parameters.end()) {
      throw DataError("checkpoint missing parameter: " + name);
    }
    if (it->second.size() != tensor.numel()) {
      throw DataError("checkpoint parameter size mismatch: " + name);
    }
    tensor.values() = it->second;
  }
  return enc;
}

Checkpoint snapshot(const Encoder<float>& encoder, const TokenizerModel& tokenizer,
                    const AdamState& optimizer, long step, const TrainConfig& config) {
  Checkpoint ckpt;
  ckpt.encoder_config = encoder.cfg;
  ckpt.tokenizer = tokenizer;
  for (const auto& [name, tensor] : encoder.named_parameters()) {
    ckpt.parameters[name] = tensor.values();
  }
  ckpt.optimizer = optimizer;
  ckpt.has_optimizer = true;
  ckpt.step = step;
  ckpt.train_config = config;
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json meta;
  meta["encoder_config"] = encoder_config_to_json(ckpt.encoder_config);
  meta["tokenizer"] = {{"id_to_token", ckpt.tokenizer.id_to_token},
                       {"max_len", ckpt.tokenizer.max_len}};
  meta["step"] = ckpt.step;
  meta["train_config"] = train_config_to_json(ckpt.train_config);
  meta["has_optimizer"] = ckpt.has_optimizer;
  meta["adam"] = {{"beta1", ckpt.optimizer.beta1},
                  {"beta2", ckpt.optimizer.beta2},
                  {"eps", ckpt.optimizer.eps},
                  {"t", ckpt.optimizer.t}};
  json params = json::array();
  for (const auto& [name, values] : ckpt.parameters) {
    params.push_back(json{{"name", name}, {"count", values.size()}});
  }
  meta["params"] = params;

  std::string payload;
  std::string meta_str = meta.dump();
  uint64_t meta_len = meta_str.size();
  payload.append(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  payload += meta_str;
  for (const auto& [name, values] : ckpt.parameters) {
    (void)name;
    append_floats(payload, values);
  }
  if (ckpt.has_optimizer) {
    for (const auto& [name, values] : ckpt.parameters) {
      auto get = [&](const std::map<std::string, std::vector<float>>& state) {
        auto it = state.find(name);
        return it != state.end() ? it->second : std::vector<float>(values.size(), 0.0f);
      };
      append_floats(payload, get(ckpt.optimizer.m));
      append_floats(payload, get(ckpt.optimizer.v));
    }
  }

  std::string file;
  file.append(kMagic, sizeof(kMagic));
  uint32_t version = kVersion;
  file.append(reinterpret_cast<const char*>(&version), sizeof(version));
  uint64_t checksum = fnv1a_bytes(payload.data(), payload.size());
  file.append(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  file += payload;
  write_file_atomic(path, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string file = read_file(path);
  size_t header = sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t);
  if (file.size() < header) {
    throw DataError("checkpoint truncated: " + path.string());
  }
  if (std::memcmp(file.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path.string());
  }
  uint32_t version = 0;
  std::memcpy(&version, file.data() + sizeof(kMagic), sizeof(version));
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  uint64_t stored_checksum = 0;
  std::memcpy(&stored_checksum, file.data() + sizeof(kMagic) + sizeof(version),
              sizeof(stored_checksum));
  std::string payload = file.substr(header);
  if (fnv1a_bytes(payload.data(), payload.size()) != stored_checksum) {
    throw DataError("checkpoint corrupt (checksum mismatch): " + path.string());
  }

  size_t cursor = 0;
  if (payload.size() < sizeof(uint64_t)) throw DataError("checkpoint truncated");
  uint64_t meta_len = 0;
  std::memcpy(&meta_len, payload.data(), sizeof(meta_len));
  cursor += sizeof(meta_len);
  if (cursor + meta_len > payload.size()) throw DataError("checkpoint truncated");
  json meta = json::parse(payload.substr(cursor, meta_len), nullptr, false);
  if (meta.is_discarded()) throw DataError("checkpoint metadata unreadable");
  cursor += meta_len;

  Checkpoint ckpt;
  ckpt.encoder_config = encoder_config_from_json(meta.at("encoder_config"));
  ckpt.tokenizer.id_to_token =
      meta.at("tokenizer").at("id_to_token").get<std::vector<std::string>>();
  ckpt.tokenizer.max_len = meta.at("tokenizer").at("max_len").get<int>();
  for (size_t i = 0; i < ckpt.tokenizer.id_to_token.size(); ++i) {
    ckpt.tokenizer.vocab[ckpt.tokenizer.id_to_token[i]] = static_cast<int>(i);
  }
  ckpt.step = meta.at("step").get<long>();
  ckpt.train_config = train_config_from_json(meta.at("train_config"));
  ckpt.has_optimizer = meta.at("has_optimizer").get<bool>();
  ckpt.optimizer.beta1 = meta.at("adam").at("beta1").get<double>();
  ckpt.optimizer.beta2 = meta.at("adam").at("beta2").get<double>();
  ckpt.optimizer.eps = meta.at("adam").at("eps").get<double>();
  ckpt.optimizer.t = meta.at("adam").at("t").get<long>();

  for (const auto& p : meta.at("params")) {
    std::string name = p.at("name").get<std::string>();
    size_t count = p.at("count").get<size_t>();
    ckpt.parameters[name] = take_floats(payload, cursor, count);
  }
  if (ckpt.has_optimizer) {
    for (const auto& p : meta.at("params")) {
      std::string name = p.at("name").get<std::string>();
      size_t count = p.at("count").get<size_t>();
      ckpt.optimizer.m[name] = take_floats(payload, cursor, count);
      ckpt.optimizer.v[name] = take_floats(payload, cursor, count);
    }
  }
  return ckpt;
}

}  // namespace ontosim
