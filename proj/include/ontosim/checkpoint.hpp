#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ontosim/encoder.hpp"
#include "ontosim/tokenizer.hpp"

namespace ontosim {

enum class Strategy { mlm, sim, combined };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct TrainConfig {
  Strategy strategy = Strategy::combined;
  int steps = 1000;
  int sim_batch_size = 16;
  int mlm_batch_size = 16;
  double learning_rate = 3e-4;
  std::optional<double> weight_decay;  // unset: 1e-2 for mlm/combined, 0 for sim
  double mlm_mask_prob = 0.25;
  double sim_margin = 1.0;
  int mix_def = 1;
  int mix_sent = 3;
  double warmup_frac = 0.05;
  uint64_t seed = 42;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  bool use_relations = true; // relatedness triplets + relatedness-aware sampling

  void validate() const;
  double effective_weight_decay() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

struct Checkpoint {
  EncoderConfig encoder_config;
  TokenizerModel tokenizer;
  std::map<std::string, std::vector<float>> parameters;
  AdamState optimizer;
  bool has_optimizer = false;
  long step = 0;
  TrainConfig train_config;

  Encoder<float> restore_encoder(uint64_t seed = 0) const;
};

Checkpoint snapshot(const Encoder<float>& encoder, const TokenizerModel& tokenizer,
                    const AdamState& optimizer, long step, const TrainConfig& config);

// Versioned binary file with a JSON metadata block and raw little-endian
// float payloads; writes are atomic (temp + rename) and guarded by a checksum.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ontosim
