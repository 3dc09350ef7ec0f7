#pragma once

// Training loops for the three pretraining strategies, the AdamW optimizer
// with per-strategy weight decay, fine-tuning heads, and curve logging.

#include <chrono>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ontosim/checkpoint.hpp"
#include "ontosim/corpus.hpp"
#include "ontosim/encoder.hpp"
#include "ontosim/objectives.hpp"

namespace ontosim {

struct CurveRow {
  long step = 0;
  double sim_loss = std::numeric_limits<double>::quiet_NaN();
  double mlm_loss = std::numeric_limits<double>::quiet_NaN();
  double violation_rate = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainingCurve {
  std::vector<CurveRow> rows;
  void to_csv(const std::filesystem::path& path) const;
};

// Decoupled-weight-decay adaptive-moment update over named parameters.
// Gradients are validated (error names the offending parameter) and zeroed
// after the update.
void optimizer_step(std::vector<std::pair<std::string, ad::Tensor<float>>> params,
                    AdamState& state, double learning_rate, double weight_decay);

struct TrainData {
  std::vector<std::string> sentences;
  std::vector<std::string> definition_texts;
  SimDataset sim;
  RelationSet relations;
};

TrainData make_train_data(const Corpus& corpus);

struct StepResult {
  double sim_loss = std::numeric_limits<double>::quiet_NaN();
  double mlm_loss = std::numeric_limits<double>::quiet_NaN();
  double violation_rate = std::numeric_limits<double>::quiet_NaN();
  int backward_passes = 0;
};

// Owns one training run. The dual-pass contract is explicit in the API:
// accumulate_gradients() performs every loss pass of the strategy (two in
// combined mode) and apply_update() performs exactly one optimizer update.
class Trainer {
 public:
  Trainer(Encoder<float>& encoder, const TokenizerModel& tokenizer, const TrainData& data,
          TrainConfig config);

  StepResult accumulate_gradients();
  void apply_update();
  StepResult step();

  Checkpoint run(const std::filesystem::path* checkpoint_dir = nullptr);

  double scheduled_lr(long step) const;
  long current_step() const { return step_; }
  long total_updates() const { return updates_; }
  long total_backward_passes() const { return backward_passes_; }
  const TrainingCurve& curve() const { return curve_; }
  AdamState& optimizer_state() { return adam_; }
  void set_step(long step) { step_ = step; }

 private:
  StepResult sim_pass();
  StepResult mlm_pass();

  Encoder<float>& encoder_;
  const TokenizerModel& tokenizer_;
  const TrainData& data_;
  TrainConfig cfg_;
  RelationSet active_relations_;  // empty when use_relations is off
  AdamState adam_;
  std::mt19937_64 rng_;
  TrainingCurve curve_;
  long step_ = 0;
  long updates_ = 0;
  long backward_passes_ = 0;
  std::chrono::steady_clock::time_point started_;
};

// Convenience wrapper: trains from scratch (or resumes) and returns the final
// checkpoint with the full curve.
struct TrainResult {
  Checkpoint checkpoint;
  TrainingCurve curve;
  long updates = 0;
  long backward_passes = 0;
};

TrainResult train(Encoder<float>& encoder, const TokenizerModel& tokenizer,
                  const TrainData& data, const TrainConfig& config,
                  const std::filesystem::path* checkpoint_dir = nullptr, long start_step = 0);

// --- fine-tuning heads -------------------------------------------------------

struct FineTuneOptions {
  int steps = 500;
  int batch_size = 8;
  double learning_rate = 3e-4;
  uint64_t seed = 7;
};

struct ClassifierExample {
  std::string text;
  std::vector<size_t> classes;  // single-label: exactly one entry
};

struct ClassifierModel {
  Encoder<float> encoder;
  TokenizerModel tokenizer;
  ad::Tensor<float> head_w;  // d_model x n_classes
  ad::Tensor<float> head_b;  // n_classes
  bool multi_label = false;
  bool degenerate_warning = false;  // all training predictions collapsed to one class

  std::vector<std::vector<float>> predict_scores(const std::vector<std::string>& texts) const;
  std::vector<size_t> predict(const std::vector<std::string>& texts) const;
};

// Linear head on the CLS embedding; sigmoid + weighted binary cross-entropy
// for multi-label, softmax + weighted categorical cross-entropy otherwise.
// Encoder weights update jointly with the head.
ClassifierModel fine_tune_classifier(const Checkpoint& checkpoint,
                                     const std::vector<ClassifierExample>& examples,
                                     size_t n_classes, bool multi_label,
                                     const std::vector<float>& class_weights,
                                     const FineTuneOptions& options = {});

struct TaggerExample {
  std::vector<std::string> tokens;
  std::vector<std::vector<size_t>> token_classes;  // positive classes per token
};

struct TaggerModel {
  Encoder<float> encoder;
  TokenizerModel tokenizer;
  ad::Tensor<float> head_w;
  ad::Tensor<float> head_b;

  // seq_len x n_classes sigmoid scores for one token sequence.
  std::vector<std::vector<float>> predict_scores(const std::vector<std::string>& tokens) const;
};

// Per-token linear head with per-class sigmoids and weighted binary
// cross-entropy.
TaggerModel fine_tune_token_tagger(const Checkpoint& checkpoint,
                                   const std::vector<TaggerExample>& examples, size_t n_classes,
                                   const std::vector<float>& class_weights,
                                   const FineTuneOptions& options = {});

}  // namespace ontosim
