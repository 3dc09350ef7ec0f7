#include "ontosim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "ontosim/errors.hpp"
#include "ontosim/jsonl.hpp"

namespace ontosim {

void TrainingCurve::to_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "step,sim_loss,mlm_loss,violation_rate,seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.3f\n", r.step, r.sim_loss,
                  r.mlm_loss, r.violation_rate, r.seconds);
    out << buf;
  }
  write_file_atomic(path, out.str());
}

void optimizer_step(std::vector<std::pair<std::string, ad::Tensor<float>>> params,
                    AdamState& state, double learning_rate, double weight_decay) {
  ++state.t;
  double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (auto& [name, tensor] : params) {
    auto& values = tensor.values();
    auto& grad = tensor.grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != values.size()) m.assign(values.size(), 0.0f);
    if (v.size() != values.size()) v.assign(values.size(), 0.0f);
    for (size_t i = 0; i < values.size(); ++i) {
      double g = grad[i];
      if (!std::isfinite(g)) {
        throw DataError("non-finite gradient in parameter " + name);
      }
      double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      double m_hat = mi / bias1;
      double v_hat = vi / bias2;
      double update = learning_rate * (m_hat / (std::sqrt(v_hat) + state.eps) +
                                       weight_decay * values[i]);
      values[i] = static_cast<float>(values[i] - update);
    }
    std::fill(grad.begin(), grad.end(), 0.0f);
  }
}

TrainData make_train_data(const Corpus& corpus) {
  TrainData data;
  for (const auto& a : corpus.abstracts) {
    for (const auto& s : a.sentences) data.sentences.push_back(s);
  }
  for (const auto& d : corpus.definitions) data.definition_texts.push_back(d.text);
  data.sim = make_sim_dataset(corpus.concepts, corpus.definitions);
  data.relations = corpus.relations;
  return data;
}

Trainer::Trainer(Encoder<float>& encoder, const TokenizerModel& tokenizer, const TrainData& data,
                 TrainConfig config)
    : encoder_(encoder),
      tokenizer_(tokenizer),
      data_(data),
      cfg_(std::move(config)),
      rng_(cfg_.seed),
      started_(std::chrono::steady_clock::now()) {
  cfg_.validate();
  if (cfg_.use_relations) active_relations_ = data.relations;

  bool needs_sim = cfg_.strategy == Strategy::sim || cfg_.strategy == Strategy::combined;
  bool needs_mlm = cfg_.strategy == Strategy::mlm || cfg_.strategy == Strategy::combined;
  if (needs_sim && data_.sim.size() < static_cast<size_t>(cfg_.sim_batch_size)) {
    throw DataError("SIM pretraining needs at least " + std::to_string(cfg_.sim_batch_size) +
                    " concepts with two or more definitions; corpus has " +
                    std::to_string(data_.sim.size()));
  }
  if (needs_mlm && data_.sentences.empty() && data_.definition_texts.empty()) {
    throw DataError("MLM pretraining needs sentences or definitions; corpus has neither");
  }
}

double Trainer::scheduled_lr(long step) const {
  long warmup = static_cast<long>(cfg_.warmup_frac * static_cast<double>(cfg_.steps));
  if (warmup <= 0) return cfg_.learning_rate;
  double factor = std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup));
  return cfg_.learning_rate * factor;
}

StepResult Trainer::sim_pass() {
  auto batch = sample_sim_batch(data_.sim, active_relations_,
                                static_cast<size_t>(cfg_.sim_batch_size), rng_);
  std::vector<std::vector<int>> ids;
  ids.reserve(2 * batch.size());
  for (const auto& e : batch.entries) {
    ids.push_back(tokenizer_.encode(e.anchor));
    ids.push_back(tokenizer_.encode(e.positive));
  }
  Encoder<float>::ForwardOptions opts;
  opts.train = true;
  opts.rng = &rng_;
  auto outs = encoder_.forward(ids, opts);
  auto cls = Encoder<float>::cls_matrix(outs);
  auto triplets = enumerate_triplets(batch, active_relations_);
  SimLossConfig loss_cfg;
  loss_cfg.margin = cfg_.sim_margin;
  auto result = sim_loss(cls, triplets, loss_cfg);
  result.loss.backward();
  ++backward_passes_;

  StepResult out;
  out.sim_loss = result.loss.item();
  size_t violations = 0;
  for (float v : result.per_triplet) {
    if (v > 0.0f) ++violations;
  }
  out.violation_rate =
      static_cast<double>(violations) / static_cast<double>(result.per_triplet.size());
  out.backward_passes = 1;
  return out;
}

StepResult Trainer::mlm_pass() {
  // A draw can end with zero masked positions on tiny texts; resample.
  for (int attempt = 0; attempt < 16; ++attempt) {
    auto texts = sample_mlm_batch(data_.sentences, data_.definition_texts,
                                  static_cast<size_t>(cfg_.mlm_batch_size), rng_, cfg_.mix_def,
                                  cfg_.mix_sent);
    std::vector<MaskedBatch> masked;
    std::vector<std::vector<int>> ids;
    size_t total_positions = 0;
    for (const auto& text : texts) {
      auto enc = tokenizer_.encode(text);
      auto mb = mask_tokens(enc, cfg_.mlm_mask_prob, rng_, tokenizer_);
      total_positions += mb.mask_positions.size();
      ids.push_back(mb.input_ids);
      masked.push_back(std::move(mb));
    }
    if (total_positions == 0) continue;

    Encoder<float>::ForwardOptions opts;
    opts.train = true;
    opts.rng = &rng_;
    auto outs = encoder_.forward(ids, opts);
    std::vector<ad::Tensor<float>> logits;
    logits.reserve(outs.size());
    for (const auto& o : outs) logits.push_back(encoder_.mlm_logits(o.token_states));
    auto loss = mlm_loss_batch(logits, masked);
    loss.backward();
    ++backward_passes_;

    StepResult out;
    out.mlm_loss = loss.item();
    out.backward_passes = 1;
    return out;
  }
  throw DataError("MLM sampling produced no maskable tokens after 16 attempts");
}

StepResult Trainer::accumulate_gradients() {
  StepResult out;
  switch (cfg_.strategy) {
    case Strategy::sim:
      out = sim_pass();
      break;
    case Strategy::mlm:
      out = mlm_pass();
      break;
    case Strategy::combined: {
      StepResult sim = sim_pass();
      StepResult mlm = mlm_pass();
      out.sim_loss = sim.sim_loss;
      out.violation_rate = sim.violation_rate;
      out.mlm_loss = mlm.mlm_loss;
      out.backward_passes = sim.backward_passes + mlm.backward_passes;
      break;
    }
  }
  return out;
}

void Trainer::apply_update() {
  optimizer_step(encoder_.named_parameters(), adam_, scheduled_lr(step_),
                 cfg_.effective_weight_decay());
  ++updates_;
  ++step_;
}

StepResult Trainer::step() {
  StepResult result = accumulate_gradients();
  apply_update();
  CurveRow row;
  row.step = step_;
  row.sim_loss = result.sim_loss;
  row.mlm_loss = result.mlm_loss;
  row.violation_rate = result.violation_rate;
  row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  curve_.rows.push_back(row);
  return result;
}

Checkpoint Trainer::run(const std::filesystem::path* checkpoint_dir) {
  long target = step_ + cfg_.steps;
  while (step_ < target) {
    step();
    if (checkpoint_dir != nullptr && cfg_.checkpoint_every > 0 &&
        step_ % cfg_.checkpoint_every == 0 && step_ < target) {
      auto ckpt = snapshot(encoder_, tokenizer_, adam_, step_, cfg_);
      save_checkpoint(ckpt, *checkpoint_dir / ("checkpoint-" + std::to_string(step_) + ".bin"));
    }
  }
  return snapshot(encoder_, tokenizer_, adam_, step_, cfg_);
}

TrainResult train(Encoder<float>& encoder, const TokenizerModel& tokenizer,
                  const TrainData& data, const TrainConfig& config,
                  const std::filesystem::path* checkpoint_dir, long start_step) {
  Trainer trainer(encoder, tokenizer, data, config);
  trainer.set_step(start_step);
  TrainResult result;
  result.checkpoint = trainer.run(checkpoint_dir);
  result.curve = trainer.curve();
  result.updates = trainer.total_updates();
  result.backward_passes = trainer.total_backward_passes();
  return result;
}

// --- fine-tuning ---------------------------------------------------------------

namespace {

ad::Tensor<float> init_head(size_t d, size_t n_classes, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.02);
  std::vector<float> w(d * n_classes);
  for (auto& x : w) x = static_cast<float>(normal(rng));
  auto t = ad::Tensor<float>::from_values({d, n_classes}, std::move(w), true);
  t.set_name("head_w");
  return t;
}

std::vector<std::pair<std::string, ad::Tensor<float>>> with_head(
    const Encoder<float>& enc, const ad::Tensor<float>& w, const ad::Tensor<float>& b) {
  auto params = enc.named_parameters();
  params.emplace_back("head_w", w);
  params.emplace_back("head_b", b);
  return params;
}

}  // namespace

std::vector<std::vector<float>> ClassifierModel::predict_scores(
    const std::vector<std::string>& texts) const {
  ad::NoGradGuard guard;
  std::vector<std::vector<int>> ids;
  ids.reserve(texts.size());
  for (const auto& t : texts) ids.push_back(tokenizer.encode(t));
  auto outs = encoder.forward(ids);
  auto cls = Encoder<float>::cls_matrix(outs);
  auto logits = ad::add_rowvec(ad::matmul(cls, head_w), head_b);
  size_t n_classes = logits.cols();
  std::vector<std::vector<float>> scores(texts.size(), std::vector<float>(n_classes));
  for (size_t i = 0; i < texts.size(); ++i) {
    for (size_t c = 0; c < n_classes; ++c) {
      float l = logits.values()[i * n_classes + c];
      scores[i][c] = multi_label ? 1.0f / (1.0f + std::exp(-l)) : l;
    }
  }
  return scores;
}

std::vector<size_t> ClassifierModel::predict(const std::vector<std::string>& texts) const {
  auto scores = predict_scores(texts);
  std::vector<size_t> out;
  out.reserve(scores.size());
  for (const auto& row : scores) {
    out.push_back(static_cast<size_t>(
        std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

ClassifierModel fine_tune_classifier(const Checkpoint& checkpoint,
                                     const std::vector<ClassifierExample>& examples,
                                     size_t n_classes, bool multi_label,
                                     const std::vector<float>& class_weights,
                                     const FineTuneOptions& options) {
  if (examples.empty()) throw DataError("fine_tune_classifier: empty training set");
  if (class_weights.size() != n_classes) {
    throw DataError("fine_tune_classifier: one weight per class required");
  }
  for (float w : class_weights) {
    if (w < 0) throw DataError("fine_tune_classifier: weights must be non-negative");
  }
  for (const auto& ex : examples) {
    if (!multi_label && ex.classes.size() != 1) {
      throw DataError("fine_tune_classifier: single-label examples need exactly one class");
    }
    for (size_t c : ex.classes) {
      if (c >= n_classes) throw DataError("fine_tune_classifier: label out of range");
    }
  }

  ClassifierModel model;
  model.encoder = checkpoint.restore_encoder();
  model.tokenizer = checkpoint.tokenizer;
  model.multi_label = multi_label;
  std::mt19937_64 rng(options.seed);
  size_t d = static_cast<size_t>(model.encoder.cfg.d_model);
  model.head_w = init_head(d, n_classes, rng);
  model.head_b = ad::Tensor<float>::zeros({n_classes}, true);
  model.head_b.set_name("head_b");

  AdamState adam;
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  size_t cursor = 0;

  for (int step = 0; step < options.steps; ++step) {
    if (cursor == 0) std::shuffle(order.begin(), order.end(), rng);
    std::vector<size_t> batch_idx;
    for (int b = 0; b < options.batch_size; ++b) {
      batch_idx.push_back(order[cursor]);
      cursor = (cursor + 1) % order.size();
    }
    std::vector<std::vector<int>> ids;
    for (size_t i : batch_idx) ids.push_back(model.tokenizer.encode(examples[i].text));

    Encoder<float>::ForwardOptions fwd;
    fwd.train = true;
    fwd.rng = &rng;
    auto outs = model.encoder.forward(ids, fwd);
    auto cls = Encoder<float>::cls_matrix(outs);
    auto logits = ad::add_rowvec(ad::matmul(cls, model.head_w), model.head_b);

    ad::Tensor<float> loss;
    if (multi_label) {
      std::vector<float> targets(batch_idx.size() * n_classes, 0.0f);
      for (size_t r = 0; r < batch_idx.size(); ++r) {
        for (size_t c : examples[batch_idx[r]].classes) targets[r * n_classes + c] = 1.0f;
      }
      loss = ad::bce_with_logits(logits, targets, class_weights);
    } else {
      std::vector<size_t> labels;
      for (size_t i : batch_idx) labels.push_back(examples[i].classes[0]);
      loss = ad::weighted_cross_entropy_rows(logits, labels, class_weights);
    }
    loss.backward();
    optimizer_step(with_head(model.encoder, model.head_w, model.head_b), adam,
                   options.learning_rate, 0.0);
  }

  // Degenerate-state detection: identical predictions across the training set.
  std::vector<std::string> texts;
  for (const auto& ex : examples) texts.push_back(ex.text);
  auto preds = model.predict(texts);
  model.degenerate_warning =
      preds.size() > 1 && std::set<size_t>(preds.begin(), preds.end()).size() == 1;
  if (model.degenerate_warning) {
    std::cerr << "[ontosim] warning: classifier predicts a single class for every "
                 "training sample (degenerate state)\n";
  }
  return model;
}

std::vector<std::vector<float>> TaggerModel::predict_scores(
    const std::vector<std::string>& tokens) const {
  ad::NoGradGuard guard;
  std::vector<int> ids;
  ids.push_back(TokenizerModel::kCls);
  for (const auto& t : tokens) {
    auto it = tokenizer.vocab.find(t);
    ids.push_back(it == tokenizer.vocab.end() ? TokenizerModel::kUnk : it->second);
  }
  ids.push_back(TokenizerModel::kSep);
  auto outs = encoder.forward({ids});
  auto states = ad::slice_rows(outs[0].token_states, 1, tokens.size());
  auto logits = ad::add_rowvec(ad::matmul(states, head_w), head_b);
  size_t n_classes = logits.cols();
  std::vector<std::vector<float>> scores(tokens.size(), std::vector<float>(n_classes));
  for (size_t i = 0; i < tokens.size(); ++i) {
    for (size_t c = 0; c < n_classes; ++c) {
      scores[i][c] = 1.0f / (1.0f + std::exp(-logits.values()[i * n_classes + c]));
    }
  }
  return scores;
}

TaggerModel fine_tune_token_tagger(const Checkpoint& checkpoint,
                                   const std::vector<TaggerExample>& examples, size_t n_classes,
                                   const std::vector<float>& class_weights,
                                   const FineTuneOptions& options) {
  if (examples.empty()) throw DataError("fine_tune_token_tagger: empty training set");
  if (class_weights.size() != n_classes) {
    throw DataError("fine_tune_token_tagger: one weight per class required");
  }
  for (const auto& ex : examples) {
    if (ex.tokens.size() != ex.token_classes.size()) {
      throw DataError("fine_tune_token_tagger: token/label length mismatch (" +
                      std::to_string(ex.tokens.size()) + " tokens vs " +
                      std::to_string(ex.token_classes.size()) + " label rows)");
    }
    for (const auto& classes : ex.token_classes) {
      for (size_t c : classes) {
        if (c >= n_classes) throw DataError("fine_tune_token_tagger: label out of range");
      }
    }
  }

  TaggerModel model;
  model.encoder = checkpoint.restore_encoder();
  model.tokenizer = checkpoint.tokenizer;
  std::mt19937_64 rng(options.seed);
  size_t d = static_cast<size_t>(model.encoder.cfg.d_model);
  model.head_w = init_head(d, n_classes, rng);
  model.head_b = ad::Tensor<float>::zeros({n_classes}, true);
  model.head_b.set_name("head_b");

  AdamState adam;
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  size_t cursor = 0;

  for (int step = 0; step < options.steps; ++step) {
    if (cursor == 0) std::shuffle(order.begin(), order.end(), rng);
    const TaggerExample& ex = examples[order[cursor]];
    cursor = (cursor + 1) % order.size();

    std::vector<int> ids;
    ids.push_back(TokenizerModel::kCls);
    for (const auto& t : ex.tokens) {
      auto it = model.tokenizer.vocab.find(t);
      ids.push_back(it == model.tokenizer.vocab.end() ? TokenizerModel::kUnk : it->second);
    }
    ids.push_back(TokenizerModel::kSep);

    Encoder<float>::ForwardOptions fwd;
    fwd.train = true;
    fwd.rng = &rng;
    auto outs = model.encoder.forward({ids}, fwd);
    auto states = ad::slice_rows(outs[0].token_states, 1, ex.tokens.size());
    auto logits = ad::add_rowvec(ad::matmul(states, model.head_w), model.head_b);

    std::vector<float> targets(ex.tokens.size() * n_classes, 0.0f);
    for (size_t t = 0; t < ex.tokens.size(); ++t) {
      for (size_t c : ex.token_classes[t]) targets[t * n_classes + c] = 1.0f;
    }
    auto loss = ad::bce_with_logits(logits, targets, class_weights);
    loss.backward();
    optimizer_step(with_head(model.encoder, model.head_w, model.head_b), adam,
                   options.learning_rate, 0.0);
  }
  return model;
}

}  // namespace ontosim
