#pragma once

// The similarity (SIM) triplet objective with in-batch negatives and
// relatedness positives, the MLM masking objective, and the batch samplers.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ontosim/autodiff.hpp"
#include "ontosim/corpus.hpp"
#include "ontosim/tokenizer.hpp"

namespace ontosim {

// One anchor/positive pair per concept; concept ids are distinct in a batch.
// Embedding index convention: entry i owns rows 2i (anchor) and 2i+1 (positive).
struct SimEntry {
  std::string concept_id;
  std::string anchor;
  std::string positive;
};

struct SimBatch {
  std::vector<SimEntry> entries;
  size_t size() const { return entries.size(); }
};

enum class TripletKind { same_concept, related };

struct Triplet {
  size_t anchor;
  size_t positive;
  size_t negative;
  TripletKind kind;
  bool operator==(const Triplet& o) const {
    return anchor == o.anchor && positive == o.positive && negative == o.negative &&
           kind == o.kind;
  }
};

struct TripletSet {
  std::vector<Triplet> triplets;
  size_t size() const { return triplets.size(); }
};

struct SimLossConfig {
  double margin = 1.0;  // euclidean distance margin
};

struct MaskedBatch {
  std::vector<int> input_ids;          // corrupted sequence
  std::vector<int> labels;             // original id at masked positions, -1 elsewhere
  std::vector<size_t> mask_positions;  // ascending
};

// Same-concept triplets: both role assignments of a concept's pair against
// every definition of every other batch concept (4(n-1) per concept).
// Related triplets: for each in-batch related pair, both directions and all
// four anchor/positive combinations against the definitions of concepts
// unrelated to both endpoints.
TripletSet enumerate_triplets(const SimBatch& batch, const RelationSet& relations);

template <typename S>
struct SimLossResult {
  ad::Tensor<S> loss;           // scalar, mean over triplets
  std::vector<S> per_triplet;   // relu margins, one per triplet
};

// relu(||e_a - e_p|| - ||e_a - e_n|| + margin), averaged over the triplet set.
template <typename S>
SimLossResult<S> sim_loss(const ad::Tensor<S>& embeddings, const TripletSet& triplets,
                          const SimLossConfig& config) {
  if (config.margin <= 0.0) throw UsageError("sim_loss: margin must be positive");
  if (triplets.triplets.empty()) {
    throw DataError("sim_loss: empty triplet set (batch must hold at least two concepts)");
  }
  std::vector<size_t> anchors, positives, negatives;
  anchors.reserve(triplets.size());
  positives.reserve(triplets.size());
  negatives.reserve(triplets.size());
  for (const auto& t : triplets.triplets) {
    anchors.push_back(t.anchor);
    positives.push_back(t.positive);
    negatives.push_back(t.negative);
  }
  auto d_ap = ad::euclidean_distance_pairs(embeddings, anchors, positives);
  auto d_an = ad::euclidean_distance_pairs(embeddings, anchors, negatives);
  auto per = ad::relu(ad::add_scalar(ad::sub(d_ap, d_an), static_cast<S>(config.margin)));
  SimLossResult<S> out;
  out.per_triplet = per.values();
  out.loss = ad::mean_all(per);
  return out;
}

// Each non-special position is selected independently with probability p; of
// the selected positions 80% become [MASK], 10% a uniform random vocabulary
// id, 10% stay unchanged.
MaskedBatch mask_tokens(const std::vector<int>& ids, double p, std::mt19937_64& rng,
                        const TokenizerModel& tokenizer);

// Mean cross-entropy over the masked positions only.
template <typename S>
ad::Tensor<S> mlm_loss(const ad::Tensor<S>& logits, const MaskedBatch& masked) {
  if (masked.mask_positions.empty()) {
    throw DataError("mlm_loss: batch has no masked positions; resample");
  }
  std::vector<size_t> labels;
  labels.reserve(masked.mask_positions.size());
  for (size_t pos : masked.mask_positions) {
    labels.push_back(static_cast<size_t>(masked.labels[pos]));
  }
  return ad::cross_entropy_rows(ad::gather_rows(logits, masked.mask_positions), labels);
}

// Pooled variant: cross-entropy over all masked positions of a batch, so
// sequences with more masks weigh proportionally.
template <typename S>
ad::Tensor<S> mlm_loss_batch(const std::vector<ad::Tensor<S>>& logits_per_seq,
                             const std::vector<MaskedBatch>& masked) {
  if (logits_per_seq.size() != masked.size()) {
    throw DataError("mlm_loss_batch: logits/mask count mismatch");
  }
  std::vector<ad::Tensor<S>> gathered;
  std::vector<size_t> labels;
  for (size_t s = 0; s < masked.size(); ++s) {
    if (masked[s].mask_positions.empty()) continue;
    gathered.push_back(ad::gather_rows(logits_per_seq[s], masked[s].mask_positions));
    for (size_t pos : masked[s].mask_positions) {
      labels.push_back(static_cast<size_t>(masked[s].labels[pos]));
    }
  }
  if (gathered.empty()) {
    throw DataError("mlm_loss: batch has no masked positions; resample");
  }
  return ad::cross_entropy_rows(ad::concat_rows(gathered), labels);
}

// Concepts eligible for SIM sampling (at least two definitions), sorted by id.
struct SimDataset {
  std::vector<std::string> concept_ids;
  std::vector<std::vector<std::string>> definitions;  // parallel to concept_ids
  size_t size() const { return concept_ids.size(); }
};

SimDataset make_sim_dataset(const std::vector<Concept>& concepts,
                            const std::vector<Definition>& definitions);

// Seed concept drawn uniformly, then breadth-first expansion over the
// relation graph up to ceil(n/2) concepts; the remainder fills uniformly
// without replacement. Two distinct definitions per concept.
SimBatch sample_sim_batch(const SimDataset& dataset, const RelationSet& relations, size_t n,
                          std::mt19937_64& rng);

// Mixes definition and sentence sources with probability
// mix_def / (mix_def + mix_sent) per slot (1:3 by default).
std::vector<std::string> sample_mlm_batch(const std::vector<std::string>& sentences,
                                          const std::vector<std::string>& definitions,
                                          size_t batch_size, std::mt19937_64& rng,
                                          int mix_def = 1, int mix_sent = 3);

}  // namespace ontosim
