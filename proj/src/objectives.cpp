#include "ontosim/objectives.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "ontosim/errors.hpp"

namespace ontosim {

TripletSet enumerate_triplets(const SimBatch& batch, const RelationSet& relations) {
  size_t n = batch.size();
  TripletSet out;
  if (n < 2) return out;

  auto anchor_of = [](size_t i) { return 2 * i; };
  auto positive_of = [](size_t i) { return 2 * i + 1; };

  // (a) same-concept: both role assignments against every other definition.
  for (size_t i = 0; i < n; ++i) {
    for (int swap = 0; swap < 2; ++swap) {
      size_t a = swap == 0 ? anchor_of(i) : positive_of(i);
      size_t p = swap == 0 ? positive_of(i) : anchor_of(i);
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        out.triplets.push_back({a, p, anchor_of(j), TripletKind::same_concept});
        out.triplets.push_back({a, p, positive_of(j), TripletKind::same_concept});
      }
    }
  }

  // (b) related pairs: definitions of the two concepts act as positives for
  // each other; negatives come only from concepts unrelated to both.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (!relations.contains(batch.entries[i].concept_id, batch.entries[j].concept_id)) {
        continue;
      }
      std::vector<size_t> negatives;
      for (size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const std::string& ck = batch.entries[k].concept_id;
        if (relations.contains(ck, batch.entries[i].concept_id)) continue;
        if (relations.contains(ck, batch.entries[j].concept_id)) continue;
        negatives.push_back(anchor_of(k));
        negatives.push_back(positive_of(k));
      }
      if (negatives.empty()) continue;
      const std::pair<size_t, size_t> directions[2] = {{i, j}, {j, i}};
      for (const auto& [src, dst] : directions) {
        for (size_t a : {anchor_of(src), positive_of(src)}) {
          for (size_t p : {anchor_of(dst), positive_of(dst)}) {
            for (size_t neg : negatives) {
              out.triplets.push_back({a, p, neg, TripletKind::related});
            }
          }
        }
      }
    }
  }
  return out;
}

MaskedBatch mask_tokens(const std::vector<int>& ids, double p, std::mt19937_64& rng,
                        const TokenizerModel& tokenizer) {
  if (p < 0.0 || p > 1.0) throw UsageError("mask_tokens: probability must lie in [0, 1]");
  MaskedBatch out;
  out.input_ids = ids;
  out.labels.assign(ids.size(), -1);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<int> random_id(0, tokenizer.vocab_size() - 1);
  for (size_t pos = 0; pos < ids.size(); ++pos) {
    if (tokenizer.is_special(ids[pos])) continue;
    if (uniform(rng) >= p) continue;
    out.labels[pos] = ids[pos];
    out.mask_positions.push_back(pos);
    double roll = uniform(rng);
    if (roll < 0.8) {
      out.input_ids[pos] = TokenizerModel::kMask;
    } else if (roll < 0.9) {
      out.input_ids[pos] = random_id(rng);
    }  // else: keep the original token
  }
  return out;
}

SimDataset make_sim_dataset(const std::vector<Concept>& concepts,
                            const std::vector<Definition>& definitions) {
  std::map<std::string, std::vector<std::string>> defs_by_concept;
  for (const auto& d : definitions) {
    defs_by_concept[d.concept_id].push_back(d.text);
  }
  SimDataset out;
  for (const auto& c : concepts) {
    auto it = defs_by_concept.find(c.id);
    if (it == defs_by_concept.end() || it->second.size() < 2) continue;  // not trainable
    out.concept_ids.push_back(c.id);
    out.definitions.push_back(it->second);
  }
  return out;
}

SimBatch sample_sim_batch(const SimDataset& dataset, const RelationSet& relations, size_t n,
                          std::mt19937_64& rng) {
  if (n < 2) throw UsageError("sample_sim_batch: n must be at least 2");
  if (dataset.size() < n) {
    throw DataError("sample_sim_batch: fewer than " + std::to_string(n) +
                    " concepts with two or more definitions");
  }
  std::map<std::string, size_t> index_of;
  for (size_t i = 0; i < dataset.size(); ++i) index_of[dataset.concept_ids[i]] = i;

  std::uniform_int_distribution<size_t> pick(0, dataset.size() - 1);
  size_t seed = pick(rng);

  // Breadth-first expansion over the relation graph, capped at half the batch.
  size_t related_budget = (n + 1) / 2;
  std::vector<size_t> chosen;
  std::set<size_t> queued;
  std::deque<size_t> frontier;
  frontier.push_back(seed);
  queued.insert(seed);
  while (!frontier.empty() && chosen.size() < related_budget) {
    size_t cur = frontier.front();
    frontier.pop_front();
    chosen.push_back(cur);
    for (const auto& neighbor : relations.neighbors(dataset.concept_ids[cur])) {
      auto it = index_of.find(neighbor);
      if (it == index_of.end()) continue;  // neighbor not eligible
      if (queued.insert(it->second).second) frontier.push_back(it->second);
    }
  }

  // Fill the remainder uniformly without replacement.
  std::set<size_t> chosen_set(chosen.begin(), chosen.end());
  if (chosen.size() < n) {
    std::vector<size_t> rest;
    for (size_t i = 0; i < dataset.size(); ++i) {
      if (chosen_set.count(i) == 0) rest.push_back(i);
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    for (size_t i = 0; chosen.size() < n; ++i) chosen.push_back(rest[i]);
  }

  SimBatch batch;
  for (size_t idx : chosen) {
    const auto& defs = dataset.definitions[idx];
    std::uniform_int_distribution<size_t> first(0, defs.size() - 1);
    std::uniform_int_distribution<size_t> second(0, defs.size() - 2);
    size_t a = first(rng);
    size_t b = second(rng);
    if (b >= a) ++b;
    batch.entries.push_back({dataset.concept_ids[idx], defs[a], defs[b]});
  }
  return batch;
}

std::vector<std::string> sample_mlm_batch(const std::vector<std::string>& sentences,
                                          const std::vector<std::string>& definitions,
                                          size_t batch_size, std::mt19937_64& rng, int mix_def,
                                          int mix_sent) {
  if (sentences.empty() && definitions.empty()) {
    throw DataError("sample_mlm_batch: both text sources are empty");
  }
  if (mix_def < 0 || mix_sent < 0 || mix_def + mix_sent == 0) {
    throw UsageError("sample_mlm_batch: invalid mixing ratio");
  }
  double p_def;
  if (definitions.empty()) {
    p_def = 0.0;
  } else if (sentences.empty()) {
    p_def = 1.0;
  } else {
    p_def = static_cast<double>(mix_def) / static_cast<double>(mix_def + mix_sent);
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::string> out;
  out.reserve(batch_size);
  for (size_t i = 0; i < batch_size; ++i) {
    if (uniform(rng) < p_def) {
      std::uniform_int_distribution<size_t> pick(0, definitions.size() - 1);
      out.push_back(definitions[pick(rng)]);
    } else {
      std::uniform_int_distribution<size_t> pick(0, sentences.size() - 1);
      out.push_back(sentences[pick(rng)]);
    }
  }
  return out;
}

}  // namespace ontosim
