#include "ontosim/probes.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ontosim/errors.hpp"
#include "ontosim/objectives.hpp"

namespace ontosim {

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

DefinitionEmbeddings embed_definitions(const Checkpoint& checkpoint, const Corpus& corpus) {
  auto dataset = make_sim_dataset(corpus.concepts, corpus.definitions);
  if (dataset.size() == 0) {
    throw DataError("no concepts with two or more definitions to embed");
  }
  auto encoder = checkpoint.restore_encoder();
  const auto& tokenizer = checkpoint.tokenizer;

  DefinitionEmbeddings out;
  ad::NoGradGuard guard;
  constexpr size_t kBatch = 32;
  std::vector<std::vector<int>> ids;
  std::vector<std::string> owners;
  auto flush = [&]() {
    if (ids.empty()) return;
    auto outputs = encoder.forward(ids);
    for (size_t i = 0; i < outputs.size(); ++i) {
      const auto& cls = outputs[i].cls.values();
      out.vectors.emplace_back(cls.begin(), cls.end());
      out.concept_of.push_back(owners[i]);
    }
    ids.clear();
    owners.clear();
  };
  for (size_t c = 0; c < dataset.size(); ++c) {
    for (const auto& text : dataset.definitions[c]) {
      ids.push_back(tokenizer.encode(text));
      owners.push_back(dataset.concept_ids[c]);
      if (ids.size() >= kBatch) flush();
    }
  }
  flush();
  return out;
}

GeometryReport corpus_geometry_report(const Checkpoint& checkpoint, const Corpus& corpus) {
  auto embedded = embed_definitions(checkpoint, corpus);
  return embedding_geometry_report(embedded.vectors, embedded.concept_of, corpus.relations);
}

MetricReport intrinsic_metric_report(const Checkpoint& checkpoint, const Corpus& corpus) {
  auto embedded = embed_definitions(checkpoint, corpus);
  size_t n = embedded.vectors.size();

  std::vector<std::string> concept_ids;
  std::map<std::string, size_t> concept_index;
  std::map<std::string, std::vector<size_t>> members;
  for (size_t i = 0; i < n; ++i) {
    const std::string& c = embedded.concept_of[i];
    if (concept_index.emplace(c, concept_ids.size()).second) concept_ids.push_back(c);
    members[c].push_back(i);
  }
  size_t n_concepts = concept_ids.size();
  if (n_concepts < 2) {
    throw DataError("intrinsic metrics need at least two embedded concepts");
  }

  // Task 1: definition retrieval. Each definition queries all others.
  double retrieval_sum = 0.0;
  long retrieval_n = 0;
  for (size_t q = 0; q < n; ++q) {
    std::vector<double> scores;
    std::vector<int> relevance;
    for (size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      scores.push_back(-euclidean(embedded.vectors[q], embedded.vectors[j]));
      relevance.push_back(embedded.concept_of[j] == embedded.concept_of[q] ? 1 : 0);
    }
    retrieval_sum += ndcg(scores, relevance);
    ++retrieval_n;
  }

  // Task 2: nearest-centroid classification, leave-one-out.
  size_t dim = embedded.vectors[0].size();
  std::map<std::string, std::vector<double>> sums;
  for (size_t i = 0; i < n; ++i) {
    auto& s = sums[embedded.concept_of[i]];
    if (s.empty()) s.assign(dim, 0.0);
    for (size_t k = 0; k < dim; ++k) s[k] += embedded.vectors[i][k];
  }
  std::vector<std::vector<int>> pred_matrix, gold_matrix;
  for (size_t q = 0; q < n; ++q) {
    double best = std::numeric_limits<double>::infinity();
    size_t best_concept = 0;
    for (size_t ci = 0; ci < n_concepts; ++ci) {
      const std::string& c = concept_ids[ci];
      double count = static_cast<double>(members[c].size());
      std::vector<double> centroid(dim);
      bool own = c == embedded.concept_of[q];
      double denom = own ? count - 1.0 : count;
      for (size_t k = 0; k < dim; ++k) {
        double s = sums[c][k] - (own ? embedded.vectors[q][k] : 0.0);
        centroid[k] = s / denom;
      }
      double d = euclidean(embedded.vectors[q], centroid);
      if (d < best) {
        best = d;
        best_concept = ci;
      }
    }
    std::vector<int> pred_row(n_concepts, 0), gold_row(n_concepts, 0);
    pred_row[best_concept] = 1;
    gold_row[concept_index[embedded.concept_of[q]]] = 1;
    pred_matrix.push_back(std::move(pred_row));
    gold_matrix.push_back(std::move(gold_row));
  }
  auto f1 = f1_multilabel(pred_matrix, gold_matrix);

  std::map<std::string, std::map<std::string, double>> tasks;
  tasks["definition_retrieval"] = {{"ndcg", retrieval_sum / retrieval_n}};
  tasks["concept_classification"] = {{"macro_f1", f1.macro}, {"micro_f1", f1.micro}};

  // Task 3: related-concept ranking by centroid distance (needs relations).
  std::vector<std::vector<double>> centroids(n_concepts, std::vector<double>(dim, 0.0));
  for (size_t ci = 0; ci < n_concepts; ++ci) {
    const auto& m = members[concept_ids[ci]];
    for (size_t i : m) {
      for (size_t k = 0; k < dim; ++k) centroids[ci][k] += embedded.vectors[i][k];
    }
    for (size_t k = 0; k < dim; ++k) centroids[ci][k] /= static_cast<double>(m.size());
  }
  double ranking_sum = 0.0;
  long ranking_n = 0;
  for (size_t ci = 0; ci < n_concepts; ++ci) {
    std::vector<double> scores;
    std::vector<int> relevance;
    bool any_related = false;
    for (size_t cj = 0; cj < n_concepts; ++cj) {
      if (ci == cj) continue;
      scores.push_back(-euclidean(centroids[ci], centroids[cj]));
      bool related = corpus.relations.contains(concept_ids[ci], concept_ids[cj]);
      relevance.push_back(related ? 1 : 0);
      any_related = any_related || related;
    }
    if (!any_related) continue;
    ranking_sum += ndcg(scores, relevance);
    ++ranking_n;
  }
  if (ranking_n > 0) {
    tasks["related_ranking"] = {{"ndcg", ranking_sum / ranking_n}};
  }

  return benchmark_aggregate(tasks);
}

}  // namespace ontosim
