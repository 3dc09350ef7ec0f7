#pragma once

// Metric suite: multi-label F1, token F1, IoU span F1, NDCG, majority voting,
// benchmark aggregation, permutation significance test, and the embedding
// geometry diagnostic. All functions are pure.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontosim/corpus.hpp"

namespace ontosim {

struct Span {
  size_t start = 0;  // inclusive token index
  size_t end = 0;    // exclusive token index
  int class_id = 0;
};

struct F1Pair {
  double macro = 0.0;
  double micro = 0.0;
};

// Binary indicator matrices, samples x classes.
F1Pair f1_multilabel(const std::vector<std::vector<int>>& pred,
                     const std::vector<std::vector<int>>& gold);

// Set-overlap F1 pooled over classes; 1.0 when both sides are empty.
double token_f1(const std::map<int, std::set<size_t>>& pred,
                const std::map<int, std::set<size_t>>& gold);

std::vector<double> default_iou_thresholds();  // 0.1 .. 0.9 step 0.1

// Greedy one-to-one matching in descending IoU order per threshold;
// class labels must agree; the score is the mean F1 over thresholds.
double span_f1(const std::vector<Span>& pred, const std::vector<Span>& gold,
               const std::vector<double>& thresholds = default_iou_thresholds());

// Binary relevance; items sorted by score descending (ties by index).
double ndcg(const std::vector<double>& scores, const std::vector<int>& relevance);

// Most frequent class; ties break toward the lowest class index.
int majority_vote(const std::vector<int>& predictions);

struct TaskMetrics {
  std::map<std::string, double> values;
  double mean = 0.0;
};

struct MetricReport {
  std::map<std::string, TaskMetrics> tasks;
  double benchmark = 0.0;
  nlohmann::json to_json() const;
};

// Unweighted mean per task, then the unweighted mean of task means.
MetricReport benchmark_aggregate(
    const std::map<std::string, std::map<std::string, double>>& task_metrics);

// Two-sided permutation test on |mean(a) - mean(b)| with add-one smoothing.
double permutation_test(const std::vector<double>& results_a,
                        const std::vector<double>& results_b, int iterations,
                        std::mt19937_64& rng);

struct GeometryReport {
  double same_concept_mean = 0.0;
  double related_mean = 0.0;
  double unrelated_mean = 0.0;
  double margin_violation_rate = 0.0;
  nlohmann::json to_json() const;
};

// Pairwise euclidean distances averaged by category; the violation rate is
// the fraction of same-vs-unrelated triplets with positive loss at margin 1.
GeometryReport embedding_geometry_report(const std::vector<std::vector<double>>& embeddings,
                                         const std::vector<std::string>& concept_of,
                                         const RelationSet& relations);

}  // namespace ontosim
