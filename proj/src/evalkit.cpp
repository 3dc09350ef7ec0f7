#include "ontosim/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ontosim/errors.hpp"

namespace ontosim {

namespace {

double safe_f1(long tp, long fp, long fn) {
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

F1Pair f1_multilabel(const std::vector<std::vector<int>>& pred,
                     const std::vector<std::vector<int>>& gold) {
  if (pred.size() != gold.size()) {
    throw DataError("f1_multilabel: sample count mismatch");
  }
  if (pred.empty()) throw DataError("f1_multilabel: empty input");
  size_t n_classes = gold[0].size();
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].size() != n_classes || gold[i].size() != n_classes) {
      throw DataError("f1_multilabel: class count mismatch at sample " + std::to_string(i));
    }
  }
  long pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
  double macro_sum = 0.0;
  for (size_t c = 0; c < n_classes; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
      bool p = pred[i][c] != 0;
      bool g = gold[i][c] != 0;
      if (p && g) ++tp;
      if (p && !g) ++fp;
      if (!p && g) ++fn;
    }
    macro_sum += safe_f1(tp, fp, fn);  // empty classes score 0
    pooled_tp += tp;
    pooled_fp += fp;
    pooled_fn += fn;
  }
  F1Pair out;
  out.macro = macro_sum / static_cast<double>(n_classes);
  out.micro = safe_f1(pooled_tp, pooled_fp, pooled_fn);
  return out;
}

double token_f1(const std::map<int, std::set<size_t>>& pred,
                const std::map<int, std::set<size_t>>& gold) {
  long tp = 0, fp = 0, fn = 0;
  std::set<int> classes;
  for (const auto& [c, s] : pred) {
    (void)s;
    classes.insert(c);
  }
  for (const auto& [c, s] : gold) {
    (void)s;
    classes.insert(c);
  }
  for (int c : classes) {
    static const std::set<size_t> empty;
    const auto& p = pred.count(c) ? pred.at(c) : empty;
    const auto& g = gold.count(c) ? gold.at(c) : empty;
    for (size_t idx : p) {
      if (g.count(idx)) ++tp; else ++fp;
    }
    for (size_t idx : g) {
      if (!p.count(idx)) ++fn;
    }
  }
  if (tp + fp + fn == 0) return 1.0;  // vacuous perfection
  return safe_f1(tp, fp, fn);
}

std::vector<double> default_iou_thresholds() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

namespace {

double span_iou(const Span& a, const Span& b) {
  size_t inter_lo = std::max(a.start, b.start);
  size_t inter_hi = std::min(a.end, b.end);
  double inter = inter_hi > inter_lo ? static_cast<double>(inter_hi - inter_lo) : 0.0;
  double uni = static_cast<double>(std::max(a.end, b.end) - std::min(a.start, b.start));
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace

double span_f1(const std::vector<Span>& pred, const std::vector<Span>& gold,
               const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw UsageError("span_f1: at least one IoU threshold required");
  for (const auto& s : pred) {
    if (s.start >= s.end) throw DataError("span_f1: invalid predicted span");
  }
  for (const auto& s : gold) {
    if (s.start >= s.end) throw DataError("span_f1: invalid gold span");
  }
  if (pred.empty() && gold.empty()) return 1.0;

  struct Candidate {
    double iou;
    size_t p;
    size_t g;
  };
  std::vector<Candidate> candidates;
  for (size_t p = 0; p < pred.size(); ++p) {
    for (size_t g = 0; g < gold.size(); ++g) {
      if (pred[p].class_id != gold[g].class_id) continue;
      double iou = span_iou(pred[p], gold[g]);
      if (iou > 0) candidates.push_back({iou, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });

  double total = 0.0;
  for (double t : thresholds) {
    std::vector<char> pred_used(pred.size(), 0), gold_used(gold.size(), 0);
    long matches = 0;
    for (const auto& c : candidates) {
      if (c.iou < t) break;  // sorted descending
      if (pred_used[c.p] || gold_used[c.g]) continue;
      pred_used[c.p] = 1;
      gold_used[c.g] = 1;
      ++matches;
    }
    total += 2.0 * static_cast<double>(matches) /
             static_cast<double>(pred.size() + gold.size());
  }
  return total / static_cast<double>(thresholds.size());
}

double ndcg(const std::vector<double>& scores, const std::vector<int>& relevance) {
  if (scores.size() != relevance.size()) {
    throw DataError("ndcg: score/relevance length mismatch");
  }
  long n_relevant = std::count_if(relevance.begin(), relevance.end(),
                                  [](int r) { return r != 0; });
  if (n_relevant == 0) {
    throw DataError("ndcg: at least one relevant item required");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];  // ties keep original index order
  });
  double dcg = 0.0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (relevance[order[rank]] != 0) {
      dcg += 1.0 / std::log2(static_cast<double>(rank + 2));
    }
  }
  double idcg = 0.0;
  for (long rank = 0; rank < n_relevant; ++rank) {
    idcg += 1.0 / std::log2(static_cast<double>(rank + 2));
  }
  return dcg / idcg;
}

int majority_vote(const std::vector<int>& predictions) {
  if (predictions.empty()) throw DataError("majority_vote: empty prediction list");
  std::map<int, long> counts;
  for (int p : predictions) ++counts[p];
  int best = predictions[0];
  long best_count = -1;
  for (const auto& [cls, count] : counts) {  // map order: lowest class first
    if (count > best_count) {
      best = cls;
      best_count = count;
    }
  }
  return best;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  for (const auto& [task, metrics] : tasks) {
    nlohmann::json t;
    for (const auto& [name, value] : metrics.values) t[name] = value;
    t["mean"] = metrics.mean;
    j[task] = t;
  }
  j["benchmark"] = benchmark;
  return j;
}

MetricReport benchmark_aggregate(
    const std::map<std::string, std::map<std::string, double>>& task_metrics) {
  if (task_metrics.empty()) throw DataError("benchmark_aggregate: no tasks");
  MetricReport report;
  double benchmark_sum = 0.0;
  for (const auto& [task, metrics] : task_metrics) {
    if (metrics.empty()) {
      throw DataError("benchmark_aggregate: task has no metrics: " + task);
    }
    TaskMetrics tm;
    tm.values = metrics;
    double sum = 0.0;
    for (const auto& [name, value] : metrics) {
      (void)name;
      sum += value;
    }
    tm.mean = sum / static_cast<double>(metrics.size());
    benchmark_sum += tm.mean;
    report.tasks[task] = std::move(tm);
  }
  report.benchmark = benchmark_sum / static_cast<double>(task_metrics.size());
  return report;
}

double permutation_test(const std::vector<double>& results_a,
                        const std::vector<double>& results_b, int iterations,
                        std::mt19937_64& rng) {
  if (results_a.empty() || results_b.empty()) {
    throw DataError("permutation_test: both result lists must be non-empty");
  }
  if (iterations <= 0) throw UsageError("permutation_test: iterations must be positive");
  double observed = std::fabs(mean_of(results_a) - mean_of(results_b));
  std::vector<double> pool = results_a;
  pool.insert(pool.end(), results_b.begin(), results_b.end());
  size_t na = results_a.size();
  long at_least = 0;
  for (int it = 0; it < iterations; ++it) {
    std::shuffle(pool.begin(), pool.end(), rng);
    double sum_a = std::accumulate(pool.begin(), pool.begin() + static_cast<long>(na), 0.0);
    double sum_b = std::accumulate(pool.begin() + static_cast<long>(na), pool.end(), 0.0);
    double stat = std::fabs(sum_a / static_cast<double>(na) -
                            sum_b / static_cast<double>(pool.size() - na));
    if (stat >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(1 + at_least) / static_cast<double>(1 + iterations);
}

nlohmann::json GeometryReport::to_json() const {
  return nlohmann::json{{"same_concept_mean", same_concept_mean},
                        {"related_mean", related_mean},
                        {"unrelated_mean", unrelated_mean},
                        {"margin_violation_rate", margin_violation_rate}};
}

GeometryReport embedding_geometry_report(const std::vector<std::vector<double>>& embeddings,
                                         const std::vector<std::string>& concept_of,
                                         const RelationSet& relations) {
  if (embeddings.size() != concept_of.size()) {
    throw DataError("geometry report: embedding/concept list mismatch");
  }
  std::map<std::string, long> def_counts;
  for (const auto& c : concept_of) ++def_counts[c];
  for (const auto& [c, count] : def_counts) {
    if (count < 2) {
      throw DataError("geometry report: concept " + c + " has fewer than 2 embeddings");
    }
  }
  auto dist = [&](size_t a, size_t b) {
    double acc = 0.0;
    for (size_t j = 0; j < embeddings[a].size(); ++j) {
      double d = embeddings[a][j] - embeddings[b][j];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  double same_sum = 0.0, related_sum = 0.0, unrelated_sum = 0.0;
  long same_n = 0, related_n = 0, unrelated_n = 0;
  size_t n = embeddings.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double d = dist(i, j);
      if (concept_of[i] == concept_of[j]) {
        same_sum += d;
        ++same_n;
      } else if (relations.contains(concept_of[i], concept_of[j])) {
        related_sum += d;
        ++related_n;
      } else {
        unrelated_sum += d;
        ++unrelated_n;
      }
    }
  }

  // margin-1 violations over all same-concept anchor/positive assignments
  // against every definition of an unrelated concept
  long violations = 0, triplets = 0;
  for (size_t a = 0; a < n; ++a) {
    for (size_t p = 0; p < n; ++p) {
      if (a == p || concept_of[a] != concept_of[p]) continue;
      double d_ap = dist(a, p);
      for (size_t neg = 0; neg < n; ++neg) {
        if (concept_of[neg] == concept_of[a]) continue;
        if (relations.contains(concept_of[neg], concept_of[a])) continue;
        ++triplets;
        if (d_ap - dist(a, neg) + 1.0 > 0.0) ++violations;
      }
    }
  }

  auto mean_or_nan = [](double sum, long count) {
    return count > 0 ? sum / static_cast<double>(count)
                     : std::numeric_limits<double>::quiet_NaN();
  };
  GeometryReport out;
  out.same_concept_mean = mean_or_nan(same_sum, same_n);
  out.related_mean = mean_or_nan(related_sum, related_n);
  out.unrelated_mean = mean_or_nan(unrelated_sum, unrelated_n);
  out.margin_violation_rate =
      triplets > 0 ? static_cast<double>(violations) / static_cast<double>(triplets)
                   : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace ontosim
