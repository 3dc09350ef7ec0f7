#pragma once

// Independent brute-force oracles used by tests and by the `selfcheck` CLI
// command. These deliberately re-derive results with naive algorithms and must
// stay independent of the implementation paths they check.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ontosim/corpus.hpp"

namespace ontosim::oracle {

// O(P^2 * A) pair counting: for every concept pair, scan every abstract.
RelationSet brute_force_relations(
    const std::vector<Concept>& concepts,
    const std::map<std::string, std::vector<std::string>>& abstract_keywords, int k);

// Naive per-triplet loop: relu(||a-p|| - ||a-n|| + margin), averaged.
// Embeddings are rows of a row-major matrix.
double naive_triplet_loss(const std::vector<double>& embeddings, size_t dim,
                          const std::vector<std::array<size_t, 3>>& triplets, double margin);

struct GradCheckReport {
  double max_rel_error = 0.0;
  size_t checked = 0;
  std::string worst_param;
};

// Central finite differences on `eval` (which must recompute the scalar loss
// from scratch) against the analytic gradient, over sampled coordinates.
GradCheckReport finite_difference_check(
    const std::function<double()>& eval, const std::function<size_t()>& n_params,
    const std::function<double(size_t)>& get_param, const std::function<void(size_t, double)>& set_param,
    const std::function<double(size_t)>& get_grad, const std::function<std::string(size_t)>& param_name,
    size_t max_coords, double epsilon, uint64_t seed);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs every oracle and gradient check; prints one line per check.
std::vector<CheckResult> run_selfcheck();

}  // namespace ontosim::oracle
