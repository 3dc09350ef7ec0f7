#include "ontosim/selfcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace ontosim::oracle {

RelationSet brute_force_relations(
    const std::vector<Concept>& concepts,
    const std::map<std::string, std::vector<std::string>>& abstract_keywords, int k) {
  RelationSet out;
  for (size_t i = 0; i < concepts.size(); ++i) {
    for (size_t j = i + 1; j < concepts.size(); ++j) {
      if (concepts[i].canonical_key == concepts[j].canonical_key) continue;
      int count = 0;
      for (const auto& [abstract_id, keys] : abstract_keywords) {
        (void)abstract_id;
        bool has_i = std::find(keys.begin(), keys.end(), concepts[i].canonical_key) != keys.end();
        bool has_j = std::find(keys.begin(), keys.end(), concepts[j].canonical_key) != keys.end();
        if (has_i && has_j) ++count;
      }
      if (count >= k) out.add(concepts[i].id, concepts[j].id);
    }
  }
  return out;
}

double naive_triplet_loss(const std::vector<double>& embeddings, size_t dim,
                          const std::vector<std::array<size_t, 3>>& triplets, double margin) {
  auto dist = [&](size_t a, size_t b) {
    double acc = 0.0;
    for (size_t d = 0; d < dim; ++d) {
      double diff = embeddings[a * dim + d] - embeddings[b * dim + d];
      acc += diff * diff;
    }
    return std::sqrt(acc);
  };
  double total = 0.0;
  for (const auto& t : triplets) {
    double v = dist(t[0], t[1]) - dist(t[0], t[2]) + margin;
    total += v > 0.0 ? v : 0.0;
  }
  return triplets.empty() ? 0.0 : total / static_cast<double>(triplets.size());
}

GradCheckReport finite_difference_check(
    const std::function<double()>& eval, const std::function<size_t()>& n_params,
    const std::function<double(size_t)>& get_param, const std::function<void(size_t, double)>& set_param,
    const std::function<double(size_t)>& get_grad, const std::function<std::string(size_t)>& param_name,
    size_t max_coords, double epsilon, uint64_t seed) {
  GradCheckReport report;
  size_t total = n_params();
  std::vector<size_t> coords(total);
  std::iota(coords.begin(), coords.end(), size_t{0});
  if (total > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }
  for (size_t c : coords) {
    double original = get_param(c);
    set_param(c, original + epsilon);
    double up = eval();
    set_param(c, original - epsilon);
    double down = eval();
    set_param(c, original);
    double numeric = (up - down) / (2.0 * epsilon);
    double analytic = get_grad(c);
    double rel = std::fabs(numeric - analytic) /
                 std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = param_name(c);
    }
    ++report.checked;
  }
  return report;
}

}  // namespace ontosim::oracle

// --- selfcheck runner ----------------------------------------------------------

#include "ontosim/encoder.hpp"
#include "ontosim/evalkit.hpp"
#include "ontosim/objectives.hpp"
#include "ontosim/synth.hpp"
#include "ontosim/tokenizer.hpp"

namespace ontosim::oracle {

namespace {

CheckResult check(const std::string& name, bool passed, const std::string& detail) {
  return CheckResult{name, passed, detail};
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

SimBatch numbered_batch(size_t n) {
  SimBatch batch;
  for (size_t i = 0; i < n; ++i) {
    std::string id = "c" + std::to_string(i);
    batch.entries.push_back({id, id + "-a", id + "-p"});
  }
  return batch;
}

CheckResult triplet_count_law() {
  RelationSet none;
  for (size_t n = 2; n <= 8; ++n) {
    auto ts = enumerate_triplets(numbered_batch(n), none);
    if (ts.size() != n * 4 * (n - 1)) {
      return check("triplet-count-law", false,
                   "n=" + std::to_string(n) + " gives " + std::to_string(ts.size()) +
                       " instead of " + std::to_string(n * 4 * (n - 1)));
    }
  }
  return check("triplet-count-law", true, "n*4(n-1) holds for n=2..8");
}

CheckResult sim_loss_oracle() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  RelationSet none;
  double worst = 0.0;
  for (int iter = 0; iter < 20; ++iter) {
    size_t n = 2 + rng() % 7;
    size_t d = 1 + rng() % 32;
    auto batch = numbered_batch(n);
    auto ts = enumerate_triplets(batch, none);
    std::vector<double> values(2 * n * d);
    for (auto& v : values) v = normal(rng);
    auto emb = ad::Tensor<double>::from_values({2 * n, d}, values, false);
    SimLossConfig cfg;
    auto fast = sim_loss(emb, ts, cfg).loss.item();
    std::vector<std::array<size_t, 3>> idx;
    for (const auto& t : ts.triplets) idx.push_back({t.anchor, t.positive, t.negative});
    double slow = naive_triplet_loss(values, d, idx, cfg.margin);
    worst = std::max(worst, std::fabs(fast - slow));
  }
  return check("sim-loss-oracle", worst < 1e-6,
               "max |vectorized - naive| = " + fmt(worst));
}

CheckResult gradient_check_losses() {
  EncoderConfig cfg;
  cfg.vocab_size = 40;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.d_ff = 32;
  cfg.max_len = 16;
  cfg.dropout = 0.0;
  // init scale 0.3 keeps relu pre-activations away from their kinks within
  // the finite-difference step
  auto enc = Encoder<double>::init(cfg, 77, 0.3);

  SimBatch batch = numbered_batch(3);
  RelationSet rel;
  rel.add("c0", "c1");
  auto triplets = enumerate_triplets(batch, rel);
  std::vector<std::vector<int>> sim_ids = {{2, 7, 8, 3},  {2, 9, 10, 3}, {2, 11, 3},
                                           {2, 12, 13, 3}, {2, 14, 3},   {2, 15, 16, 3}};
  MaskedBatch masked;
  masked.input_ids = {2, 4, 18, 4, 19, 3};
  masked.labels = {-1, 17, -1, 20, -1, -1};
  masked.mask_positions = {1, 3};

  auto loss_fn = [&]() {
    auto sim_outs = enc.forward(sim_ids);
    SimLossConfig sim_cfg;
    auto sim = sim_loss(Encoder<double>::cls_matrix(sim_outs), triplets, sim_cfg).loss;
    auto mlm_outs = enc.forward({masked.input_ids});
    auto mlm = mlm_loss(enc.mlm_logits(mlm_outs[0].token_states), masked);
    return ad::add(sim, mlm);
  };

  std::vector<ad::Tensor<double>> params;
  std::vector<size_t> offsets;
  size_t total = 0;
  for (auto& [name, t] : enc.named_parameters()) {
    (void)name;
    params.push_back(t);
    offsets.push_back(total);
    total += t.numel();
  }
  for (auto& p : params) p.zero_grad();
  loss_fn().backward();

  auto locate = [&](size_t flat) {
    size_t pi = 0;
    while (pi + 1 < params.size() && offsets[pi + 1] <= flat) ++pi;
    return std::make_pair(pi, flat - offsets[pi]);
  };
  auto report = finite_difference_check(
      [&]() {
        ad::NoGradGuard guard;
        return loss_fn().item();
      },
      [&]() { return total; },
      [&](size_t c) { auto [pi, off] = locate(c); return params[pi].values()[off]; },
      [&](size_t c, double v) { auto [pi, off] = locate(c); params[pi].values()[off] = v; },
      [&](size_t c) { auto [pi, off] = locate(c); return params[pi].grad()[off]; },
      [&](size_t c) { auto [pi, off] = locate(c); return params[pi].name(); },
      400, 1e-4, 4242);
  return check("gradient-check", report.max_rel_error < 1e-4,
               "max rel error " + fmt(report.max_rel_error) + " over " +
                   std::to_string(report.checked) + " coordinates (worst: " +
                   report.worst_param + ")");
}

CheckResult relations_oracle() {
  std::mt19937_64 rng(99);
  std::vector<Concept> concepts;
  for (int i = 0; i < 8; ++i) {
    std::string name = "concept" + std::to_string(i);
    concepts.push_back({"c" + std::to_string(i), name, ConceptSource::keyword,
                        canonical_key(name)});
  }
  for (int iter = 0; iter < 5; ++iter) {
    std::map<std::string, std::vector<std::string>> kw;
    for (int a = 0; a < 12; ++a) {
      std::vector<std::string> keys;
      for (const auto& c : concepts) {
        if (rng() % 3 == 0) keys.push_back(c.canonical_key);
      }
      kw["a" + std::to_string(a)] = keys;
    }
    for (int k = 1; k <= 4; ++k) {
      RelationConfig cfg;
      cfg.k = k;
      auto fast = build_relations(concepts, kw, cfg);
      auto slow = brute_force_relations(concepts, kw, k);
      if (fast.edges() != slow.edges()) {
        return check("relations-oracle", false, "edge sets differ at k=" + std::to_string(k));
      }
    }
  }
  return check("relations-oracle", true, "pair counting matches brute force");
}

CheckResult masking_statistics() {
  std::vector<std::string> words;
  for (int i = 0; i < 64; ++i) words.push_back("w" + std::to_string(i));
  auto tok = train_tokenizer(words, 80, 128);
  std::string text;
  for (int i = 0; i < 100; ++i) text += words[static_cast<size_t>(i) % 64] + " ";
  std::mt19937_64 rng(5);
  size_t selected = 0, total = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto ids = tok.encode(text);
    auto masked = mask_tokens(ids, 0.25, rng, tok);
    for (size_t pos : masked.mask_positions) {
      if (tok.is_special(ids[pos])) {
        return check("masking-statistics", false, "special token selected");
      }
    }
    selected += masked.mask_positions.size();
    total += ids.size() - 2;
  }
  double fraction = static_cast<double>(selected) / static_cast<double>(total);
  return check("masking-statistics", total >= 10000 && fraction >= 0.23 && fraction <= 0.27,
               "selected fraction " + fmt(fraction) + " of " + std::to_string(total) +
                   " tokens");
}

CheckResult metric_hand_values() {
  bool ok = true;
  std::string detail;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  };
  expect(std::fabs(token_f1({{0, {1, 2, 3}}}, {{0, {2, 3, 4}}}) - 2.0 / 3.0) < 1e-12,
         "token_f1 2/3");
  double hand_ndcg = ndcg({3, 2, 1}, {1, 0, 1});
  expect(std::fabs(hand_ndcg - 1.5 / (1.0 + 1.0 / std::log2(3.0))) < 1e-9, "ndcg hand value");
  expect(std::fabs(span_f1({{2, 8, 0}}, {{4, 10, 0}}, {0.5}) - 1.0) < 1e-12, "span IoU 0.5");
  expect(std::fabs(span_f1({{2, 8, 0}}, {{4, 10, 0}}, {0.6})) < 1e-12, "span IoU above");
  expect(majority_vote({0, 1}) == 0, "majority tie rule");
  auto report = benchmark_aggregate({
      {"hypothesis_clf", {{"macro_f1", 0.674}, {"micro_f1", 0.745}}},
      {"hypothesis_span", {{"token_f1", 0.406}, {"span_f1", 0.218}}},
      {"impact_clf", {{"macro_f1", 0.392}, {"micro_f1", 0.416}}},
      {"impact_evidence", {{"ndcg", 0.505}}},
  });
  expect(std::fabs(report.benchmark - 0.483) <= 5e-4 + 1e-9, "baseline row aggregate 0.483");
  std::mt19937_64 rng(1);
  expect(std::fabs(permutation_test({1, 2, 3}, {2, 3, 1}, 200, rng) - 1.0) < 1e-12,
         "permutation identical p=1");
  return check("metric-hand-values", ok, ok ? "token/span/ndcg/vote/aggregate/permutation" : detail);
}

CheckResult tokenizer_round_trip() {
  auto tok = train_tokenizer({"cats eat rats daily", "rats avoid cats"}, 32);
  auto ids = tok.encode("cats avoid rats [SEP] daily");
  auto toks = tok.decode(ids);
  bool ok = toks.size() == 7 && toks[0] == "[CLS]" && toks[1] == "cats" && toks[4] == "[SEP]" &&
            toks[6] == "[SEP]";
  return check("tokenizer-round-trip", ok, "encode/decode with [SEP] passthrough");
}

}  // namespace

std::vector<CheckResult> run_selfcheck() {
  std::vector<CheckResult> results;
  results.push_back(triplet_count_law());
  results.push_back(sim_loss_oracle());
  results.push_back(relations_oracle());
  results.push_back(masking_statistics());
  results.push_back(metric_hand_values());
  results.push_back(tokenizer_round_trip());
  results.push_back(gradient_check_losses());
  return results;
}

}  // namespace ontosim::oracle
