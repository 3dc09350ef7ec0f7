#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

#include "gradcheck_helpers.hpp"
#include "ontosim/objectives.hpp"
#include "ontosim/selfcheck.hpp"

using namespace ontosim;

namespace {

SimBatch make_batch(size_t n) {
  SimBatch batch;
  for (size_t i = 0; i < n; ++i) {
    std::string id = "c" + std::to_string(i);
    batch.entries.push_back({id, id + "-anchor", id + "-positive"});
  }
  return batch;
}

// Independent enumeration used as the oracle: builds the expected triplet
// multiset from the written rule, without sharing code with the implementation.
std::multiset<std::array<size_t, 4>> oracle_triplets(const SimBatch& batch,
                                                     const RelationSet& rel) {
  std::multiset<std::array<size_t, 4>> expected;
  size_t n = batch.size();
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::pair<size_t, size_t>> roles = {{2 * i, 2 * i + 1}, {2 * i + 1, 2 * i}};
    for (auto [a, p] : roles) {
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        expected.insert({a, p, 2 * j, 0});
        expected.insert({a, p, 2 * j + 1, 0});
      }
    }
  }
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!rel.contains(batch.entries[i].concept_id, batch.entries[j].concept_id)) continue;
      for (size_t a : {2 * i, 2 * i + 1}) {
        for (size_t p : {2 * j, 2 * j + 1}) {
          for (size_t k = 0; k < n; ++k) {
            if (k == i || k == j) continue;
            if (rel.contains(batch.entries[k].concept_id, batch.entries[i].concept_id)) continue;
            if (rel.contains(batch.entries[k].concept_id, batch.entries[j].concept_id)) continue;
            expected.insert({a, p, 2 * k, 1});
            expected.insert({a, p, 2 * k + 1, 1});
          }
        }
      }
    }
  }
  return expected;
}

std::multiset<std::array<size_t, 4>> as_multiset(const TripletSet& ts) {
  std::multiset<std::array<size_t, 4>> out;
  for (const auto& t : ts.triplets) {
    out.insert({t.anchor, t.positive, t.negative,
                t.kind == TripletKind::same_concept ? size_t{0} : size_t{1}});
  }
  return out;
}

}  // namespace

TEST_CASE("triplet count law: n * 4(n-1) without relations") {
  RelationSet none;
  for (size_t n = 2; n <= 8; ++n) {
    auto ts = enumerate_triplets(make_batch(n), none);
    CHECK(ts.size() == n * 4 * (n - 1));
    for (const auto& t : ts.triplets) {
      CHECK(t.kind == TripletKind::same_concept);
      CHECK(t.anchor != t.positive);
      CHECK(t.anchor != t.negative);
      CHECK(t.positive != t.negative);
    }
  }
}

TEST_CASE("triplet enumeration with one related pair: 24 + 16 = 40") {
  auto batch = make_batch(3);
  RelationSet rel;
  rel.add("c0", "c1");
  auto ts = enumerate_triplets(batch, rel);
  size_t same = 0, related = 0;
  for (const auto& t : ts.triplets) {
    (t.kind == TripletKind::same_concept ? same : related) += 1;
  }
  CHECK(same == 24);
  CHECK(related == 16);
  CHECK(ts.size() == 40);
  CHECK(as_multiset(ts) == oracle_triplets(batch, rel));
}

TEST_CASE("triplet enumeration matches the oracle on random relation graphs") {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 30; ++iter) {
    size_t n = 2 + rng() % 5;
    auto batch = make_batch(n);
    RelationSet rel;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        if (rng() % 3 == 0) rel.add(batch.entries[i].concept_id, batch.entries[j].concept_id);
      }
    }
    auto ts = enumerate_triplets(batch, rel);
    CHECK(as_multiset(ts) == oracle_triplets(batch, rel));
  }
}

TEST_CASE("ranking construction: same-concept negatives are a superset") {
  // The ranking effect, stated where it is structurally true: a concept's
  // same-concept triplets draw negatives from every other definition in the
  // batch, so for each related pair (i, j) the same-concept negative pool of
  // i (and of j) contains the whole related-triplet negative pool of (i, j).
  std::mt19937_64 rng(32);
  for (int iter = 0; iter < 20; ++iter) {
    size_t n = 3 + rng() % 4;
    auto batch = make_batch(n);
    RelationSet rel;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        if (rng() % 3 == 0) rel.add(batch.entries[i].concept_id, batch.entries[j].concept_id);
      }
    }
    auto ts = enumerate_triplets(batch, rel);
    std::map<size_t, std::set<size_t>> same_negatives;  // concept index -> negatives
    std::map<std::pair<size_t, size_t>, std::set<size_t>> related_negatives;
    for (const auto& t : ts.triplets) {
      size_t concept_of_anchor = t.anchor / 2;
      if (t.kind == TripletKind::same_concept) {
        same_negatives[concept_of_anchor].insert(t.negative);
      } else {
        related_negatives[{concept_of_anchor, t.positive / 2}].insert(t.negative);
      }
    }
    REQUIRE(same_negatives.size() == n);
    for (const auto& [pair_key, rel_set] : related_negatives) {
      for (size_t endpoint : {pair_key.first, pair_key.second}) {
        const auto& same_set = same_negatives.at(endpoint);
        CHECK(std::includes(same_set.begin(), same_set.end(), rel_set.begin(), rel_set.end()));
      }
    }
  }
}

TEST_CASE("sim_loss hand examples in one dimension") {
  auto emb = ad::Tensor<double>::from_values({3, 1}, {0.0, 0.1, 2.0}, true);
  TripletSet ts;
  ts.triplets.push_back({0, 1, 2, TripletKind::same_concept});
  SimLossConfig cfg;
  auto res = sim_loss(emb, ts, cfg);
  CHECK(res.loss.item() == doctest::Approx(0.0));  // relu(0.1 - 2.0 + 1)

  auto emb2 = ad::Tensor<double>::from_values({3, 1}, {0.0, 0.1, 0.5}, true);
  auto res2 = sim_loss(emb2, ts, cfg);
  CHECK(res2.loss.item() == doctest::Approx(0.6));  // relu(0.1 - 0.5 + 1)
  CHECK(res2.per_triplet[0] == doctest::Approx(0.6));
}

TEST_CASE("sim_loss equals the naive per-triplet loop") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal(0.0, 1.0);
  RelationSet none;
  for (int iter = 0; iter < 50; ++iter) {
    size_t n = 2 + rng() % 7;   // up to 8 concepts
    size_t d = 1 + rng() % 32;  // up to 32 dims
    auto batch = make_batch(n);
    auto ts = enumerate_triplets(batch, none);
    std::vector<double> values(2 * n * d);
    for (auto& v : values) v = normal(rng);
    auto emb = ad::Tensor<double>::from_values({2 * n, d}, values, true);
    SimLossConfig cfg;
    auto fast = sim_loss(emb, ts, cfg);

    std::vector<std::array<size_t, 3>> idx;
    for (const auto& t : ts.triplets) idx.push_back({t.anchor, t.positive, t.negative});
    double slow = oracle::naive_triplet_loss(values, d, idx, cfg.margin);
    CHECK(fast.loss.item() == doctest::Approx(slow).epsilon(1e-9));
  }
}

TEST_CASE("sim_loss scalar is invariant under batch permutation") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  size_t n = 5, d = 8;
  auto batch = make_batch(n);
  RelationSet rel;
  rel.add("c0", "c3");
  std::vector<double> values(2 * n * d);
  for (auto& v : values) v = normal(rng);
  auto emb = ad::Tensor<double>::from_values({2 * n, d}, values, false);
  SimLossConfig cfg;
  auto base = sim_loss(emb, enumerate_triplets(batch, rel), cfg);

  // permute the batch entries and the embedding rows consistently
  std::vector<size_t> perm = {3, 0, 4, 1, 2};
  SimBatch permuted;
  std::vector<double> pvalues(2 * n * d);
  for (size_t i = 0; i < n; ++i) {
    permuted.entries.push_back(batch.entries[perm[i]]);
    for (size_t r = 0; r < 2; ++r) {
      std::copy_n(values.begin() + static_cast<long>((2 * perm[i] + r) * d), d,
                  pvalues.begin() + static_cast<long>((2 * i + r) * d));
    }
  }
  auto pemb = ad::Tensor<double>::from_values({2 * n, d}, pvalues, false);
  auto permuted_loss = sim_loss(pemb, enumerate_triplets(permuted, rel), cfg);
  CHECK(permuted_loss.loss.item() == doctest::Approx(base.loss.item()).epsilon(1e-12));

  std::multiset<double> a(base.per_triplet.begin(), base.per_triplet.end());
  std::multiset<double> b(permuted_loss.per_triplet.begin(), permuted_loss.per_triplet.end());
  bool same_multiset = true;
  auto ita = a.begin();
  auto itb = b.begin();
  for (; ita != a.end() && itb != b.end(); ++ita, ++itb) {
    if (std::fabs(*ita - *itb) > 1e-9) same_multiset = false;
  }
  CHECK(same_multiset);
}

TEST_CASE("sim_loss rejects an empty triplet set") {
  auto emb = ad::Tensor<double>::from_values({2, 1}, {0.0, 1.0}, false);
  TripletSet empty;
  SimLossConfig cfg;
  CHECK_THROWS_AS(sim_loss(emb, empty, cfg), DataError);
}

TEST_CASE("gradient check through sim_loss") {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> normal(0.0, 1.0);
  size_t n = 3, d = 4;
  auto batch = make_batch(n);
  RelationSet rel;
  rel.add("c0", "c1");
  auto ts = enumerate_triplets(batch, rel);
  std::vector<double> values(2 * n * d);
  for (auto& v : values) v = normal(rng);
  auto emb = ad::Tensor<double>::from_values({2 * n, d}, values, true);
  emb.set_name("embeddings");
  SimLossConfig cfg;
  auto report = testing::gradcheck({emb}, [&]() { return sim_loss(emb, ts, cfg).loss; });
  CHECK(report.max_rel_error < 1e-6);
}

// --- masking -------------------------------------------------------------------

namespace {
TokenizerModel tiny_tokenizer(int vocab_size = 50) {
  std::vector<std::string> texts;
  for (int i = 0; i < vocab_size; ++i) texts.push_back("w" + std::to_string(i));
  return train_tokenizer(texts, vocab_size + TokenizerModel::kNumSpecials);
}
}  // namespace

TEST_CASE("mask_tokens boundaries: p=0 and p=1") {
  auto tok = tiny_tokenizer();
  std::vector<int> ids = tok.encode("w1 w2 w3 w4 w5");
  std::mt19937_64 rng(1);
  auto none = mask_tokens(ids, 0.0, rng, tok);
  CHECK(none.mask_positions.empty());
  CHECK(none.input_ids == ids);

  auto all = mask_tokens(ids, 1.0, rng, tok);
  CHECK(all.mask_positions.size() == ids.size() - 2);  // everything but CLS/SEP
  for (size_t pos : all.mask_positions) {
    CHECK_FALSE(tok.is_special(ids[pos]));
    CHECK(all.labels[pos] == ids[pos]);
  }
}

TEST_CASE("mask_tokens selection statistics at p=0.25") {
  auto tok = tiny_tokenizer();
  std::string text;
  for (int i = 0; i < 100; ++i) text += "w" + std::to_string(i % 50) + " ";
  std::mt19937_64 rng(7);
  size_t selected = 0, total = 0, mask_count = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int> ids = tok.encode(text);  // 100 maskable tokens per rep
    auto masked = mask_tokens(ids, 0.25, rng, tok);
    selected += masked.mask_positions.size();
    total += ids.size() - 2;
    for (size_t pos : masked.mask_positions) {
      CHECK_FALSE(tok.is_special(ids[pos]));
      if (masked.input_ids[pos] == TokenizerModel::kMask) ++mask_count;
    }
    // labels defined exactly on mask positions
    std::set<size_t> pos_set(masked.mask_positions.begin(), masked.mask_positions.end());
    for (size_t i = 0; i < masked.labels.size(); ++i) {
      CHECK((masked.labels[i] >= 0) == (pos_set.count(i) == 1));
    }
  }
  REQUIRE(total == 10000);
  double fraction = static_cast<double>(selected) / static_cast<double>(total);
  CHECK(fraction >= 0.23);
  CHECK(fraction <= 0.27);
  // 80% of selected should become [MASK]
  double mask_share = static_cast<double>(mask_count) / static_cast<double>(selected);
  CHECK(mask_share > 0.74);
  CHECK(mask_share < 0.86);
}

TEST_CASE("mlm_loss equals ln V on uniform logits and 0 on one-hot") {
  size_t seq = 6, vocab = 20;
  MaskedBatch masked;
  masked.input_ids.assign(seq, 5);
  masked.labels.assign(seq, -1);
  masked.labels[2] = 7;
  masked.labels[4] = 9;
  masked.mask_positions = {2, 4};

  auto uniform = ad::Tensor<double>::zeros({seq, vocab});
  CHECK(mlm_loss(uniform, masked).item() == doctest::Approx(std::log(20.0)));

  std::vector<double> sharp(seq * vocab, 0.0);
  sharp[2 * vocab + 7] = 100.0;
  sharp[4 * vocab + 9] = 100.0;
  auto onehot = ad::Tensor<double>::from_values({seq, vocab}, sharp);
  CHECK(mlm_loss(onehot, masked).item() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("mlm_loss ignores unmasked positions") {
  size_t seq = 5, vocab = 10;
  MaskedBatch masked;
  masked.input_ids.assign(seq, 5);
  masked.labels.assign(seq, -1);
  masked.labels[1] = 3;
  masked.mask_positions = {1};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> values(seq * vocab);
  for (auto& v : values) v = normal(rng);
  auto logits = ad::Tensor<double>::from_values({seq, vocab}, values);
  double base = mlm_loss(logits, masked).item();
  for (size_t j = 0; j < vocab; ++j) values[4 * vocab + j] += 10.0;  // unmasked row
  auto perturbed = ad::Tensor<double>::from_values({seq, vocab}, values);
  CHECK(mlm_loss(perturbed, masked).item() == doctest::Approx(base));
}

TEST_CASE("mlm_loss rejects a batch with no masked positions") {
  MaskedBatch masked;
  masked.input_ids = {2, 5, 3};
  masked.labels = {-1, -1, -1};
  auto logits = ad::Tensor<double>::zeros({3, 10});
  CHECK_THROWS_AS(mlm_loss(logits, masked), DataError);
}

// --- samplers --------------------------------------------------------------------

namespace {
SimDataset star_dataset(size_t n_concepts, RelationSet& rel, size_t defs_per_concept = 3) {
  std::vector<Concept> concepts;
  std::vector<Definition> defs;
  for (size_t i = 0; i < n_concepts; ++i) {
    std::string id = "c" + std::to_string(i);
    concepts.push_back({id, id, ConceptSource::ontology, id});
    for (size_t d = 0; d < defs_per_concept; ++d) {
      defs.push_back({id, id + "-def" + std::to_string(d), DefinitionOrigin::generated});
    }
    if (i > 0) rel.add("c0", id);
  }
  return make_sim_dataset(concepts, defs);
}
}  // namespace

TEST_CASE("make_sim_dataset excludes concepts with fewer than two definitions") {
  std::vector<Concept> concepts = {
      {"a", "a", ConceptSource::ontology, "a"},
      {"b", "b", ConceptSource::ontology, "b"},
  };
  std::vector<Definition> defs = {
      {"a", "d1", DefinitionOrigin::curated},
      {"a", "d2", DefinitionOrigin::generated},
      {"b", "only one", DefinitionOrigin::curated},
  };
  auto ds = make_sim_dataset(concepts, defs);
  REQUIRE(ds.size() == 1);
  CHECK(ds.concept_ids[0] == "a");
}

TEST_CASE("sample_sim_batch without relations is a uniform distinct sample") {
  RelationSet rel;
  std::vector<Concept> concepts;
  std::vector<Definition> defs;
  for (int i = 0; i < 10; ++i) {
    std::string id = "c" + std::to_string(i);
    concepts.push_back({id, id, ConceptSource::ontology, id});
    defs.push_back({id, id + "-d0", DefinitionOrigin::generated});
    defs.push_back({id, id + "-d1", DefinitionOrigin::generated});
  }
  auto ds = make_sim_dataset(concepts, defs);
  std::mt19937_64 rng(5);
  std::set<std::string> seen;
  for (int rep = 0; rep < 50; ++rep) {
    auto batch = sample_sim_batch(ds, rel, 4, rng);
    REQUIRE(batch.size() == 4);
    std::set<std::string> ids;
    for (const auto& e : batch.entries) {
      CHECK(ids.insert(e.concept_id).second);  // distinct concepts
      CHECK(e.anchor != e.positive);           // distinct definitions
      seen.insert(e.concept_id);
    }
  }
  CHECK(seen.size() == 10);  // every concept eventually sampled
}

TEST_CASE("sample_sim_batch on a star graph always includes a related pair") {
  RelationSet rel;
  auto ds = star_dataset(8, rel);
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    auto batch = sample_sim_batch(ds, rel, 4, rng);
    bool has_related = false;
    for (size_t i = 0; i < batch.size(); ++i) {
      for (size_t j = i + 1; j < batch.size(); ++j) {
        if (rel.contains(batch.entries[i].concept_id, batch.entries[j].concept_id)) {
          has_related = true;
        }
      }
    }
    CHECK(has_related);
  }
}

TEST_CASE("sample_sim_batch errors when too few eligible concepts") {
  RelationSet rel;
  auto ds = star_dataset(3, rel);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_sim_batch(ds, rel, 4, rng), DataError);
}

TEST_CASE("samplers are deterministic under a fixed seed") {
  RelationSet rel;
  auto ds = star_dataset(8, rel);
  std::mt19937_64 rng_a(9), rng_b(9);
  for (int rep = 0; rep < 10; ++rep) {
    auto a = sample_sim_batch(ds, rel, 4, rng_a);
    auto b = sample_sim_batch(ds, rel, 4, rng_b);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a.entries[i].concept_id == b.entries[i].concept_id);
      CHECK(a.entries[i].anchor == b.entries[i].anchor);
      CHECK(a.entries[i].positive == b.entries[i].positive);
    }
  }
}

TEST_CASE("sample_mlm_batch respects the 1:3 mixing ratio") {
  std::vector<std::string> sentences = {"s1", "s2", "s3"};
  std::vector<std::string> definitions = {"d1", "d2"};
  std::mt19937_64 rng(13);
  size_t def_count = 0, total = 100000;
  auto batch = sample_mlm_batch(sentences, definitions, total, rng);
  for (const auto& t : batch) {
    if (t[0] == 'd') ++def_count;
  }
  double fraction = static_cast<double>(def_count) / static_cast<double>(total);
  CHECK(fraction >= 0.24);
  CHECK(fraction <= 0.26);
}

TEST_CASE("sample_mlm_batch single-source and boundary ratios") {
  std::vector<std::string> sentences = {"s1", "s2"};
  std::vector<std::string> definitions = {"d1"};
  std::mt19937_64 rng(17);
  for (const auto& t : sample_mlm_batch(sentences, {}, 100, rng)) CHECK(t[0] == 's');
  for (const auto& t : sample_mlm_batch(sentences, definitions, 100, rng, 1, 0)) {
    CHECK(t[0] == 'd');  // ratio 1:0 -> definitions only
  }
  CHECK_THROWS_AS(sample_mlm_batch({}, {}, 10, rng), DataError);
}
