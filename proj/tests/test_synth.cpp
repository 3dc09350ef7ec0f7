#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include <httplib.h>

#include "ontosim/corpus.hpp"
#include "ontosim/errors.hpp"
#include "ontosim/jsonl.hpp"
#include "ontosim/selfcheck.hpp"
#include "ontosim/synth.hpp"

using namespace ontosim;
namespace fs = std::filesystem;

namespace {

// Test double that yields scripted responses in call order.
class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  std::string complete(const std::string&, const GenOptions&) override {
    if (calls_ >= responses_.size()) return responses_.back();
    return responses_[calls_++];
  }
  std::string descriptor() const override { return "scripted"; }
  size_t calls() const { return calls_; }

 private:
  std::vector<std::string> responses_;
  size_t calls_ = 0;
};

class FailingBackend : public LlmBackend {
 public:
  std::string complete(const std::string&, const GenOptions&) override {
    throw BackendError("connection refused");
  }
  std::string descriptor() const override { return "failing"; }
};

Abstract sample_abstract() {
  Abstract a;
  a.id = "a1";
  a.title = "Predation by invasive cats";
  a.body =
      "Invasive cats reduce native bird populations on islands. Predation pressure from "
      "cats alters island food webs. Bird declines follow cats in most island surveys.";
  return a;
}

}  // namespace

TEST_CASE("parse_keyword_continuation splits and trims") {
  auto kws = parse_keyword_continuation(" invasion, biodiversity loss\n");
  REQUIRE(kws.size() == 2);
  CHECK(kws[0] == "invasion");
  CHECK(kws[1] == "biodiversity loss");
}

TEST_CASE("parse_keyword_continuation strips numbering and bullets") {
  auto kws = parse_keyword_continuation("1. cats; 2. rats");
  REQUIRE(kws.size() == 2);
  CHECK(kws[0] == "cats");
  CHECK(kws[1] == "rats");
  auto bullets = parse_keyword_continuation("- soil\n* worms\n3) roots.");
  REQUIRE(bullets.size() == 3);
  CHECK(bullets[0] == "soil");
  CHECK(bullets[1] == "worms");
  CHECK(bullets[2] == "roots");
}

TEST_CASE("parse_keyword_continuation drops long and duplicate entries") {
  auto kws = parse_keyword_continuation(
      "a very long phrase that runs to twelve words in total for sure here, cats, Cats, cat");
  // the long phrase exceeds 8 words; "Cats" and "cat" stem-collapse with "cats"
  REQUIRE(kws.size() == 1);
  CHECK(kws[0] == "cats");
}

TEST_CASE("parse_definition_response extracts between markers") {
  auto text = parse_definition_response("Definition: A non-native organism that spreads.\nEND.");
  REQUIRE(text.has_value());
  CHECK(*text == "A non-native organism that spreads.");
  CHECK_FALSE(parse_definition_response("no markers at all").has_value());
  CHECK_FALSE(parse_definition_response("Definition:\nEND.").has_value());
}

TEST_CASE("stub backend is deterministic in (prompt, options, seed)") {
  StubBackend backend(42);
  GenOptions opts;
  opts.nonce = 3;
  std::string prompt = keyword_prompt(sample_abstract());
  CHECK(backend.complete(prompt, opts) == backend.complete(prompt, opts));
  StubBackend same_seed(42);
  CHECK(backend.complete(prompt, opts) == same_seed.complete(prompt, opts));
  StubBackend other_seed(43);
  CHECK(backend.complete(prompt, opts) != other_seed.complete(prompt, opts));
}

TEST_CASE("extract_keywords with stub yields sane keywords") {
  StubBackend backend(7);
  auto kws = extract_keywords(sample_abstract(), backend);
  REQUIRE_FALSE(kws.empty());
  std::set<std::string> keys;
  for (const auto& kw : kws) {
    int words = 1;
    for (char c : kw) {
      if (c == ' ') ++words;
    }
    CHECK(words <= 8);
    CHECK(keys.insert(canonical_key(kw)).second);
  }
}

TEST_CASE("extract_keywords propagates backend failure with the abstract id") {
  FailingBackend backend;
  CHECK_THROWS_WITH_AS(extract_keywords(sample_abstract(), backend), doctest::Contains("a1"),
                       BackendError);
}

TEST_CASE("generate_definitions parses, retries, and skips bad slots") {
  Concept c{"c1", "invasive species", ConceptSource::ontology, canonical_key("invasive species")};
  SUBCASE("clean responses") {
    ScriptedBackend backend({"Definition: A non-native organism that spreads.\nEND."});
    auto defs = generate_definitions(c, "An organism outside its range.", backend, 3);
    REQUIRE(defs.size() == 3);
    CHECK(defs[0].text == "A non-native organism that spreads.");
    CHECK(defs[0].origin == DefinitionOrigin::generated);
    CHECK(defs[0].concept_id == "c1");
  }
  SUBCASE("one slot recovers on retry, one is skipped") {
    ScriptedBackend backend({
        "garbage",                                   // slot 0, attempt 1
        "Definition: Organisms beyond range.\nEND.", // slot 0, retry
        "garbage",                                   // slot 1, attempt 1
        "garbage",                                   // slot 1, retry -> skipped
        "Definition: Spreading taxa.\nEND.",         // slot 2
    });
    auto defs = generate_definitions(c, "ctx", backend, 3);
    REQUIRE(defs.size() == 2);
    CHECK(defs[0].text == "Organisms beyond range.");
    CHECK(defs[1].text == "Spreading taxa.");
    CHECK(backend.calls() == 5);
  }
}

TEST_CASE("generation log records verbatim responses and flags name repeats") {
  fs::path log_path = fs::temp_directory_path() / "ontosim_genlog.jsonl";
  fs::remove(log_path);
  Concept c{"c1", "cats", ConceptSource::keyword, canonical_key("cats")};
  {
    GenerationLog log(log_path);
    ScriptedBackend backend({"Definition: Cats are felines that hunt.\nEND."});
    auto defs = generate_definitions(c, "ctx", backend, 1, &log);
    REQUIRE(defs.size() == 1);
  }
  auto rows = read_jsonl(log_path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["raw_response"] == "Definition: Cats are felines that hunt.\nEND.");
  CHECK(rows[0]["parsed"][0] == "Cats are felines that hunt.");
  bool flagged = false;
  for (const auto& f : rows[0]["flags"]) {
    if (f == "contains_concept_name") flagged = true;
  }
  CHECK(flagged);
}

namespace {

struct PlantedCorpus {
  std::vector<Concept> concepts;
  std::map<std::string, std::vector<std::string>> abstract_keywords;
};

// n_concepts concepts appearing in random subsets of n_abstracts abstracts.
PlantedCorpus make_planted(int n_concepts, int n_abstracts, std::mt19937_64& rng) {
  PlantedCorpus out;
  for (int i = 0; i < n_concepts; ++i) {
    std::string name = "concept" + std::to_string(i);
    out.concepts.push_back({"c" + std::to_string(i), name, ConceptSource::keyword,
                            canonical_key(name)});
  }
  for (int a = 0; a < n_abstracts; ++a) {
    std::vector<std::string> keys;
    for (int i = 0; i < n_concepts; ++i) {
      if (rng() % 3 == 0) keys.push_back(out.concepts[static_cast<size_t>(i)].canonical_key);
    }
    out.abstract_keywords["a" + std::to_string(a)] = keys;
  }
  return out;
}

}  // namespace

TEST_CASE("build_relations thresholds at count >= k") {
  std::vector<Concept> concepts = {
      {"c0", "cats", ConceptSource::keyword, canonical_key("cats")},
      {"c1", "rats", ConceptSource::keyword, canonical_key("rats")},
      {"c2", "owls", ConceptSource::keyword, canonical_key("owls")},
  };
  std::map<std::string, std::vector<std::string>> kw;
  for (int i = 0; i < 5; ++i) {
    kw["a" + std::to_string(i)] = {canonical_key("cats"), canonical_key("rats")};
  }
  for (int i = 5; i < 9; ++i) {
    kw["b" + std::to_string(i)] = {canonical_key("cats"), canonical_key("owls")};
  }
  RelationConfig cfg;
  cfg.k = 5;
  auto rel = build_relations(concepts, kw, cfg);
  CHECK(rel.contains("c0", "c1"));        // 5 co-occurrences, k=5
  CHECK_FALSE(rel.contains("c0", "c2"));  // only 4
  CHECK(rel.size() == 1);
}

TEST_CASE("build_relations equals the brute-force oracle on planted corpora") {
  std::mt19937_64 rng(123);
  for (int iter = 0; iter < 10; ++iter) {
    auto planted = make_planted(8, 10, rng);
    for (int k = 1; k <= 4; ++k) {
      RelationConfig cfg;
      cfg.k = k;
      auto fast = build_relations(planted.concepts, planted.abstract_keywords, cfg);
      auto slow = oracle::brute_force_relations(planted.concepts, planted.abstract_keywords, k);
      CHECK(fast.edges() == slow.edges());
    }
  }
}

TEST_CASE("auto_threshold picks the largest k meeting the target") {
  // 20 concepts; plant pair counts so k=4 keeps 5 edges (mean 0.5) and k=5 keeps 2.
  std::vector<Concept> concepts;
  for (int i = 0; i < 20; ++i) {
    std::string name = "k" + std::to_string(i);
    concepts.push_back({name, name, ConceptSource::keyword, canonical_key(name)});
  }
  std::map<std::string, std::vector<std::string>> kw;
  int next_abstract = 0;
  auto plant = [&](int a, int b, int times) {
    for (int t = 0; t < times; ++t) {
      kw["p" + std::to_string(next_abstract++)] = {concepts[static_cast<size_t>(a)].canonical_key,
                                                   concepts[static_cast<size_t>(b)].canonical_key};
    }
  };
  plant(0, 1, 6);
  plant(2, 3, 6);
  plant(4, 5, 4);
  plant(6, 7, 4);
  plant(8, 9, 4);
  CHECK(auto_threshold(concepts, kw, 0.5) == 4);
  // target 0: the maximal k that still yields an edge
  CHECK(auto_threshold(concepts, kw, 0.0) == 6);
}

TEST_CASE("auto_threshold falls back to 1") {
  std::vector<Concept> concepts = {
      {"c0", "cats", ConceptSource::keyword, canonical_key("cats")},
      {"c1", "rats", ConceptSource::keyword, canonical_key("rats")},
  };
  std::map<std::string, std::vector<std::string>> kw;
  kw["a0"] = {canonical_key("cats"), canonical_key("rats")};
  CHECK(auto_threshold(concepts, kw, 0.5) == 1);  // single abstract
  std::map<std::string, std::vector<std::string>> empty_kw;
  CHECK(auto_threshold(concepts, empty_kw, 0.5) == 1);
}

TEST_CASE("synth pipeline is reproducible offline") {
  auto run_once = [](uint64_t seed) {
    StubBackend backend(seed);
    Abstract a = sample_abstract();
    auto kws = extract_keywords(a, backend);
    std::vector<std::string> texts;
    int idx = 0;
    for (const auto& kw : kws) {
      Concept c{"kw-" + std::to_string(idx++), kw, ConceptSource::keyword, canonical_key(kw)};
      for (const auto& d : generate_definitions(c, a.body, backend, 5)) {
        texts.push_back(d.text);
      }
    }
    return texts;
  };
  auto first = run_once(9);
  auto second = run_once(9);
  CHECK(first == second);
  REQUIRE_FALSE(first.empty());
}

TEST_CASE("http backend talks to an OpenAI-style server with retry") {
  httplib::Server server;
  std::atomic<int> completion_calls{0};
  server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    int call = ++completion_calls;
    if (call == 1) {
      res.status = 500;  // first attempt fails; client must retry
      return;
    }
    auto body = json::parse(req.body);
    CHECK(body["prompt"].get<std::string>().find("Keywords:") != std::string::npos);
    res.set_content(json{{"choices", {{{"text", " cats, rats\n"}}}}}.dump(), "application/json");
  });
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    CHECK(body["messages"][0]["role"] == "user");
    res.set_content(
        json{{"choices",
              {{{"message", {{"role", "assistant"}, {"content", "Definition: X.\nEND."}}}}}}}
            .dump(),
        "application/json");
  });

  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.model = "test-model";
  cfg.backoff_ms = 10;
  HttpBackend backend(cfg);

  auto kws = extract_keywords(sample_abstract(), backend);
  REQUIRE(kws.size() == 2);
  CHECK(kws[0] == "cats");
  CHECK(completion_calls.load() == 2);

  Concept c{"c1", "cats", ConceptSource::keyword, canonical_key("cats")};
  auto defs = generate_definitions(c, "ctx", backend, 1);
  REQUIRE(defs.size() == 1);
  CHECK(defs[0].text == "X.");

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend reports failure after exhausting retries") {
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1";  // nothing listens here
  cfg.model = "test-model";
  cfg.max_retries = 1;
  cfg.backoff_ms = 1;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(extract_keywords(sample_abstract(), backend), BackendError);
}
