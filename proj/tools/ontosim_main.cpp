// Command-line surface: dataset ingestion, LLM-backed enrichment, relation
// mining, pretraining, evaluation, and the selfcheck oracle suite.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "ontosim/checkpoint.hpp"
#include "ontosim/corpus.hpp"
#include "ontosim/errors.hpp"
#include "ontosim/evalkit.hpp"
#include "ontosim/jsonl.hpp"
#include "ontosim/probes.hpp"
#include "ontosim/selfcheck.hpp"
#include "ontosim/synth.hpp"
#include "ontosim/toycorpus.hpp"
#include "ontosim/trainer.hpp"
#include "ontosim/version.hpp"

namespace fs = std::filesystem;
using namespace ontosim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;
constexpr int kExitSelfcheck = 4;

// --- run manifests -------------------------------------------------------------

class ManifestWriter {
 public:
  ManifestWriter(std::string command, uint64_t seed)
      : started_(std::chrono::steady_clock::now()) {
    manifest_["command"] = std::move(command);
    manifest_["tool_version"] = kVersion;
    manifest_["seed"] = seed;
    manifest_["inputs"] = json::array();
    manifest_["outputs"] = json::array();
  }
  void input(const fs::path& p) { manifest_["inputs"].push_back(p.string()); }
  void output(const fs::path& p) { manifest_["outputs"].push_back(p.string()); }
  void config(json j) { manifest_["config"] = std::move(j); }
  void write(const fs::path& path) {
    manifest_["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    write_file_atomic(path, manifest_.dump(2) + "\n");
  }

 private:
  json manifest_;
  std::chrono::steady_clock::time_point started_;
};

// --- flat TOML-style config ------------------------------------------------------

std::map<std::string, std::string> parse_flat_toml(const fs::path& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw UsageError("cannot open config file: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    if (line.front() == '[') continue;  // section headers are ignored
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      size_t x = s.find_first_not_of(" \t");
      size_t y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}
  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  long integer(const std::string& key, long fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      return std::stol(it->second);
    } catch (...) {
      throw UsageError("config key " + key + " is not an integer: " + it->second);
    }
  }
  double number(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (...) {
      throw UsageError("config key " + key + " is not a number: " + it->second);
    }
  }
  bool flag(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw UsageError("config key " + key + " is not a boolean: " + it->second);
  }
  bool has(const std::string& key) const { return kv_.count(key) > 0; }

 private:
  std::map<std::string, std::string> kv_;
};

// --- shared helpers --------------------------------------------------------------

std::unique_ptr<LlmBackend> make_backend(const std::string& kind, uint64_t seed) {
  if (kind == "stub") return std::make_unique<StubBackend>(seed);
  if (kind == "http") return std::make_unique<HttpBackend>(HttpBackend::from_env());
  throw UsageError("unknown backend: " + kind + " (expected stub or http)");
}

std::map<std::string, std::vector<std::string>> load_keyword_map(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  for_each_jsonl(path, [&](size_t, const json& obj) {
    out[obj.at("abstract_id").get<std::string>()] =
        obj.at("keys").get<std::vector<std::string>>();
  });
  return out;
}

void save_keyword_map(const fs::path& path,
                      const std::map<std::string, std::vector<std::string>>& map) {
  std::vector<json> rows;
  for (const auto& [id, keys] : map) {
    rows.push_back(json{{"abstract_id", id}, {"keys", keys}});
  }
  write_jsonl(path, rows);
}

std::vector<std::string> corpus_texts(const Corpus& corpus) {
  std::vector<std::string> texts;
  for (const auto& a : corpus.abstracts) {
    for (const auto& s : a.sentences) texts.push_back(s);
  }
  for (const auto& d : corpus.definitions) texts.push_back(d.text);
  return texts;
}

// --- subcommands -----------------------------------------------------------------

int cmd_make_toy(const fs::path& out_dir, int n_abstracts, uint64_t seed) {
  write_toy_corpus(out_dir, n_abstracts, seed);
  ManifestWriter manifest("make-toy", seed);
  manifest.output(out_dir / "abstracts.jsonl");
  manifest.output(out_dir / "ontology.jsonl");
  manifest.config(json{{"abstracts", n_abstracts}});
  manifest.write(out_dir / "make-toy.manifest.json");
  std::cout << "wrote " << n_abstracts << " toy abstracts and the toy ontology to "
            << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_ingest_abstracts(const fs::path& in, const fs::path& out_dir) {
  auto abstracts = load_abstracts(in);
  size_t sentences = 0;
  for (auto& a : abstracts) {
    a.sentences = split_sentences(a);
    sentences += a.sentences.size();
  }
  fs::create_directories(out_dir);
  save_abstracts(out_dir, abstracts);
  ManifestWriter manifest("ingest-abstracts", 0);
  manifest.input(in);
  manifest.output(out_dir / "abstracts.jsonl");
  manifest.write(out_dir / "ingest-abstracts.manifest.json");
  std::cout << "ingested " << abstracts.size() << " abstracts, " << sentences
            << " sentences\n";
  return kExitOk;
}

int cmd_ingest_ontology(const fs::path& in, const fs::path& out_dir) {
  auto loaded = load_ontology(in);
  fs::create_directories(out_dir);

  // merge with any keyword concepts already present
  Corpus existing = load_corpus(out_dir);
  std::vector<Concept> concepts = existing.concepts;
  std::vector<Definition> definitions = existing.definitions;
  concepts.insert(concepts.end(), loaded.concepts.begin(), loaded.concepts.end());
  definitions.insert(definitions.end(), loaded.definitions.begin(), loaded.definitions.end());
  auto merged = merge_concepts(concepts, definitions);
  RelationSet relations = existing.relations.remapped(merged.id_remap);
  RelationSet loaded_relations = loaded.relations.remapped(merged.id_remap);
  for (const auto& [a, b] : loaded_relations.edges()) {
    relations.add(a, b);
  }

  save_concepts(out_dir, merged.concepts);
  save_definitions(out_dir, merged.definitions);
  save_relations(out_dir, relations);
  ManifestWriter manifest("ingest-ontology", 0);
  manifest.input(in);
  manifest.output(out_dir / "concepts.jsonl");
  manifest.output(out_dir / "definitions.jsonl");
  manifest.output(out_dir / "relations.jsonl");
  manifest.write(out_dir / "ingest-ontology.manifest.json");
  std::cout << "ingested " << loaded.concepts.size() << " concepts ("
            << loaded.skipped_undefined << " skipped without definition), "
            << loaded.relations.size() << " relation edges (" << loaded.dropped_edges
            << " dropped)\n";
  return kExitOk;
}

int cmd_extract_keywords(const fs::path& corpus_dir, const std::string& backend_kind,
                         uint64_t seed) {
  Corpus corpus = load_corpus(corpus_dir);
  if (corpus.abstracts.empty()) {
    throw DataError("no abstracts in " + corpus_dir.string() + "; run ingest-abstracts first");
  }
  auto backend = make_backend(backend_kind, seed);
  GenerationLog log(corpus_dir / "generations.jsonl");

  std::map<std::string, std::vector<std::string>> keyword_map;
  std::map<std::string, std::string> name_by_key;  // first surface form wins
  for (const auto& a : corpus.abstracts) {
    auto keywords = extract_keywords(a, *backend, &log);
    std::vector<std::string> keys;
    for (const auto& kw : keywords) {
      std::string key = canonical_key(kw);
      keys.push_back(key);
      name_by_key.emplace(key, kw);
    }
    keyword_map[a.id] = keys;
  }

  // materialize keyword concepts and merge with whatever already exists;
  // numbering continues past any ids from earlier runs
  std::vector<Concept> concepts = corpus.concepts;
  std::vector<Definition> definitions = corpus.definitions;
  int counter = 0;
  for (const auto& c : corpus.concepts) {
    int existing = 0;
    if (std::sscanf(c.id.c_str(), "kw-%d", &existing) == 1) {
      counter = std::max(counter, existing + 1);
    }
  }
  for (const auto& [key, name] : name_by_key) {
    char id[24];
    std::snprintf(id, sizeof(id), "kw-%05d", counter++);
    concepts.push_back({id, name, ConceptSource::keyword, key});
  }
  auto merged = merge_concepts(concepts, definitions);
  RelationSet relations = corpus.relations.remapped(merged.id_remap);

  save_concepts(corpus_dir, merged.concepts);
  save_definitions(corpus_dir, merged.definitions);
  save_relations(corpus_dir, relations);
  save_keyword_map(corpus_dir / "keywords.jsonl", keyword_map);

  ManifestWriter manifest("extract-keywords", seed);
  manifest.input(corpus_dir / "abstracts.jsonl");
  manifest.output(corpus_dir / "concepts.jsonl");
  manifest.output(corpus_dir / "keywords.jsonl");
  manifest.config(json{{"backend", backend_kind}});
  manifest.write(corpus_dir / "extract-keywords.manifest.json");
  std::cout << "extracted " << name_by_key.size() << " unique keywords across "
            << corpus.abstracts.size() << " abstracts; corpus now holds "
            << merged.concepts.size() << " concepts\n";
  return kExitOk;
}

int cmd_gen_definitions(const fs::path& corpus_dir, const std::string& backend_kind, int m,
                        uint64_t seed) {
  Corpus corpus = load_corpus(corpus_dir);
  if (corpus.concepts.empty()) {
    throw DataError("no concepts in " + corpus_dir.string() +
                    "; run ingest-ontology or extract-keywords first");
  }
  auto backend = make_backend(backend_kind, seed);
  GenerationLog log(corpus_dir / "generations.jsonl");

  // context per concept: the curated definition when present, otherwise the
  // body of the first abstract whose extracted keys contain the concept key
  std::map<std::string, std::string> curated;
  std::map<std::string, int> generated_count;
  for (const auto& d : corpus.definitions) {
    if (d.origin == DefinitionOrigin::curated) curated.emplace(d.concept_id, d.text);
    if (d.origin == DefinitionOrigin::generated) ++generated_count[d.concept_id];
  }
  std::map<std::string, std::string> context_by_key;
  if (fs::exists(corpus_dir / "keywords.jsonl")) {
    auto keyword_map = load_keyword_map(corpus_dir / "keywords.jsonl");
    std::map<std::string, std::string> body_by_abstract;
    for (const auto& a : corpus.abstracts) body_by_abstract[a.id] = a.body;
    for (const auto& [abstract_id, keys] : keyword_map) {  // map order: lowest id first
      for (const auto& key : keys) {
        context_by_key.emplace(key, body_by_abstract[abstract_id]);
      }
    }
  }

  size_t created = 0, skipped = 0;
  for (const auto& c : corpus.concepts) {
    if (generated_count[c.id] > 0) {
      ++skipped;  // already enriched
      continue;
    }
    std::string context;
    auto cur = curated.find(c.id);
    if (cur != curated.end()) {
      context = cur->second;
    } else {
      auto ctx = context_by_key.find(c.canonical_key);
      context = ctx != context_by_key.end() ? ctx->second : c.name;
    }
    auto defs = generate_definitions(c, context, *backend, m, &log);
    for (auto& d : defs) {
      corpus.definitions.push_back(d);
      ++created;
    }
  }
  save_definitions(corpus_dir, corpus.definitions);

  ManifestWriter manifest("gen-definitions", seed);
  manifest.input(corpus_dir / "concepts.jsonl");
  manifest.output(corpus_dir / "definitions.jsonl");
  manifest.config(json{{"backend", backend_kind}, {"m", m}});
  manifest.write(corpus_dir / "gen-definitions.manifest.json");
  std::cout << "generated " << created << " definitions (" << skipped
            << " concepts already enriched)\n";
  return kExitOk;
}

int cmd_build_relations(const fs::path& corpus_dir, int k, double auto_k_target, bool use_auto,
                        bool merge_existing) {
  Corpus corpus = load_corpus(corpus_dir);
  fs::path keywords_path = corpus_dir / "keywords.jsonl";
  if (!fs::exists(keywords_path)) {
    throw DataError("missing " + keywords_path.string() + "; run extract-keywords first");
  }
  if (corpus.concepts.empty()) {
    throw DataError("no concepts in " + corpus_dir.string());
  }
  auto keyword_map = load_keyword_map(keywords_path);

  RelationConfig cfg;
  if (use_auto) {
    cfg.target_avg = auto_k_target;
    cfg.k = auto_threshold(corpus.concepts, keyword_map, auto_k_target);
  } else {
    cfg.k = k;
  }
  RelationSet relations = build_relations(corpus.concepts, keyword_map, cfg);
  if (merge_existing) {
    for (const auto& [a, b] : corpus.relations.edges()) relations.add(a, b);
  }
  save_relations(corpus_dir, relations);

  double mean = corpus.concepts.empty()
                    ? 0.0
                    : 2.0 * static_cast<double>(relations.size()) /
                          static_cast<double>(corpus.concepts.size());
  ManifestWriter manifest("build-relations", 0);
  manifest.input(keywords_path);
  manifest.output(corpus_dir / "relations.jsonl");
  manifest.config(json{{"k", cfg.k}, {"auto", use_auto}, {"merged_existing", merge_existing}});
  manifest.write(corpus_dir / "build-relations.manifest.json");
  std::cout << "k=" << cfg.k << ": " << relations.size() << " edges, "
            << "mean relations per concept " << mean << "\n";
  return kExitOk;
}

int cmd_pretrain(const fs::path& corpus_dir, const fs::path& config_path,
                 const std::string& strategy_flag, const fs::path& out_dir,
                 const std::string& resume, long seed_override) {
  ConfigReader config(parse_flat_toml(config_path));

  TrainConfig train_cfg;
  train_cfg.strategy = strategy_from_string(
      !strategy_flag.empty() ? strategy_flag : config.str("strategy", "combined"));
  train_cfg.steps = static_cast<int>(config.integer("steps", 1000));
  train_cfg.sim_batch_size = static_cast<int>(config.integer("sim_batch_size", 16));
  train_cfg.mlm_batch_size = static_cast<int>(config.integer("mlm_batch_size", 16));
  train_cfg.learning_rate = config.number("learning_rate", 3e-4);
  if (config.has("weight_decay")) {
    train_cfg.weight_decay = config.number("weight_decay", 0.0);
  }
  train_cfg.mlm_mask_prob = config.number("mlm_mask_prob", 0.25);
  train_cfg.sim_margin = config.number("sim_margin", 1.0);
  train_cfg.mix_def = static_cast<int>(config.integer("mix_def", 1));
  train_cfg.mix_sent = static_cast<int>(config.integer("mix_sent", 3));
  train_cfg.warmup_frac = config.number("warmup_frac", 0.05);
  train_cfg.seed = static_cast<uint64_t>(config.integer("seed", 42));
  train_cfg.checkpoint_every = static_cast<int>(config.integer("checkpoint_every", 0));
  train_cfg.use_relations = config.flag("use_relations", true);
  if (seed_override >= 0) train_cfg.seed = static_cast<uint64_t>(seed_override);
  train_cfg.validate();

  EncoderConfig enc_cfg;
  enc_cfg.vocab_size = static_cast<int>(config.integer("vocab_size", 8192));
  enc_cfg.d_model = static_cast<int>(config.integer("d_model", 128));
  enc_cfg.n_layers = static_cast<int>(config.integer("n_layers", 4));
  enc_cfg.n_heads = static_cast<int>(config.integer("n_heads", 4));
  enc_cfg.d_ff = static_cast<int>(config.integer("d_ff", 512));
  enc_cfg.max_len = static_cast<int>(config.integer("max_len", 128));
  enc_cfg.dropout = config.number("dropout", 0.1);
  enc_cfg.validate();

  Corpus corpus = load_corpus(corpus_dir);
  auto data = make_train_data(corpus);

  fs::create_directories(out_dir);
  TrainResult result;
  if (!resume.empty()) {
    auto ckpt = load_checkpoint(resume);
    auto tokenizer = ckpt.tokenizer;
    auto encoder = ckpt.restore_encoder();
    std::cout << "resuming from step " << ckpt.step << " ("
              << encoder.num_parameters() << " parameters)\n";
    result = train(encoder, tokenizer, data, train_cfg, &out_dir, ckpt.step);
  } else {
    auto texts = corpus_texts(corpus);
    if (texts.empty()) throw DataError("corpus has no text to train a tokenizer on");
    auto tokenizer = train_tokenizer(texts, enc_cfg.vocab_size, enc_cfg.max_len);
    enc_cfg.vocab_size = tokenizer.vocab_size();  // shrink to the observed vocabulary
    auto encoder = Encoder<float>::init(enc_cfg, train_cfg.seed);
    std::cout << "training " << to_string(train_cfg.strategy) << " for " << train_cfg.steps
              << " steps; encoder has " << encoder.num_parameters() << " parameters (config "
              << parameter_count(enc_cfg) << ")\n";
    result = train(encoder, tokenizer, data, train_cfg, &out_dir);
  }

  save_checkpoint(result.checkpoint, out_dir / "checkpoint.bin");
  result.curve.to_csv(out_dir / "curve.csv");

  ManifestWriter manifest("pretrain", train_cfg.seed);
  manifest.input(corpus_dir);
  manifest.input(config_path);
  manifest.output(out_dir / "checkpoint.bin");
  manifest.output(out_dir / "curve.csv");
  manifest.config(json{{"strategy", to_string(train_cfg.strategy)},
                       {"steps", train_cfg.steps},
                       {"sim_batch_size", train_cfg.sim_batch_size},
                       {"mlm_batch_size", train_cfg.mlm_batch_size},
                       {"learning_rate", train_cfg.learning_rate},
                       {"weight_decay", train_cfg.effective_weight_decay()},
                       {"seed", train_cfg.seed},
                       {"use_relations", train_cfg.use_relations},
                       {"vocab_size", enc_cfg.vocab_size},
                       {"d_model", enc_cfg.d_model},
                       {"n_layers", enc_cfg.n_layers}});
  manifest.write(out_dir / "pretrain.manifest.json");

  const auto& last = result.curve.rows.back();
  std::cout << "done at step " << last.step << " (updates " << result.updates
            << ", loss passes " << result.backward_passes << "); final sim_loss "
            << last.sim_loss << ", mlm_loss " << last.mlm_loss << "\n";
  return kExitOk;
}

int cmd_evaluate(const fs::path& checkpoint_path, const fs::path& corpus_dir,
                 const std::string& suite, const fs::path& out_path) {
  if (suite != "geometry" && suite != "metrics") {
    throw UsageError("unknown suite: " + suite + " (expected geometry or metrics)");
  }
  auto ckpt = load_checkpoint(checkpoint_path);
  Corpus corpus = load_corpus(corpus_dir);
  json report;
  if (suite == "geometry") {
    report = corpus_geometry_report(ckpt, corpus).to_json();
  } else if (suite == "metrics") {
    report = intrinsic_metric_report(ckpt, corpus).to_json();
  } else {
    throw UsageError("unknown suite: " + suite + " (expected geometry or metrics)");
  }
  write_file_atomic(out_path, report.dump(2) + "\n");

  ManifestWriter manifest("evaluate", 0);
  manifest.input(checkpoint_path);
  manifest.input(corpus_dir);
  manifest.output(out_path);
  manifest.config(json{{"suite", suite}});
  manifest.write(out_path.parent_path().empty()
                     ? fs::path("evaluate.manifest.json")
                     : out_path.parent_path() / "evaluate.manifest.json");
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_selfcheck() {
  auto results = oracle::run_selfcheck();
  bool all_passed = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << ": " << r.detail << "\n";
    all_passed = all_passed && r.passed;
  }
  std::cout << (all_passed ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return all_passed ? kExitOk : kExitSelfcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ontosim: concept-embedding pretraining toolkit"};
  app.require_subcommand(1);

  // make-toy
  auto* make_toy = app.add_subcommand("make-toy", "generate the bundled synthetic demo corpus");
  std::string toy_out = "data/toy";
  int toy_abstracts = 50;
  uint64_t toy_seed = 42;
  make_toy->add_option("--out", toy_out, "output directory");
  make_toy->add_option("--abstracts", toy_abstracts, "number of abstracts");
  make_toy->add_option("--seed", toy_seed, "generator seed");

  // ingest-abstracts
  auto* ingest_abs = app.add_subcommand("ingest-abstracts", "load abstracts and split sentences");
  std::string ia_in, ia_out;
  ingest_abs->add_option("--in", ia_in, "abstracts.jsonl")->required();
  ingest_abs->add_option("--out", ia_out, "corpus directory")->required();

  // ingest-ontology
  auto* ingest_onto = app.add_subcommand("ingest-ontology", "load ontology concepts/relations");
  std::string io_in, io_out;
  ingest_onto->add_option("--in", io_in, "ontology.jsonl")->required();
  ingest_onto->add_option("--out", io_out, "corpus directory")->required();

  // extract-keywords
  auto* extract = app.add_subcommand("extract-keywords", "LLM keyword extraction per abstract");
  std::string ek_corpus, ek_backend = "stub";
  uint64_t ek_seed = 42;
  extract->add_option("--corpus", ek_corpus, "corpus directory")->required();
  extract->add_option("--backend", ek_backend, "stub or http");
  extract->add_option("--seed", ek_seed, "stub backend seed");

  // gen-definitions
  auto* gen = app.add_subcommand("gen-definitions", "LLM definition generation per concept");
  std::string gd_corpus, gd_backend = "stub";
  int gd_m = 5;
  uint64_t gd_seed = 42;
  gen->add_option("--corpus", gd_corpus, "corpus directory")->required();
  gen->add_option("--backend", gd_backend, "stub or http");
  gen->add_option("--m", gd_m, "definitions per concept");
  gen->add_option("--seed", gd_seed, "stub backend seed");

  // build-relations
  auto* relations = app.add_subcommand("build-relations", "co-occurrence relation mining");
  std::string br_corpus;
  int br_k = 5;
  double br_auto = 0.5;
  bool br_merge = false;
  relations->add_option("--corpus", br_corpus, "corpus directory")->required();
  auto* k_opt = relations->add_option("--k", br_k, "co-occurrence threshold (edge at count >= k)");
  auto* auto_opt = relations->add_option(
      "--auto-k", br_auto, "tune k toward this mean relations-per-concept target");
  relations->add_flag("--merge", br_merge, "keep existing (ontology) edges");
  k_opt->excludes(auto_opt);

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "run a pretraining strategy");
  std::string pt_corpus, pt_config, pt_strategy, pt_out, pt_resume;
  long pt_seed = -1;
  pretrain->add_option("--corpus", pt_corpus, "corpus directory")->required();
  pretrain->add_option("--config", pt_config, "train config file (flat TOML)")->required();
  pretrain->add_option("--strategy", pt_strategy, "mlm, sim or combined (overrides config)");
  pretrain->add_option("--out", pt_out, "output directory")->required();
  pretrain->add_option("--resume", pt_resume, "checkpoint to resume from");
  pretrain->add_option("--seed", pt_seed, "seed override");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint against a corpus");
  std::string ev_ckpt, ev_corpus, ev_suite = "geometry", ev_out = "report.json";
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  evaluate->add_option("--corpus", ev_corpus, "corpus directory")->required();
  evaluate->add_option("--suite", ev_suite, "geometry or metrics");
  evaluate->add_option("--out", ev_out, "report path");

  // selfcheck
  app.add_subcommand("selfcheck", "run every brute-force oracle and gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (make_toy->parsed()) return cmd_make_toy(toy_out, toy_abstracts, toy_seed);
    if (ingest_abs->parsed()) return cmd_ingest_abstracts(ia_in, ia_out);
    if (ingest_onto->parsed()) return cmd_ingest_ontology(io_in, io_out);
    if (extract->parsed()) return cmd_extract_keywords(ek_corpus, ek_backend, ek_seed);
    if (gen->parsed()) return cmd_gen_definitions(gd_corpus, gd_backend, gd_m, gd_seed);
    if (relations->parsed()) {
      return cmd_build_relations(br_corpus, br_k, br_auto, auto_opt->count() > 0, br_merge);
    }
    if (pretrain->parsed()) {
      return cmd_pretrain(pt_corpus, pt_config, pt_strategy, pt_out, pt_resume, pt_seed);
    }
    if (evaluate->parsed()) return cmd_evaluate(ev_ckpt, ev_corpus, ev_suite, ev_out);
    if (app.get_subcommand("selfcheck")->parsed()) return cmd_selfcheck();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
