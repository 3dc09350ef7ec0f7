#include "ontosim/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ontosim/errors.hpp"
#include "ontosim/jsonl.hpp"
#include "ontosim/stemmer.hpp"

namespace ontosim {

namespace {

// Tokens (including the trailing period) that never end a sentence.
const std::set<std::string>& abbreviations() {
  static const std::set<std::string> abbrevs = {
      "e.g.", "i.e.", "al.",  "vs.",  "fig.",  "figs.", "spp.", "sp.",
      "cf.",  "etc.", "ca.",  "eq.",  "eqs.",  "no.",   "nos.", "approx.",
      "resp.", "dr.", "mr.",  "ms.",  "prof.", "st."};
  return abbrevs;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // trims leading whitespace
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out.push_back(' ');
      out.push_back(static_cast<char>(c));
      in_space = false;
    }
  }
  return out;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const char* to_string(ConceptSource source) {
  return source == ConceptSource::ontology ? "ontology" : "keyword";
}

ConceptSource concept_source_from_string(const std::string& s) {
  if (s == "ontology") return ConceptSource::ontology;
  if (s == "keyword") return ConceptSource::keyword;
  throw DataError("unknown concept source: " + s);
}

const char* to_string(DefinitionOrigin origin) {
  return origin == DefinitionOrigin::curated ? "curated" : "generated";
}

DefinitionOrigin definition_origin_from_string(const std::string& s) {
  if (s == "curated") return DefinitionOrigin::curated;
  if (s == "generated") return DefinitionOrigin::generated;
  throw DataError("unknown definition origin: " + s);
}

void RelationSet::add(const std::string& a, const std::string& b) {
  if (a == b) {
    throw DataError("relation self-pair not allowed: " + a);
  }
  edges_.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
}

bool RelationSet::contains(const std::string& a, const std::string& b) const {
  if (a == b) return false;
  return edges_.count(a < b ? std::make_pair(a, b) : std::make_pair(b, a)) > 0;
}

std::vector<std::string> RelationSet::neighbors(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& [x, y] : edges_) {
    if (x == id) out.push_back(y);
    if (y == id) out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RelationSet RelationSet::remapped(const std::map<std::string, std::string>& id_remap) const {
  RelationSet out;
  for (const auto& [a, b] : edges_) {
    auto ia = id_remap.find(a);
    auto ib = id_remap.find(b);
    const std::string& na = ia == id_remap.end() ? a : ia->second;
    const std::string& nb = ib == id_remap.end() ? b : ib->second;
    if (na != nb) out.add(na, nb);
  }
  return out;
}

std::vector<Abstract> load_abstracts(const std::filesystem::path& path) {
  std::vector<Abstract> out;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("title") ||
        !obj.contains("body") || !obj["id"].is_string() || !obj["title"].is_string() ||
        !obj["body"].is_string()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": abstract record needs string fields id, title, body");
    }
    Abstract a;
    a.id = obj["id"].get<std::string>();
    a.title = obj["title"].get<std::string>();
    a.body = obj["body"].get<std::string>();
    if (!seen.insert(a.id).second) {
      throw DataError("duplicate abstract id: " + a.id);
    }
    if (obj.contains("sentences") && obj["sentences"].is_array()) {
      for (const auto& s : obj["sentences"]) a.sentences.push_back(s.get<std::string>());
    }
    out.push_back(std::move(a));
  });
  return out;
}

std::vector<std::string> split_sentences(const Abstract& abstract) {
  const std::string text = normalize_whitespace(abstract.body);
  std::vector<std::string> sentences;
  if (text.empty()) return sentences;

  size_t start = 0;
  for (size_t i = 0; i + 2 < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    if (text[i + 1] != ' ') continue;
    unsigned char next = static_cast<unsigned char>(text[i + 2]);
    if (!std::isupper(next)) continue;
    if (c == '.') {
      size_t tok_start = text.rfind(' ', i);
      tok_start = tok_start == std::string::npos ? 0 : tok_start + 1;
      std::string token = lowercase(text.substr(tok_start, i - tok_start + 1));
      if (abbreviations().count(token) > 0) continue;
    }
    sentences.push_back(text.substr(start, i - start + 1));
    start = i + 2;
  }
  if (start < text.size()) {
    sentences.push_back(text.substr(start));
  }
  return sentences;
}

OntologyLoad load_ontology(const std::filesystem::path& path) {
  struct Entry {
    std::string name;
    std::string definition;
    bool has_definition = false;
    std::vector<std::string> related;
  };
  std::map<std::string, Entry> entries;
  std::vector<std::string> order;

  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("name")) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": ontology record needs id and name");
    }
    Entry e;
    std::string id = obj["id"].get<std::string>();
    e.name = obj["name"].get<std::string>();
    if (obj.contains("definition") && obj["definition"].is_string()) {
      e.definition = obj["definition"].get<std::string>();
      e.has_definition = !e.definition.empty();
    }
    if (obj.contains("related") && obj["related"].is_array()) {
      for (const auto& r : obj["related"]) e.related.push_back(r.get<std::string>());
    }
    if (entries.count(id) > 0) {
      throw DataError("duplicate ontology concept id: " + id);
    }
    entries[id] = std::move(e);
    order.push_back(id);
  });

  OntologyLoad out;
  for (const auto& id : order) {
    const Entry& e = entries.at(id);
    if (!e.has_definition) {
      ++out.skipped_undefined;
      continue;
    }
    Concept c;
    c.id = id;
    c.name = e.name;
    c.source = ConceptSource::ontology;
    c.canonical_key = canonical_key(e.name);
    out.concepts.push_back(std::move(c));
    out.definitions.push_back(Definition{id, e.definition, DefinitionOrigin::curated});
  }
  for (const auto& id : order) {
    const Entry& e = entries.at(id);
    for (const auto& rid : e.related) {
      auto it = entries.find(rid);
      if (it == entries.end()) {
        throw DataError("ontology edge references unknown concept: " + rid);
      }
      if (rid == id || !e.has_definition || !it->second.has_definition) {
        ++out.dropped_edges;
        continue;
      }
      out.relations.add(id, rid);
    }
  }
  return out;
}

std::string canonical_key(const std::string& name) {
  std::string cleaned;
  cleaned.reserve(name.size());
  for (unsigned char c : name) {
    if (std::isalnum(c) || c >= 0x80) {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else {
      cleaned.push_back(' ');
    }
  }
  std::istringstream in(cleaned);
  std::string token;
  std::string out;
  while (in >> token) {
    if (!out.empty()) out.push_back(' ');
    out += porter_stem(token);
  }
  return out;
}

MergeResult merge_concepts(const std::vector<Concept>& concepts,
                           const std::vector<Definition>& definitions) {
  // Pick the surviving concept per canonical key.
  std::map<std::string, const Concept*> survivor;
  for (const auto& c : concepts) {
    auto it = survivor.find(c.canonical_key);
    if (it == survivor.end()) {
      survivor[c.canonical_key] = &c;
      continue;
    }
    const Concept* cur = it->second;
    bool c_onto = c.source == ConceptSource::ontology;
    bool cur_onto = cur->source == ConceptSource::ontology;
    if ((c_onto && !cur_onto) || (c_onto == cur_onto && c.id < cur->id)) {
      it->second = &c;
    }
  }

  MergeResult out;
  std::set<std::string> emitted;
  for (const auto& c : concepts) {
    const Concept* win = survivor.at(c.canonical_key);
    out.id_remap[c.id] = win->id;
    if (c.id == win->id && emitted.insert(win->id).second) {
      out.concepts.push_back(*win);
    }
  }

  out.definitions = definitions;
  for (auto& d : out.definitions) {
    auto it = out.id_remap.find(d.concept_id);
    if (it != out.id_remap.end()) d.concept_id = it->second;
  }
  return out;
}

std::string build_evidence_window(const std::vector<std::string>& sentences, size_t index) {
  if (index >= sentences.size()) {
    throw DataError("evidence window index out of range: " + std::to_string(index));
  }
  std::string out;
  size_t lo = index >= 3 ? index - 3 : 0;
  size_t hi = std::min(sentences.size(), index + 4);
  for (size_t i = lo; i < index; ++i) {
    out += sentences[i];
    out.push_back(' ');
  }
  out += "[SEP] ";
  out += sentences[index];
  out += " [SEP]";
  for (size_t i = index + 1; i < hi; ++i) {
    out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

void save_abstracts(const std::filesystem::path& dir, const std::vector<Abstract>& abstracts) {
  std::vector<json> rows;
  rows.reserve(abstracts.size());
  for (const auto& a : abstracts) {
    rows.push_back(json{{"id", a.id}, {"title", a.title}, {"body", a.body},
                        {"sentences", a.sentences}});
  }
  write_jsonl(dir / "abstracts.jsonl", rows);
}

void save_concepts(const std::filesystem::path& dir, const std::vector<Concept>& concepts) {
  std::vector<json> rows;
  rows.reserve(concepts.size());
  for (const auto& c : concepts) {
    rows.push_back(json{{"id", c.id}, {"name", c.name}, {"source", to_string(c.source)},
                        {"canonical_key", c.canonical_key}});
  }
  write_jsonl(dir / "concepts.jsonl", rows);
}

void save_definitions(const std::filesystem::path& dir, const std::vector<Definition>& definitions) {
  std::vector<json> rows;
  rows.reserve(definitions.size());
  for (const auto& d : definitions) {
    rows.push_back(json{{"concept_id", d.concept_id}, {"text", d.text},
                        {"origin", to_string(d.origin)}});
  }
  write_jsonl(dir / "definitions.jsonl", rows);
}

void save_relations(const std::filesystem::path& dir, const RelationSet& relations) {
  std::vector<json> rows;
  for (const auto& [a, b] : relations.edges()) {
    rows.push_back(json{{"a", a}, {"b", b}});
  }
  write_jsonl(dir / "relations.jsonl", rows);
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  namespace fs = std::filesystem;
  if (fs::exists(dir / "abstracts.jsonl")) {
    corpus.abstracts = load_abstracts(dir / "abstracts.jsonl");
  }
  if (fs::exists(dir / "concepts.jsonl")) {
    for_each_jsonl(dir / "concepts.jsonl", [&](size_t, const json& obj) {
      Concept c;
      c.id = obj.at("id").get<std::string>();
      c.name = obj.at("name").get<std::string>();
      c.source = concept_source_from_string(obj.at("source").get<std::string>());
      c.canonical_key = obj.at("canonical_key").get<std::string>();
      corpus.concepts.push_back(std::move(c));
    });
  }
  if (fs::exists(dir / "definitions.jsonl")) {
    for_each_jsonl(dir / "definitions.jsonl", [&](size_t, const json& obj) {
      Definition d;
      d.concept_id = obj.at("concept_id").get<std::string>();
      d.text = obj.at("text").get<std::string>();
      d.origin = definition_origin_from_string(obj.at("origin").get<std::string>());
      corpus.definitions.push_back(std::move(d));
    });
  }
  if (fs::exists(dir / "relations.jsonl")) {
    for_each_jsonl(dir / "relations.jsonl", [&](size_t, const json& obj) {
      corpus.relations.add(obj.at("a").get<std::string>(), obj.at("b").get<std::string>());
    });
  }
  return corpus;
}

}  // namespace ontosim
