#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ontosim {

struct Abstract {
  std::string id;
  std::string title;
  std::string body;
  std::vector<std::string> sentences;  // filled by split_sentences
};

enum class ConceptSource { ontology, keyword };

const char* to_string(ConceptSource source);
ConceptSource concept_source_from_string(const std::string& s);

struct Concept {
  std::string id;
  std::string name;
  ConceptSource source = ConceptSource::ontology;
  std::string canonical_key;
};

enum class DefinitionOrigin { curated, generated };

const char* to_string(DefinitionOrigin origin);
DefinitionOrigin definition_origin_from_string(const std::string& s);

struct Definition {
  std::string concept_id;
  std::string text;
  DefinitionOrigin origin = DefinitionOrigin::curated;
};

// Undirected concept-id pairs; stored with first < second, no self-pairs.
class RelationSet {
 public:
  void add(const std::string& a, const std::string& b);
  bool contains(const std::string& a, const std::string& b) const;
  std::vector<std::string> neighbors(const std::string& id) const;
  size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }

  // Replaces endpoint ids via the given old-id -> new-id map (identity when
  // absent); drops edges that collapse onto themselves after remapping.
  RelationSet remapped(const std::map<std::string, std::string>& id_remap) const;

 private:
  std::set<std::pair<std::string, std::string>> edges_;
};

// --- ingestion -------------------------------------------------------------

// One JSON object per line: {"id": str, "title": str, "body": str}.
// Throws DataError on malformed lines (naming the line number) and on
// duplicate ids (naming the id).
std::vector<Abstract> load_abstracts(const std::filesystem::path& path);

// Rule-based splitter: sentence-final . ? ! followed by whitespace and an
// uppercase letter, guarded by a fixed abbreviation list. Sentences come back
// whitespace-normalized; joining them with single spaces reproduces the
// whitespace-normalized body.
std::vector<std::string> split_sentences(const Abstract& abstract);

struct OntologyLoad {
  std::vector<Concept> concepts;
  std::vector<Definition> definitions;
  RelationSet relations;
  size_t skipped_undefined = 0;  // concepts without a definition
  size_t dropped_edges = 0;      // edges touching an undefined concept or self
};

// One JSON object per line:
// {"id": str, "name": str, "definition": str|null, "related": [str, ...]}.
// Concepts without a definition are skipped (counted); edges referencing an
// id that appears nowhere in the file are an error.
OntologyLoad load_ontology(const std::filesystem::path& path);

// Lowercase, strip punctuation, collapse whitespace, Porter-stem each token.
std::string canonical_key(const std::string& name);

struct MergeResult {
  std::vector<Concept> concepts;
  std::vector<Definition> definitions;
  std::map<std::string, std::string> id_remap;  // merged id -> surviving id
};

// Merges concepts with equal canonical_key. The surviving concept is the
// lowest-id ontology member when sources are mixed, else the lowest id
// overall; definitions are re-pointed and their multiset preserved.
MergeResult merge_concepts(const std::vector<Concept>& concepts,
                           const std::vector<Definition>& definitions);

// Up to three sentences of context on each side of the target, which is
// enclosed by literal "[SEP]" tokens.
std::string build_evidence_window(const std::vector<std::string>& sentences, size_t index);

// --- corpus directory I/O ---------------------------------------------------

struct Corpus {
  std::vector<Abstract> abstracts;
  std::vector<Concept> concepts;
  std::vector<Definition> definitions;
  RelationSet relations;
};

void save_abstracts(const std::filesystem::path& dir, const std::vector<Abstract>& abstracts);
void save_concepts(const std::filesystem::path& dir, const std::vector<Concept>& concepts);
void save_definitions(const std::filesystem::path& dir, const std::vector<Definition>& definitions);
void save_relations(const std::filesystem::path& dir, const RelationSet& relations);

// Loads whichever corpus files exist under dir; missing files load empty.
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace ontosim
