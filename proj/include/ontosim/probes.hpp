#pragma once

// Checkpoint evaluation against a corpus: definition embeddings, the geometry
// diagnostic, and an intrinsic metric benchmark built from the corpus itself
// (definition retrieval, nearest-centroid concept classification, and
// related-concept ranking).

#include <string>
#include <vector>

#include "ontosim/checkpoint.hpp"
#include "ontosim/corpus.hpp"
#include "ontosim/evalkit.hpp"

namespace ontosim {

struct DefinitionEmbeddings {
  std::vector<std::vector<double>> vectors;  // one CLS embedding per definition
  std::vector<std::string> concept_of;       // parallel concept ids
};

// Embeds every definition of every SIM-eligible concept (>= 2 definitions).
DefinitionEmbeddings embed_definitions(const Checkpoint& checkpoint, const Corpus& corpus);

GeometryReport corpus_geometry_report(const Checkpoint& checkpoint, const Corpus& corpus);

// Tasks: definition_retrieval (NDCG of same-concept definitions under
// euclidean ranking), concept_classification (leave-one-out nearest-centroid,
// macro/micro F1) and, when relations exist, related_ranking (NDCG of related
// concepts under centroid distance).
MetricReport intrinsic_metric_report(const Checkpoint& checkpoint, const Corpus& corpus);

}  // namespace ontosim
