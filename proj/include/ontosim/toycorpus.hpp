#pragma once

#include <cstdint>
#include <filesystem>

namespace ontosim {

// Writes a synthetic demonstration corpus (abstracts.jsonl + ontology.jsonl)
// under dir. Texts are generated from a fixed word bank; nothing is copied
// from any real dataset.
void write_toy_corpus(const std::filesystem::path& dir, int n_abstracts, uint64_t seed);

}  // namespace ontosim
