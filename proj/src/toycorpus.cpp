#include "ontosim/toycorpus.hpp"

#include <random>
#include <string>
#include <vector>

#include "ontosim/jsonl.hpp"

namespace ontosim {

namespace {

struct Topic {
  const char* name;
  const char* habitat;
  const char* action;
};

// Invented organisms and processes; recurring topic words let the keyword
// extractor and co-occurrence mining find structure.
const Topic kTopics[] = {
    {"marsh reed", "wetland", "spreads"},
    {"glass snail", "shoreline", "grazes"},
    {"ember beetle", "pine forest", "burrows"},
    {"ridge fern", "upland meadow", "colonizes"},
    {"mist carp", "river delta", "forages"},
    {"dune moss", "coastal dune", "stabilizes"},
    {"shade vine", "canopy gap", "climbs"},
    {"brine shrimp", "salt lagoon", "filters"},
    {"copper wasp", "orchard edge", "nests"},
    {"night heron", "reed bed", "hunts"},
    {"stone lichen", "scree slope", "encrusts"},
    {"silver minnow", "spring creek", "schools"},
};
constexpr size_t kTopicCount = sizeof(kTopics) / sizeof(kTopics[0]);

const char* kFillers[] = {
    "Surveys were repeated across three seasons.",
    "Plots were compared against unmanaged controls.",
    "Counts increased toward the end of the series.",
    "Local managers reported similar trends.",
    "Sampling followed the standard transect design.",
    "Rainfall varied little between years.",
};

}  // namespace

void write_toy_corpus(const std::filesystem::path& dir, int n_abstracts, uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);

  std::vector<json> abstracts;
  for (int i = 0; i < n_abstracts; ++i) {
    const Topic& a = kTopics[static_cast<size_t>(i) % kTopicCount];
    const Topic& b = kTopics[(static_cast<size_t>(i) / kTopicCount + static_cast<size_t>(i) + 1) %
                             kTopicCount];
    std::string title = "Interactions of " + std::string(a.name) + " and " + b.name +
                        " in " + a.habitat + " sites";
    std::string body;
    body += "The " + std::string(a.name) + " " + a.action + " across " + a.habitat +
            " plots where " + b.name + " populations persist. ";
    body += "Where the " + std::string(b.name) + " " + b.action + ", cover of " + a.name +
            " declined in " + std::to_string(2 + static_cast<int>(rng() % 7)) +
            " of the plots. ";
    body += "Removal of " + std::string(a.name) + " increased " + b.name +
            " recruitment near the " + b.habitat + " margin. ";
    body += kFillers[rng() % 6];
    body += " ";
    body += kFillers[rng() % 6];
    char id[16];
    std::snprintf(id, sizeof(id), "toy-%04d", i);
    abstracts.push_back(json{{"id", id}, {"title", title}, {"body", body}});
  }
  write_jsonl(dir / "abstracts.jsonl", abstracts);

  std::vector<json> ontology;
  for (size_t t = 0; t < kTopicCount; ++t) {
    const Topic& topic = kTopics[t];
    char id[16];
    std::snprintf(id, sizeof(id), "onto-%03zu", t);
    std::string definition = "A " + std::string(topic.name) + " is an organism of " +
                             topic.habitat + " environments that " + topic.action +
                             " during the growing season.";
    json related = json::array();
    // ring structure plus one cross link per third entry
    char next_id[16];
    std::snprintf(next_id, sizeof(next_id), "onto-%03zu", (t + 1) % kTopicCount);
    related.push_back(next_id);
    if (t % 3 == 0) {
      char cross[16];
      std::snprintf(cross, sizeof(cross), "onto-%03zu", (t + 5) % kTopicCount);
      related.push_back(cross);
    }
    ontology.push_back(json{{"id", id},
                            {"name", topic.name},
                            {"definition", definition},
                            {"related", related}});
  }
  write_jsonl(dir / "ontology.jsonl", ontology);
}

}  // namespace ontosim
