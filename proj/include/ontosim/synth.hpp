#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ontosim/corpus.hpp"

namespace ontosim {

struct GenOptions {
  double temperature = 0.0;
  int max_tokens = 128;
  uint64_t nonce = 0;   // distinguishes repeated sampling slots for one prompt
  bool chat = false;    // instruct/chat-completions endpoint instead of raw continuation
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const std::string& prompt, const GenOptions& opts) = 0;
  virtual std::string descriptor() const = 0;
};

// Deterministic offline backend: the response is a pure function of
// (prompt, options, seed). Keyword continuations echo frequent content words
// of the prompt; definition responses weave the concept name and context
// words into a templated sentence.
class StubBackend : public LlmBackend {
 public:
  explicit StubBackend(uint64_t seed) : seed_(seed) {}
  std::string complete(const std::string& prompt, const GenOptions& opts) override;
  std::string descriptor() const override;

 private:
  uint64_t seed_;
};

struct HttpBackendConfig {
  std::string endpoint;   // e.g. http://localhost:8000
  std::string api_key;
  std::string model;
  int max_tokens = 256;
  int max_retries = 3;
  int backoff_ms = 250;
};

// OpenAI-compatible client: raw completions for continuation prompts and
// chat completions for instruct prompts, with retry + exponential backoff.
class HttpBackend : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}
  // Reads LLM_ENDPOINT, LLM_API_KEY, LLM_MODEL.
  static HttpBackend from_env();
  std::string complete(const std::string& prompt, const GenOptions& opts) override;
  std::string descriptor() const override;

 private:
  HttpBackendConfig config_;
};

struct GenerationRecord {
  std::string prompt;
  std::string raw_response;
  std::vector<std::string> parsed;
  std::string backend;
  std::string timestamp;
  std::vector<std::string> flags;
};

// Append-only JSONL audit log; writes are serialized so concurrent backend
// calls may share one log.
class GenerationLog {
 public:
  explicit GenerationLog(const std::filesystem::path& path);
  void append(const GenerationRecord& record);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

struct RelationConfig {
  int k = 5;                // co-occurrence threshold (edge when count >= k)
  double target_avg = 0.5;  // auto-tuning target for mean relations per concept
};

// --- prompt construction and response parsing (pure) ------------------------

std::string keyword_prompt(const Abstract& abstract);
std::string definition_prompt(const std::string& concept_name, const std::string& context);

// Splits a "Keywords:" continuation on commas/semicolons/newlines, strips
// numbering and bullets, drops empty entries and entries longer than 8 words,
// and de-duplicates by canonical_key.
std::vector<std::string> parse_keyword_continuation(const std::string& raw);

// Extracts the text between "Definition:" and "END"; nullopt when either
// marker is missing or the extract is empty.
std::optional<std::string> parse_definition_response(const std::string& raw);

// --- operations --------------------------------------------------------------

std::vector<std::string> extract_keywords(const Abstract& abstract, LlmBackend& backend,
                                          GenerationLog* log = nullptr);

std::vector<Definition> generate_definitions(const Concept& concept_, const std::string& context,
                                             LlmBackend& backend, int m = 5,
                                             GenerationLog* log = nullptr);

// abstract_keywords maps abstract id -> canonical keys found in that abstract.
// Emits an edge for every unordered concept pair whose keys co-occur in at
// least config.k abstracts.
RelationSet build_relations(const std::vector<Concept>& concepts,
                            const std::map<std::string, std::vector<std::string>>& abstract_keywords,
                            const RelationConfig& config);

// Largest k >= 1 whose edge set keeps mean relations per concept at or above
// target_avg; falls back to 1 when no k >= 2 qualifies.
int auto_threshold(const std::vector<Concept>& concepts,
                   const std::map<std::string, std::vector<std::string>>& abstract_keywords,
                   double target_avg);

}  // namespace ontosim
