#include "ontosim/synth.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "ontosim/errors.hpp"
#include "ontosim/jsonl.hpp"

namespace ontosim {

namespace {

uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t mix(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  x ^= x >> 33;
  return x;
}

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool is_stopword(const std::string& w) {
  static const std::unordered_set<std::string> stop = {
      "the",    "and",    "with",   "from",    "this",    "that",   "their",
      "these",  "those",  "have",   "has",     "been",    "were",   "are",
      "was",    "for",    "more",   "most",    "into",    "over",   "under",
      "between", "within", "across", "during", "about",   "which",  "while",
      "when",   "where",  "also",   "than",    "then",    "such",   "can",
      "may",    "might",  "its",    "our",     "they",    "them",   "there",
      "here",   "not",    "but",    "all",     "each",    "both",   "some",
      "only",   "very",   "often",  "thus",    "using",   "used",   "based",
      "study",  "studies", "results", "result", "effects", "effect", "data",
      "paper",  "abstract", "keywords", "show", "shows",   "found",  "strongly"};
  return stop.count(w) > 0;
}

// Lowercase alphabetic tokens of length >= 4, first-occurrence order.
std::vector<std::pair<std::string, int>> content_words(const std::string& text) {
  std::vector<std::pair<std::string, int>> words;  // (word, count)
  std::unordered_map<std::string, size_t> index;
  std::string cur;
  auto flush = [&]() {
    if (cur.size() >= 4 && !is_stopword(cur)) {
      auto it = index.find(cur);
      if (it == index.end()) {
        index[cur] = words.size();
        words.emplace_back(cur, 1);
      } else {
        ++words[it->second].second;
      }
    }
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalpha(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return words;
}

std::string extract_between(const std::string& text, const std::string& from,
                            const std::string& to) {
  size_t a = text.find(from);
  if (a == std::string::npos) return "";
  a += from.size();
  size_t b = text.find(to, a);
  if (b == std::string::npos) return trim(text.substr(a));
  return trim(text.substr(a, b - a));
}

// Shared pair-counting core for build_relations and auto_threshold.
std::map<std::pair<std::string, std::string>, int> cooccurrence_counts(
    const std::vector<Concept>& concepts,
    const std::map<std::string, std::vector<std::string>>& abstract_keywords) {
  std::unordered_map<std::string, std::string> key_to_id;
  for (const auto& c : concepts) {
    auto it = key_to_id.find(c.canonical_key);
    if (it == key_to_id.end() || c.id < it->second) {
      key_to_id[c.canonical_key] = c.id;
    }
  }
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& [abstract_id, keys] : abstract_keywords) {
    (void)abstract_id;
    std::set<std::string> ids;
    for (const auto& key : keys) {
      auto it = key_to_id.find(key);
      if (it != key_to_id.end()) ids.insert(it->second);
    }
    for (auto a = ids.begin(); a != ids.end(); ++a) {
      auto b = a;
      for (++b; b != ids.end(); ++b) {
        ++counts[{*a, *b}];
      }
    }
  }
  return counts;
}

}  // namespace

// --- stub backend ------------------------------------------------------------

std::string StubBackend::complete(const std::string& prompt, const GenOptions& opts) {
  uint64_t state = mix(fnv1a(prompt) ^ mix(seed_ + 0x9e3779b97f4a7c15ull) ^ mix(opts.nonce + 1));
  auto next = [&state]() {
    state = mix(state + 0x9e3779b97f4a7c15ull);
    return state;
  };

  std::string trimmed = trim(prompt);
  bool keyword_mode = trimmed.size() >= 9 && trimmed.compare(trimmed.size() - 9, 9, "Keywords:") == 0;

  if (keyword_mode) {
    auto words = content_words(prompt);
    // Frequent words first; ties keep first-occurrence order.
    std::stable_sort(words.begin(), words.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    size_t pool = std::min<size_t>(words.size(), 10);
    if (pool == 0) return " \n";
    size_t want = 3 + next() % 3;
    std::vector<size_t> picked;
    std::set<size_t> used;
    while (picked.size() < want && used.size() < pool) {
      size_t i = next() % pool;
      if (used.insert(i).second) picked.push_back(i);
    }
    std::sort(picked.begin(), picked.end());
    std::string out = " ";
    for (size_t j = 0; j < picked.size(); ++j) {
      if (j > 0) out += ", ";
      out += words[picked[j]].first;
      // occasionally emit a two-word phrase
      if (next() % 4 == 0 && picked[j] + 1 < words.size()) {
        out += " " + words[picked[j] + 1].first;
      }
    }
    out += "\n";
    return out;
  }

  // Definition mode: weave the concept name and context words into a sentence.
  std::string name = extract_between(prompt, "Concept: ", "\n");
  std::string context = extract_between(prompt, "Context: ", "\nFormat");
  if (name.empty()) name = "the subject";
  auto ctx_words = content_words(context);

  static const char* openers[] = {"A", "An entity described as a", "Broadly, a",
                                  "In this field, a"};
  static const char* adjectives[] = {"distinct", "recurring", "measurable", "characteristic",
                                     "notable", "particular", "observable", "defining"};
  static const char* verbs[] = {"shapes", "describes", "captures", "denotes",
                                "characterizes", "reflects", "drives", "concerns"};
  static const char* tails[] = {"observed across study systems", "relevant to field surveys",
                                "discussed in the literature", "central to this topic",
                                "seen in many ecosystems", "used when comparing sites"};

  // The prompt asks to avoid the term itself; the stub often ignores that,
  // which exercises the soft-enforcement flag downstream.
  std::string subject = next() % 4 != 0 ? name : "phenomenon";
  std::string ctx1 = ctx_words.empty() ? "systems" : ctx_words[next() % ctx_words.size()].first;
  std::string ctx2 = ctx_words.empty() ? "patterns" : ctx_words[next() % ctx_words.size()].first;

  std::ostringstream out;
  out << "Definition: " << openers[next() % 4] << " " << adjectives[next() % 8] << " "
      << subject << " that " << verbs[next() % 8] << " " << ctx1 << " and " << ctx2 << ", "
      << tails[next() % 6] << ".\nEND.";
  return out.str();
}

std::string StubBackend::descriptor() const {
  return "stub(seed=" + std::to_string(seed_) + ")";
}

// --- http backend ------------------------------------------------------------

HttpBackend HttpBackend::from_env() {
  HttpBackendConfig cfg;
  const char* endpoint = std::getenv("LLM_ENDPOINT");
  const char* key = std::getenv("LLM_API_KEY");
  const char* model = std::getenv("LLM_MODEL");
  if (endpoint == nullptr || *endpoint == '\0') {
    throw BackendError("LLM_ENDPOINT is not set; the http backend needs an endpoint");
  }
  cfg.endpoint = endpoint;
  if (key != nullptr) cfg.api_key = key;
  cfg.model = model != nullptr ? model : "default";
  return HttpBackend(cfg);
}

std::string HttpBackend::complete(const std::string& prompt, const GenOptions& opts) {
  httplib::Client client(config_.endpoint);
  client.set_read_timeout(120, 0);
  client.set_connection_timeout(10, 0);

  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  json body;
  std::string path;
  if (opts.chat) {
    path = "/v1/chat/completions";
    body = {{"model", config_.model},
            {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", opts.temperature},
            {"max_tokens", opts.max_tokens}};
  } else {
    path = "/v1/completions";
    body = {{"model", config_.model},
            {"prompt", prompt},
            {"temperature", opts.temperature},
            {"max_tokens", opts.max_tokens}};
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.backoff_ms * (1 << (attempt - 1))));
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
      last_error = "unexpected response body";
      continue;
    }
    const json& choice = reply["choices"][0];
    if (opts.chat) {
      if (choice.contains("message") && choice["message"].contains("content")) {
        return choice["message"]["content"].get<std::string>();
      }
    } else if (choice.contains("text")) {
      return choice["text"].get<std::string>();
    }
    last_error = "response missing completion text";
  }
  throw BackendError("backend " + descriptor() + " failed after " +
                     std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

std::string HttpBackend::descriptor() const {
  return "http(model=" + config_.model + ",endpoint=" + config_.endpoint + ")";
}

// --- audit log ---------------------------------------------------------------

GenerationLog::GenerationLog(const std::filesystem::path& path)
    : out_(path, std::ios::app) {
  if (!out_.is_open()) {
    throw DataError("cannot open generation log: " + path.string());
  }
}

void GenerationLog::append(const GenerationRecord& record) {
  json row = {{"prompt", record.prompt},       {"raw_response", record.raw_response},
              {"parsed", record.parsed},       {"backend", record.backend},
              {"timestamp", record.timestamp}, {"flags", record.flags}};
  std::lock_guard<std::mutex> lock(mu_);
  out_ << row.dump() << '\n';
  out_.flush();
}

// --- prompts and parsing -----------------------------------------------------

std::string keyword_prompt(const Abstract& abstract) {
  return abstract.title + "\n" + abstract.body + "\nKeywords:";
}

std::string definition_prompt(const std::string& concept_name, const std::string& context) {
  std::ostringstream out;
  out << "Task: Write a single sentence that defines the concept below. "
         "An existing description of the concept is given as context.\n\n"
      << "If the context lacks information, write a more complete sentence; if it is "
         "already sufficient, restate it in different words. Do not copy the context "
         "verbatim. Do not use the concept term itself in the sentence.\n\n"
      << "Concept: " << concept_name << "\n"
      << "Context: " << context << "\n\n"
      << "Format your response as:\n\nDefinition: [New Definition]\n\nEND.\n";
  return out.str();
}

std::vector<std::string> parse_keyword_continuation(const std::string& raw) {
  std::vector<std::string> entries;
  std::string cur;
  for (char c : raw) {
    if (c == ',' || c == ';' || c == '\n') {
      entries.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  entries.push_back(cur);

  std::vector<std::string> out;
  std::set<std::string> seen_keys;
  for (std::string entry : entries) {
    entry = trim(entry);
    // strip list numbering and bullet markers
    size_t i = 0;
    while (i < entry.size() && (entry[i] == '-' || entry[i] == '*' ||
                                static_cast<unsigned char>(entry[i]) >= 0x80)) {
      ++i;
    }
    size_t digits = i;
    while (digits < entry.size() && std::isdigit(static_cast<unsigned char>(entry[digits]))) {
      ++digits;
    }
    if (digits > i && digits < entry.size() &&
        (entry[digits] == '.' || entry[digits] == ')' || entry[digits] == ':')) {
      i = digits + 1;
    }
    entry = trim(entry.substr(i));
    while (!entry.empty() && (entry.back() == '.' || entry.back() == ':')) {
      entry.pop_back();
    }
    entry = trim(entry);
    if (entry.empty()) continue;
    int words = 1;
    for (char c : entry) {
      if (c == ' ') ++words;
    }
    if (words > 8) continue;
    std::string key = canonical_key(entry);
    if (key.empty() || !seen_keys.insert(key).second) continue;
    out.push_back(entry);
  }
  return out;
}

std::optional<std::string> parse_definition_response(const std::string& raw) {
  size_t a = raw.find("Definition:");
  if (a == std::string::npos) return std::nullopt;
  a += std::string("Definition:").size();
  size_t b = raw.find("END", a);
  std::string text = trim(b == std::string::npos ? "" : raw.substr(a, b - a));
  if (text.empty()) return std::nullopt;
  return text;
}

// --- operations --------------------------------------------------------------

std::vector<std::string> extract_keywords(const Abstract& abstract, LlmBackend& backend,
                                          GenerationLog* log) {
  if (abstract.body.empty()) {
    throw DataError("abstract " + abstract.id + " has an empty body");
  }
  std::string prompt = keyword_prompt(abstract);
  GenOptions opts;
  opts.temperature = 0.0;  // extraction should be stable
  opts.max_tokens = 64;
  std::string raw;
  try {
    raw = backend.complete(prompt, opts);
  } catch (const BackendError& e) {
    throw BackendError("keyword extraction failed for abstract " + abstract.id + ": " + e.what());
  }
  auto parsed = parse_keyword_continuation(raw);
  if (log != nullptr) {
    GenerationRecord rec{prompt, raw, parsed, backend.descriptor(), iso_timestamp(), {}};
    if (parsed.empty()) rec.flags.push_back("empty_parse");
    log->append(rec);
  }
  return parsed;
}

std::vector<Definition> generate_definitions(const Concept& concept_, const std::string& context,
                                             LlmBackend& backend, int m, GenerationLog* log) {
  std::string prompt = definition_prompt(concept_.name, context);
  std::string lower_name;
  for (unsigned char c : concept_.name) lower_name.push_back(static_cast<char>(std::tolower(c)));

  std::vector<Definition> out;
  for (int slot = 0; slot < m; ++slot) {
    GenOptions opts;
    opts.temperature = 0.8;  // paraphrase variety is the point
    opts.max_tokens = 96;
    opts.chat = true;
    opts.nonce = static_cast<uint64_t>(slot);

    std::optional<std::string> text;
    for (int attempt = 0; attempt < 2 && !text.has_value(); ++attempt) {
      std::string raw = backend.complete(prompt, opts);
      text = parse_definition_response(raw);
      if (log != nullptr) {
        GenerationRecord rec{prompt, raw, {}, backend.descriptor(), iso_timestamp(), {}};
        if (text.has_value()) {
          rec.parsed.push_back(*text);
          std::string lower_text;
          for (unsigned char c : *text) lower_text.push_back(static_cast<char>(std::tolower(c)));
          if (!lower_name.empty() && lower_text.find(lower_name) != std::string::npos) {
            rec.flags.push_back("contains_concept_name");
          }
        } else {
          rec.flags.push_back(attempt == 0 ? "unparseable" : "unparseable_after_retry");
        }
        log->append(rec);
      }
    }
    if (text.has_value()) {
      out.push_back(Definition{concept_.id, *text, DefinitionOrigin::generated});
    }
  }
  return out;
}

RelationSet build_relations(const std::vector<Concept>& concepts,
                            const std::map<std::string, std::vector<std::string>>& abstract_keywords,
                            const RelationConfig& config) {
  RelationSet out;
  for (const auto& [pair, count] : cooccurrence_counts(concepts, abstract_keywords)) {
    if (count >= config.k) out.add(pair.first, pair.second);
  }
  return out;
}

int auto_threshold(const std::vector<Concept>& concepts,
                   const std::map<std::string, std::vector<std::string>>& abstract_keywords,
                   double target_avg) {
  if (concepts.empty()) {
    throw DataError("auto_threshold needs a non-empty concept list");
  }
  auto counts = cooccurrence_counts(concepts, abstract_keywords);
  int max_count = 0;
  for (const auto& [pair, count] : counts) {
    (void)pair;
    max_count = std::max(max_count, count);
  }
  for (int k = max_count; k >= 1; --k) {
    size_t edges = 0;
    for (const auto& [pair, count] : counts) {
      (void)pair;
      if (count >= k) ++edges;
    }
    double mean = 2.0 * static_cast<double>(edges) / static_cast<double>(concepts.size());
    if (mean >= target_avg) return k;
  }
  return 1;
}

}  // namespace ontosim
