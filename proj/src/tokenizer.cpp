#include "ontosim/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "ontosim/errors.hpp"

namespace ontosim {

namespace {

const std::vector<std::string>& special_markers() {
  static const std::vector<std::string> markers = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return markers;
}

bool match_special(const std::string& text, size_t pos, std::string& marker) {
  for (const auto& m : special_markers()) {
    if (text.compare(pos, m.size(), m) == 0) {
      marker = m;
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (size_t i = 0; i < text.size();) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '[') {
      std::string marker;
      if (match_special(text, i, marker)) {
        flush();
        tokens.push_back(marker);
        i += marker.size();
        continue;
      }
    }
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      if (!std::isspace(c)) {
        tokens.push_back(std::string(1, static_cast<char>(c)));
      }
    }
    ++i;
  }
  flush();
  return tokens;
}

std::vector<int> TokenizerModel::encode(const std::string& text) const {
  std::vector<int> ids;
  ids.push_back(kCls);
  int budget = max_len - 2;
  for (const auto& tok : tokenize(text)) {
    if (static_cast<int>(ids.size()) - 1 >= budget) break;
    auto it = vocab.find(tok);
    ids.push_back(it == vocab.end() ? kUnk : it->second);
  }
  ids.push_back(kSep);
  return ids;
}

std::vector<std::string> TokenizerModel::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) {
      throw DataError("decode: id out of range: " + std::to_string(id));
    }
    out.push_back(id_to_token[static_cast<size_t>(id)]);
  }
  return out;
}

TokenizerModel train_tokenizer(const std::vector<std::string>& texts, int vocab_size,
                               int max_len) {
  if (texts.empty()) {
    throw DataError("train_tokenizer: empty corpus");
  }
  if (vocab_size <= TokenizerModel::kNumSpecials) {
    throw DataError("train_tokenizer: vocab_size must exceed the special token count");
  }
  std::map<std::string, long> counts;
  for (const auto& text : texts) {
    for (const auto& tok : tokenize(text)) {
      bool special = std::find(special_markers().begin(), special_markers().end(), tok) !=
                     special_markers().end();
      if (!special) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  TokenizerModel tok;
  tok.max_len = max_len;
  tok.id_to_token = special_markers();
  size_t budget = static_cast<size_t>(vocab_size - TokenizerModel::kNumSpecials);
  for (size_t i = 0; i < ranked.size() && i < budget; ++i) {
    tok.id_to_token.push_back(ranked[i].first);
  }
  for (size_t i = 0; i < tok.id_to_token.size(); ++i) {
    tok.vocab[tok.id_to_token[i]] = static_cast<int>(i);
  }
  return tok;
}

}  // namespace ontosim
