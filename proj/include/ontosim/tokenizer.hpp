#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ontosim {

// Word-level frequency tokenizer: lowercased alphanumeric runs plus single
// punctuation characters. Literal special markers ("[SEP]" etc.) in the text
// map to their reserved ids.
struct TokenizerModel {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  std::unordered_map<std::string, int> vocab;  // includes the special markers
  std::vector<std::string> id_to_token;
  int max_len = 128;

  int vocab_size() const { return static_cast<int>(id_to_token.size()); }
  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  // [CLS] + token ids truncated to max_len - 2 + [SEP].
  std::vector<int> encode(const std::string& text) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;
};

// Raw token stream for one text (specials passed through as markers).
std::vector<std::string> tokenize(const std::string& text);

// Frequency vocabulary of the top (vocab_size - specials) tokens.
TokenizerModel train_tokenizer(const std::vector<std::string>& texts, int vocab_size,
                               int max_len = 128);

}  // namespace ontosim
