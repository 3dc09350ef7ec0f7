#include "ontosim/stemmer.hpp"

#include <array>
#include <cstring>

namespace ontosim {

namespace {

// The algorithm works on a buffer b[0..k]; all helpers below take k as the
// index of the last letter of the stem currently under consideration.

bool is_consonant(const std::string& b, int i) {
  switch (b[static_cast<size_t>(i)]) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !is_consonant(b, i - 1);
    default:
      return true;
  }
}

// Number of VC sequences in b[0..k] ("measure" m).
int measure(const std::string& b, int k) {
  int n = 0;
  int i = 0;
  while (true) {
    if (i > k) return n;
    if (!is_consonant(b, i)) break;
    ++i;
  }
  ++i;
  while (true) {
    while (true) {
      if (i > k) return n;
      if (is_consonant(b, i)) break;
      ++i;
    }
    ++i;
    ++n;
    while (true) {
      if (i > k) return n;
      if (!is_consonant(b, i)) break;
      ++i;
    }
    ++i;
  }
}

bool has_vowel(const std::string& b, int k) {
  for (int i = 0; i <= k; ++i) {
    if (!is_consonant(b, i)) return true;
  }
  return false;
}

// *d: ends with a double consonant.
bool double_consonant(const std::string& b, int k) {
  if (k < 1) return false;
  if (b[static_cast<size_t>(k)] != b[static_cast<size_t>(k - 1)]) return false;
  return is_consonant(b, k);
}

// *o: ends consonant-vowel-consonant where the final consonant is not w, x or y.
bool cvc(const std::string& b, int k) {
  if (k < 2) return false;
  if (!is_consonant(b, k) || is_consonant(b, k - 1) || !is_consonant(b, k - 2)) return false;
  char c = b[static_cast<size_t>(k)];
  return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& b, int k, const char* suffix) {
  int len = static_cast<int>(std::strlen(suffix));
  if (len > k + 1) return false;
  if (b.compare(static_cast<size_t>(k + 1 - len), static_cast<size_t>(len), suffix) != 0) return false;
  return true;
}

void set_suffix(std::string& b, int& k, int old_len, const char* repl) {
  b.resize(static_cast<size_t>(k + 1 - old_len));
  b += repl;
  k = static_cast<int>(b.size()) - 1;
}

}  // namespace

std::string porter_stem(const std::string& word) {
  if (word.size() < 3) return word;
  std::string b = word;
  int k = static_cast<int>(b.size()) - 1;

  // Step 1a: plurals.
  if (b[static_cast<size_t>(k)] == 's') {
    if (ends_with(b, k, "sses")) {
      set_suffix(b, k, 4, "ss");
    } else if (ends_with(b, k, "ies")) {
      set_suffix(b, k, 3, "i");
    } else if (!ends_with(b, k, "ss")) {
      set_suffix(b, k, 1, "");
    }
  }

  // Step 1b: -eed, -ed, -ing.
  bool cleanup = false;
  if (ends_with(b, k, "eed")) {
    if (measure(b, k - 3) > 0) set_suffix(b, k, 3, "ee");
  } else if (ends_with(b, k, "ed") && has_vowel(b, k - 2)) {
    set_suffix(b, k, 2, "");
    cleanup = true;
  } else if (ends_with(b, k, "ing") && has_vowel(b, k - 3)) {
    set_suffix(b, k, 3, "");
    cleanup = true;
  }
  if (cleanup) {
    if (ends_with(b, k, "at")) {
      set_suffix(b, k, 2, "ate");
    } else if (ends_with(b, k, "bl")) {
      set_suffix(b, k, 2, "ble");
    } else if (ends_with(b, k, "iz")) {
      set_suffix(b, k, 2, "ize");
    } else if (double_consonant(b, k)) {
      char c = b[static_cast<size_t>(k)];
      if (c != 'l' && c != 's' && c != 'z') set_suffix(b, k, 1, "");
    } else if (measure(b, k) == 1 && cvc(b, k)) {
      set_suffix(b, k, 0, "e");
    }
  }

  // Step 1c: y -> i when the stem has a vowel.
  if (b[static_cast<size_t>(k)] == 'y' && has_vowel(b, k - 1)) {
    b[static_cast<size_t>(k)] = 'i';
  }

  // Steps 2-4 share the longest-match-wins rule: the longest matching suffix
  // is selected first and only its condition is tested.
  struct Rule {
    const char* from;
    const char* to;
  };

  auto apply_table = [&](const Rule* rules, size_t n, int min_measure) {
    int best = -1;
    int best_len = 0;
    for (size_t r = 0; r < n; ++r) {
      int len = static_cast<int>(std::strlen(rules[r].from));
      if (len > best_len && ends_with(b, k, rules[r].from)) {
        best = static_cast<int>(r);
        best_len = len;
      }
    }
    if (best < 0) return;
    if (measure(b, k - best_len) > min_measure - 1) {
      set_suffix(b, k, best_len, rules[static_cast<size_t>(best)].to);
    }
  };

  // Step 2 (m > 0).
  static const Rule step2[] = {
      {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
      {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
      {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
      {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
      {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"}};
  apply_table(step2, std::size(step2), 1);

  // Step 3 (m > 0).
  static const Rule step3[] = {{"icate", "ic"}, {"ative", ""}, {"alize", "al"},
                               {"iciti", "ic"}, {"ical", "ic"}, {"ful", ""},
                               {"ness", ""}};
  apply_table(step3, std::size(step3), 1);

  // Step 4 (m > 1); "ion" additionally requires a preceding s or t.
  {
    static const Rule step4[] = {{"al", ""},    {"ance", ""}, {"ence", ""}, {"er", ""},
                                 {"ic", ""},    {"able", ""}, {"ible", ""}, {"ant", ""},
                                 {"ement", ""}, {"ment", ""}, {"ent", ""},  {"ion", ""},
                                 {"ou", ""},    {"ism", ""},  {"ate", ""},  {"iti", ""},
                                 {"ous", ""},   {"ive", ""},  {"ize", ""}};
    int best = -1;
    int best_len = 0;
    for (size_t r = 0; r < std::size(step4); ++r) {
      int len = static_cast<int>(std::strlen(step4[r].from));
      if (len > best_len && ends_with(b, k, step4[r].from)) {
        best = static_cast<int>(r);
        best_len = len;
      }
    }
    if (best >= 0) {
      bool ok = measure(b, k - best_len) > 1;
      if (ok && std::strcmp(step4[static_cast<size_t>(best)].from, "ion") == 0) {
        char prev = k - best_len >= 0 ? b[static_cast<size_t>(k - best_len)] : '\0';
        ok = prev == 's' || prev == 't';
      }
      if (ok) set_suffix(b, k, best_len, "");
    }
  }

  // Step 5a: final e removal.
  if (b[static_cast<size_t>(k)] == 'e') {
    int m = measure(b, k - 1);
    if (m > 1 || (m == 1 && !cvc(b, k - 1))) set_suffix(b, k, 1, "");
  }

  // Step 5b: -ll -> -l when m > 1.
  if (double_consonant(b, k) && b[static_cast<size_t>(k)] == 'l' && measure(b, k) > 1) {
    set_suffix(b, k, 1, "");
  }

  return b;
}

}  // namespace ontosim
