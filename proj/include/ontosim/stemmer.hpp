#pragma once

#include <string>

namespace ontosim {

// Porter stemming algorithm (1980), operating on a lowercase ASCII word.
// Words shorter than 3 characters are returned unchanged.
std::string porter_stem(const std::string& word);

}  // namespace ontosim
