#pragma once

#include <stdexcept>
#include <string>

namespace ontosim {

// Malformed or inconsistent input data (bad JSONL, duplicate ids, ...).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// LLM backend transport or protocol failure after retries.
struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or command usage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ontosim
