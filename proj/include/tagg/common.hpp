// Shared error types and small helpers.
#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tagg {

// Shape/dimension mismatches between tensors or against parameters.
class DimError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid run/model configuration (bad axis, scale-count mismatch, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File ingestion/serialization failures; message carries a byte offset
// where applicable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grammar validation failures; message names the offending rule.
class GrammarError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Index of the largest element; ties go to the lowest index.
template <typename Seq>
int argmax_lowest(const Seq& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace tagg
