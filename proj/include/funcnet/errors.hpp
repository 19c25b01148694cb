#pragma once

#include <stdexcept>
#include <string>

namespace funcnet {

// Invalid configuration detected before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated file (IDX, weights, DAG text).
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace funcnet
