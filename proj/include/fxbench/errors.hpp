#pragma once

#include <stdexcept>
#include <string>

namespace fxbench {

// Error taxonomy mirrors the CLI exit codes: usage -> 1, data -> 2, model -> 3.

class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Parse failures carry the offending line for context.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, const std::string& line)
      : DataError(what + " [line: \"" + line + "\"]") {}
};

}  // namespace fxbench
