#pragma once

#include <stdexcept>
#include <string>

namespace gipcnn {

// Model or tensor file violates its schema, or a graph fails validation.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Shapes, layouts, or operator geometry are inconsistent or unsupported.
class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

// A ciphertext's multiplicative budget is too low for the requested op.
// Signals that a bootstrap is required first.
class LevelError : public std::runtime_error {
 public:
  explicit LevelError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gipcnn
