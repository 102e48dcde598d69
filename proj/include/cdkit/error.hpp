#pragma once

#include <stdexcept>
#include <string>

namespace cdkit {

// Input that cannot be parsed (CSV, JSON, knowledge files).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that parses but violates a documented constraint.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structural problems in graphs: cycles, unknown nodes, invalid CPDAGs.
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cdkit
