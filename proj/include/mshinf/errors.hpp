#pragma once

#include <stdexcept>
#include <string>

#include "mshinf/tree.hpp"

namespace mshinf {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violated a precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector dimensions are inconsistent.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration or model description file could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File system or image format failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical operation failed (singular matrix, bad conditioning).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The requested attenuation level admits no stabilizing solution; `node`
/// is the first point of the tree where existence breaks down.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const NodeId& node, const std::string& what)
      : Error(what + " at node (" + std::to_string(node.level) + ", " +
              std::to_string(node.index) + ")"),
        node_(node) {}

  const NodeId& node() const { return node_; }

 private:
  NodeId node_;
};

}  // namespace mshinf
