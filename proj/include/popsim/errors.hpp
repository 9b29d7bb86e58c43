#pragma once

#include <stdexcept>
#include <string>

namespace popsim {

/// Bad experiment parameters, incompatible model/simulator combinations,
/// out-of-range knobs. The CLI maps this to a nonzero exit.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed in-memory structures: unknown state symbols, steps with
/// starter == reactor, configurations of the wrong arity, and so on.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

/// Internal consistency violations that indicate a bug rather than bad
/// input (e.g. an event annotation that contradicts the configurations).
struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable files: traces, protocol tables, experiment configs.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace popsim
