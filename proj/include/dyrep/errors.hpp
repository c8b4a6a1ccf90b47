#pragma once

#include <stdexcept>
#include <string>

namespace dyrep {

// Misuse of an operation (level out of range, k < 2, variant mismatch, ...).
struct domain_error : std::invalid_argument {
  explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// Bad external input: config files, CSV data, unknown experiment names.
struct input_error : std::runtime_error {
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// A mathematical invariant the library guarantees failed at runtime.
struct invariant_error : std::runtime_error {
  explicit invariant_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dyrep
