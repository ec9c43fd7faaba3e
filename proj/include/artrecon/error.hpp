#pragma once

#include <stdexcept>
#include <string>

namespace artrecon {

/// Missing or unreadable input files, bad configuration values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (PFM, PNG, PLY, embedding files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace artrecon
