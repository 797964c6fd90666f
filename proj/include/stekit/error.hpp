#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stekit {

/// Shape or axis disagreement between tensor operands.
class dim_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition (non-scalar grad output, illegal init
/// mode, out-of-vocabulary token, ...).
class contract_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed spec string or config text. `position` is the 0-based column of
/// the first offending character when known, std::string::npos otherwise.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& msg, std::size_t pos = std::string::npos)
      : std::runtime_error(msg), position(pos) {}
  std::size_t position;
};

/// File container problems: bad magic, truncation, dtype mismatch.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required (e.g. NaN loss).
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stekit
