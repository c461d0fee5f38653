#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qoeloop {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented invariant (negative throughput, bad ladder...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A trace or batch file could not be parsed. record() is 1-based.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t record)
      : Error(what + " (record " + std::to_string(record) + ")"), record_(record) {}
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

// No plan satisfies the completion and stall constraints.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A search was refused because it exceeds its configured evaluation cap.
class RefusalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qoeloop
