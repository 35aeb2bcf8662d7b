#pragma once

#include <stdexcept>
#include <string>

namespace mgtta {

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  divergence_undefined,
  invalid_residual,
  uninitialized_anchor,
  empty_batch,
  precondition_violated,
  guarantee_violated,
  rejection_budget,
  config_invalid,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

inline void require_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw Error(ErrorKind::dimension_mismatch,
                std::string(where) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace mgtta
