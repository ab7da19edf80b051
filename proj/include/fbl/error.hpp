#pragma once

#include <stdexcept>
#include <string>

namespace fbl {

enum class ErrorKind {
  validation,      // inadmissible input (problem data, config, preconditions)
  numerical,       // non-convergence, oracle failure
  out_of_domain,   // evaluation point outside the valid region of a field
  not_a_graph,     // free-boundary curve is not single-valued over the chosen axis
  io,              // missing or malformed files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace fbl
