#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mathrec {

// Domain error carrying a stable machine-readable kind ("UnknownCommand",
// "ShapeMismatch", ...). The CLI prints "error: <kind>: <message>" on stderr
// and exits nonzero; tests match on kind().
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace mathrec
