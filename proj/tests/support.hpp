#pragma once

#include <functional>
#include <string>

#include "mathrec/error.hpp"

namespace testsupport {

// Runs fn and reports the domain-error kind it throws ("" if none).
inline std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const mathrec::Error& e) {
    return e.kind();
  }
  return "";
}

}  // namespace testsupport
